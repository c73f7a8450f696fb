//! Two-layer perceptron with hand-written backpropagation and an Adam
//! optimizer. Shared by the importance estimator and the classification head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// `x → relu(x·W1 + b1) [→ dropout] → ·W2 + b2`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Intermediate values kept from the forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Pre-activation of the hidden layer.
    pub hidden_pre: Matrix,
    /// Hidden activation after ReLU and dropout.
    pub hidden: Matrix,
    pub out: Matrix,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w1: glorot(input, hidden, rng),
            b1: vec![0.0; hidden],
            w2: glorot(hidden, output, rng),
            b2: vec![0.0; output],
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Matrix::zeros(input, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, output),
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    /// `dropout_mask`, when given, multiplies the hidden activation
    /// elementwise (already scaled by `1/(1-p)`).
    pub fn forward(&self, x: &Matrix, dropout_mask: Option<&Matrix>) -> MlpCache {
        let mut hidden_pre = x.matmul(&self.w1);
        hidden_pre.add_row_broadcast(&self.b1);
        let mut hidden = hidden_pre.clone();
        for v in hidden.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if let Some(mask) = dropout_mask {
            for (h, m) in hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *h *= m;
            }
        }
        let mut out = hidden.matmul(&self.w2);
        out.add_row_broadcast(&self.b2);
        MlpCache {
            hidden_pre,
            hidden,
            out,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Matrix {
        self.forward(x, None).out
    }

    /// Gradients of a scalar loss given `d_out = ∂L/∂out`. Returns the input
    /// gradient too when `want_input_grad` is set.
    pub fn backward(
        &self,
        x: &Matrix,
        cache: &MlpCache,
        d_out: &Matrix,
        dropout_mask: Option<&Matrix>,
        want_input_grad: bool,
    ) -> (MlpGrads, Option<Matrix>) {
        let w2 = cache.hidden.t_matmul(d_out);
        let b2 = d_out.column_sums();
        let mut d_hidden = d_out.matmul_t(&self.w2);
        if let Some(mask) = dropout_mask {
            for (g, m) in d_hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *g *= m;
            }
        }
        for (g, &z) in d_hidden
            .as_mut_slice()
            .iter_mut()
            .zip(cache.hidden_pre.as_slice())
        {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        let w1 = x.t_matmul(&d_hidden);
        let b1 = d_hidden.column_sums();
        let dx = want_input_grad.then(|| d_hidden.matmul_t(&self.w1));
        (MlpGrads { w1, b1, w2, b2 }, dx)
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite())
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }
}

impl MlpGrads {
    pub(crate) fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
        ]
    }
}

fn glorot<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data)
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, else `1/(1-p)`.
pub fn dropout_mask<R: Rng>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Matrix {
    let keep = 1.0 - p;
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 / keep })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Adam over an ordered list of parameter slices.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
