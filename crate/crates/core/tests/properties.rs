use proptest::prelude::*;

use importance_dp_gnn::amp::amp_propagate;
use importance_dp_gnn::budget::{bound_lhs, weight_coefficients, BetaRule};
use importance_dp_gnn::classifier::softmax_rows;
use importance_dp_gnn::graph::{bound_degree, row_normalize, sym_norm_adj, Adjacency, Graph};
use importance_dp_gnn::matrix::{l1_norm, l2_norm, Matrix};
use importance_dp_gnn::perturb::{edge_randomize, laplace_aggregate, randomized_response};
use importance_dp_gnn::budget::allocate;
use importance_dp_gnn::tnie::{estimate_score, propagate_scores, rank_importance, TnieConfig, TnieModel};

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Adjacency> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut i = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if bits[i] {
                        edges.push((u, v));
                    }
                    i += 1;
                }
            }
            Adjacency::from_edges(n, edges).unwrap()
        })
    })
}

fn matrix_strategy(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(lo..hi, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn graph_with_features(max_n: usize, d: usize) -> impl Strategy<Value = Graph> {
    graph_strategy(max_n).prop_flat_map(move |adj| {
        let n = adj.n();
        matrix_strategy(n, d, 0.0, 1.0).prop_map(move |x| {
            Graph::new(adj.clone(), row_normalize(&x).unwrap(), vec![None; n], 1).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_propagation_is_linear(
        adj in graph_strategy(10),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let n = adj.n();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect());
        let g = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect());
        let mut combo = f.clone();
        combo.scale(a);
        combo.axpy(b, &g);
        let lhs = propagate_scores(&combo, &adj, 2);
        let mut rhs = propagate_scores(&f, &adj, 2);
        rhs.scale(a);
        rhs.axpy(b, &propagate_scores(&g, &adj, 2));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn row_normalize_is_idempotent(x in matrix_strategy(6, 4, 0.0, 5.0)) {
        let once = row_normalize(&x).unwrap();
        let twice = row_normalize(&once).unwrap();
        prop_assert!(once.max_abs_diff(&twice) < 1e-12);
        for r in once.iter_rows() {
            prop_assert!(l1_norm(r) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn degree_bounding_keeps_a_subgraph(g in graph_with_features(12, 1), d_max in 1usize..6, seed in any::<u64>()) {
        let b = bound_degree(&g, d_max, seed).unwrap();
        prop_assert!(b.adjacency.max_degree() <= d_max);
        prop_assert!(b.adjacency.is_symmetric());
        for (u, v) in b.adjacency.edges() {
            prop_assert!(g.adjacency.has_edge(u, v));
        }
        prop_assert_eq!(b.n(), g.n());
    }

    #[test]
    fn weights_respect_bound(
        g in graph_with_features(14, 1),
        d_max in 1usize..8,
        seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let b = bound_degree(&g, d_max, seed).unwrap();
        let mut ranks: Vec<usize> = (1..=b.n()).collect();
        ranks.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let beta = weight_coefficients(&b.adjacency, &ranks, d_max, BetaRule::OwnDegreeCap).unwrap();
        for (u, l) in bound_lhs(&b.adjacency, &beta).iter().enumerate() {
            prop_assert!(beta[u] >= 1.0);
            prop_assert!(*l <= 2.0 * d_max as f64 + 1e-9);
        }
    }

    #[test]
    fn normalized_adjacency_is_symmetric(adj in graph_strategy(12)) {
        let a = sym_norm_adj(&adj);
        prop_assert_eq!(a.asymmetry(), 0.0);
        for &v in a.values() {
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn residual_shrinks_deviation_by_tau(
        adj in graph_strategy(10),
        tau in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let n = adj.n();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h0 = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-2.0..2.0)).collect());
        let a = sym_norm_adj(&adj);
        let one = amp_propagate(&h0, &a, 1, tau).embedding;
        let m = a.mul_dense(&h0);
        for u in 0..n {
            let dev: Vec<f64> = m.row(u).iter().zip(h0.row(u)).map(|(x, y)| x - y).collect();
            let got: Vec<f64> = one.row(u).iter().zip(h0.row(u)).map(|(x, y)| x - y).collect();
            let expect = (l2_norm(&dev) - tau).max(0.0);
            prop_assert!((l2_norm(&got) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(x in matrix_strategy(5, 4, -50.0, 50.0)) {
        let p = softmax_rows(&x);
        for r in p.iter_rows() {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(r.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn randomized_response_stays_in_range(
        labels in proptest::collection::vec(proptest::option::of(0usize..6), 1..40),
        eps in 0.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let out = randomized_response(&labels, eps, 6, seed).unwrap();
        for (a, b) in labels.iter().zip(out.labels()) {
            prop_assert_eq!(a.is_none(), b.is_none());
            if let Some(y) = b {
                prop_assert!(*y < 6);
            }
        }
    }

    #[test]
    fn perturbations_are_deterministic(g in graph_with_features(10, 2), seed in any::<u64>()) {
        let d_max = g.adjacency.max_degree().max(1);
        let plan = allocate(1.0, vec![1.0; g.n()], d_max).unwrap();
        prop_assert_eq!(
            laplace_aggregate(&g, &plan, seed).unwrap().h0,
            laplace_aggregate(&g, &plan, seed).unwrap().h0
        );
        prop_assert_eq!(
            edge_randomize(&g.adjacency, 1.0, seed).unwrap().adjacency,
            edge_randomize(&g.adjacency, 1.0, seed).unwrap().adjacency
        );
    }

    #[test]
    fn score_is_monotone_in_propagated_mass(
        base in proptest::collection::vec(-2.0f64..2.0, 4),
        bump in 0.0f64..3.0,
        degree in 0usize..20,
        lambda in 0.0f64..2.0,
    ) {
        let mut model = TnieModel::new(3, &TnieConfig { embed: 4, ..TnieConfig::default() }, 0).unwrap();
        model.lambda = lambda;
        model.phi = 0.5;
        // the pre-activation scales the component sum by a positive factor
        let lo = estimate_score(&base, degree, &model);
        let mut up = base.clone();
        up[0] += bump;
        prop_assert!(estimate_score(&up, degree, &model) >= lo);
    }

    #[test]
    fn ranks_are_a_permutation(scores in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
        let s = rank_importance(&scores).unwrap();
        let mut r = s.ranks.clone();
        r.sort_unstable();
        prop_assert_eq!(r, (1..=scores.len()).collect::<Vec<_>>());
        for u in 0..scores.len() {
            for v in 0..scores.len() {
                if scores[u] > scores[v] {
                    prop_assert!(s.ranks[u] > s.ranks[v]);
                }
            }
        }
    }
}
