//! Empirical checks at reduced scale: sensitivity, budget bound, histogram
//! privacy ratio on the star pair, unbiasedness and degree preservation.
//! The neighbor-degree cap is included to show it breaking the bound.

use importance_dp_gnn::audit::{
    brute_force_sensitivity, budget_bound_sweep, mc_privacy_ratio, star_pair_fixture,
    unbiasedness_suite,
};
use importance_dp_gnn::budget::BetaRule;

fn main() -> importance_dp_gnn::Result<()> {
    let mut reports = vec![
        brute_force_sensitivity(8, 1, 200, 0)?,
        budget_bound_sweep(300, 30, BetaRule::OwnDegreeCap, 0)?,
        budget_bound_sweep(300, 30, BetaRule::NeighborDegreeCap, 0)?,
    ];
    for eps in [1.0, 2.0] {
        let (pair, plan) = star_pair_fixture(eps)?;
        reports.push(mc_privacy_ratio(&pair, &plan, 30, 200_000, 0)?);
    }
    reports.extend(unbiasedness_suite(20_000, 2_000, 0)?);
    for r in &reports {
        println!(
            "[{}] {}{}: estimate {:.4} vs bound {:.4}",
            if r.passed { "pass" } else { "FAIL" },
            r.claim,
            r.details.get("rule").map(|v| format!(" ({})", v.as_str().unwrap_or_default())).unwrap_or_default(),
            r.estimate,
            r.bound
        );
    }
    Ok(())
}
