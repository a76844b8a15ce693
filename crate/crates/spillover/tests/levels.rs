//! Significance at a lower confidence level is a superset of that at a
//! higher one, for both interval methods.

use spillover::parallel::par_bootstrap;
use spillover_core::spillover::analytic_from_sequences;
use spillover_core::synth::{generate_panel, CouplingParams};
use spillover_core::SpilloverReport;

fn significant(r: &SpilloverReport) -> Vec<bool> {
    r.estimates.iter().map(|e| e.significant() == Some(true)).collect()
}

fn nested(strict: &SpilloverReport, loose: &SpilloverReport) -> bool {
    significant(strict).iter().zip(significant(loose)).all(|(s, l)| !s || l)
}

#[test]
fn lower_level_widens_the_significant_set() {
    let params = CouplingParams {
        n_dyads: 1500,
        beta_inst_to_cult: 0.05,
        beta_cult_to_inst: 0.05,
        seed: 5,
        ..CouplingParams::default()
    };
    let seqs = generate_panel(&params).unwrap().sequences;
    let a99 = analytic_from_sequences(&seqs, 0.99).unwrap();
    let a95 = analytic_from_sequences(&seqs, 0.95).unwrap();
    assert!(nested(&a99, &a95));
    let count = |r: &SpilloverReport| significant(r).iter().filter(|s| **s).count();
    assert!(count(&a95) > count(&a99), "{} vs {}", count(&a95), count(&a99));

    let b99 = par_bootstrap(&seqs, 300, 8, 0.99).unwrap();
    let b95 = par_bootstrap(&seqs, 300, 8, 0.95).unwrap();
    assert!(nested(&b99, &b95));
    for (x, y) in b99.estimates.iter().zip(&b95.estimates) {
        if let (Some(x), Some(y)) = (x.value, y.value) {
            assert!(x.ci_lo <= y.ci_lo && y.ci_hi <= x.ci_hi);
        }
    }
}
