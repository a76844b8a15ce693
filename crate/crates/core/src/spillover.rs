//! Observed minus null transition probabilities with confidence intervals.

use alloc::vec::Vec;
use core::fmt;

use libm::sqrt;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::Governance;
use crate::markov::{
    count_transitions, marginal_chains, null_matrix, observed_matrix, JointState, ProbMatrix, SequenceSet,
    TransitionTable,
};
use crate::seed::rng_for;
use crate::stats::{quantile_sorted, two_sided_z};

pub const DEFAULT_LEVEL: f64 = 0.99;
pub const MIN_BOOTSTRAP_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: JointState,
    pub to: JointState,
}

impl Transition {
    pub fn new(from: JointState, to: JointState) -> Self {
        Transition { from, to }
    }

    /// All 16 transitions, from-state major.
    pub fn all() -> impl Iterator<Item = Transition> {
        (0..16).map(Transition::from_index)
    }

    pub fn index(self) -> usize {
        self.from.index() * 4 + self.to.index()
    }

    pub fn from_index(i: usize) -> Self {
        Transition::new(JointState::from_index(i / 4), JointState::from_index(i % 4))
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CiMethod {
    #[default]
    Analytic,
    Bootstrap,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::Analytic => "analytic",
            CiMethod::Bootstrap => "bootstrap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "analytic" => Some(CiMethod::Analytic),
            "bootstrap" => Some(CiMethod::Bootstrap),
            _ => None,
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateValue {
    pub p_obs: f64,
    pub p_null: f64,
    pub diff: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl EstimateValue {
    /// The interval excludes zero.
    pub fn significant(&self) -> bool {
        self.ci_lo > 0.0 || self.ci_hi < 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpilloverEstimate {
    pub transition: Transition,
    /// Occupancy of the from-state.
    pub n_from: u64,
    pub method: CiMethod,
    /// `None` when the from-state was never occupied.
    pub value: Option<EstimateValue>,
}

impl SpilloverEstimate {
    pub fn significant(&self) -> Option<bool> {
        self.value.map(|v| v.significant())
    }
}

/// The 16 estimates for one rule category, in [`Transition::all`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverReport {
    pub category: Governance,
    pub method: CiMethod,
    pub level: f64,
    pub estimates: Vec<SpilloverEstimate>,
}

impl SpilloverReport {
    pub fn get(&self, from: JointState, to: JointState) -> Option<&SpilloverEstimate> {
        self.estimates
            .iter()
            .find(|e| e.transition == Transition::new(from, to))
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

/// Normal-approximation intervals. The observed cell's variance is
/// binomial in the from-state occupancy; the null cell's variance is
/// propagated to first order from the binomial variances of the two
/// marginal cells. The two are combined as if independent.
pub fn spillover_analytic(
    table: &TransitionTable,
    observed: &ProbMatrix,
    null: &ProbMatrix,
    level: f64,
) -> Result<SpilloverReport> {
    check_level(level)?;
    let z = two_sided_z(level);
    let (rule, traffic) = marginal_chains(table);
    let estimates = Transition::all()
        .map(|tr| {
            let n_from = table.occupancy(tr.from);
            let value = match (observed.get(tr.from, tr.to), null.get(tr.from, tr.to)) {
                (Some(p_obs), Some(p_null)) => {
                    let var_obs = p_obs * (1.0 - p_obs) / n_from as f64;
                    let (rx, tx) = (tr.from.rule(), tr.from.traffic());
                    let pr = rule.p(rx, tr.to.rule()).unwrap_or(0.0);
                    let pt = traffic.p(tx, tr.to.traffic()).unwrap_or(0.0);
                    let var_r = pr * (1.0 - pr) / rule.occupancy(rx) as f64;
                    let var_t = pt * (1.0 - pt) / traffic.occupancy(tx) as f64;
                    let var_null = pt * pt * var_r + pr * pr * var_t;
                    let diff = p_obs - p_null;
                    let half = z * sqrt(var_obs + var_null);
                    Some(EstimateValue {
                        p_obs,
                        p_null,
                        diff,
                        ci_lo: diff - half,
                        ci_hi: diff + half,
                    })
                }
                _ => None,
            };
            SpilloverEstimate {
                transition: tr,
                n_from,
                method: CiMethod::Analytic,
                value,
            }
        })
        .collect();
    Ok(SpilloverReport {
        category: table.category,
        method: CiMethod::Analytic,
        level,
        estimates,
    })
}

/// Observed and null matrices of a count table.
pub fn estimate_matrices(table: &TransitionTable) -> (ProbMatrix, ProbMatrix) {
    let (rule, traffic) = marginal_chains(table);
    (observed_matrix(table), null_matrix(&rule, &traffic))
}

fn diff_cells(table: &TransitionTable) -> [Option<f64>; 16] {
    let (obs, null) = estimate_matrices(table);
    core::array::from_fn(|i| {
        let tr = Transition::from_index(i);
        Some(obs.get(tr.from, tr.to)? - null.get(tr.from, tr.to)?)
    })
}

/// Dyad-resampling bootstrap prepared from a sequence set.
///
/// Each dyad's own 4x4 count table is precomputed, so a replicate only sums
/// the tables of the resampled dyads. Replicate `b` draws from a stream
/// derived from `(seed, b)`, so replicates can be evaluated in any order or
/// in parallel with identical results.
#[derive(Debug, Clone)]
pub struct BootstrapPlan {
    table: TransitionTable,
    dyad_counts: Vec<[u16; 16]>,
    seed: u64,
}

impl BootstrapPlan {
    pub fn new(sequences: &SequenceSet, seed: u64) -> Result<Self> {
        if sequences.len() < 2 {
            return Err(Error::TooFewDyads(sequences.len()));
        }
        if sequences.n_windows() > usize::from(u16::MAX) {
            return Err(Error::InvalidParams("too many windows for the bootstrap".into()));
        }
        let table = count_transitions(sequences)?;
        let dyad_counts = (0..sequences.len())
            .map(|i| {
                let mut c = [0u16; 16];
                for pair in sequences.sequence(i).windows(2) {
                    c[pair[0].index() * 4 + pair[1].index()] += 1;
                }
                c
            })
            .collect();
        Ok(BootstrapPlan {
            table,
            dyad_counts,
            seed,
        })
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    pub fn n_dyads(&self) -> usize {
        self.dyad_counts.len()
    }

    pub fn check_replicates(replicates: usize) -> Result<()> {
        if replicates < MIN_BOOTSTRAP_REPLICATES {
            return Err(Error::TooFewReplicates {
                min: MIN_BOOTSTRAP_REPLICATES,
                got: replicates,
            });
        }
        Ok(())
    }

    /// Per-transition diffs of replicate `index`.
    pub fn replicate(&self, index: u64) -> [Option<f64>; 16] {
        let mut rng = rng_for(self.seed, index);
        let n = self.dyad_counts.len();
        let mut acc = [0u64; 16];
        for _ in 0..n {
            let d = &self.dyad_counts[rng.random_range(0..n)];
            for (a, &c) in acc.iter_mut().zip(d) {
                *a += u64::from(c);
            }
        }
        let counts = core::array::from_fn(|f| core::array::from_fn(|t| acc[f * 4 + t]));
        diff_cells(&TransitionTable {
            counts,
            n_dyads: n as u64,
            ..self.table
        })
    }

    /// Percentile intervals from replicate diffs. Replicates in which a
    /// from-state was never drawn are skipped for its transitions. The
    /// interval is widened to contain the full-sample point estimate if the
    /// percentiles miss it.
    pub fn summarize(&self, replicates: &[[Option<f64>; 16]], level: f64) -> Result<SpilloverReport> {
        check_level(level)?;
        Self::check_replicates(replicates.len())?;
        let (obs, null) = estimate_matrices(&self.table);
        let tail = (1.0 - level) / 2.0;
        let mut column = Vec::with_capacity(replicates.len());
        let estimates = Transition::all()
            .map(|tr| {
                let n_from = self.table.occupancy(tr.from);
                column.clear();
                column.extend(replicates.iter().filter_map(|r| r[tr.index()]));
                column.sort_unstable_by(f64::total_cmp);
                let value = match (obs.get(tr.from, tr.to), null.get(tr.from, tr.to)) {
                    (Some(p_obs), Some(p_null)) if !column.is_empty() => {
                        let diff = p_obs - p_null;
                        let lo = quantile_sorted(&column, tail).unwrap_or(diff);
                        let hi = quantile_sorted(&column, 1.0 - tail).unwrap_or(diff);
                        Some(EstimateValue {
                            p_obs,
                            p_null,
                            diff,
                            ci_lo: lo.min(diff),
                            ci_hi: hi.max(diff),
                        })
                    }
                    _ => None,
                };
                SpilloverEstimate {
                    transition: tr,
                    n_from,
                    method: CiMethod::Bootstrap,
                    value,
                }
            })
            .collect();
        Ok(SpilloverReport {
            category: self.table.category,
            method: CiMethod::Bootstrap,
            level,
            estimates,
        })
    }
}

/// Single-threaded dyad bootstrap with `replicates` resamples.
pub fn spillover_bootstrap(
    sequences: &SequenceSet,
    replicates: usize,
    seed: u64,
    level: f64,
) -> Result<SpilloverReport> {
    check_level(level)?;
    BootstrapPlan::check_replicates(replicates)?;
    let plan = BootstrapPlan::new(sequences, seed)?;
    let reps: Vec<_> = (0..replicates as u64).map(|b| plan.replicate(b)).collect();
    plan.summarize(&reps, level)
}

/// Analytic report straight from sequences.
pub fn analytic_from_sequences(sequences: &SequenceSet, level: f64) -> Result<SpilloverReport> {
    let table = count_transitions(sequences)?;
    let (obs, null) = estimate_matrices(&table);
    spillover_analytic(&table, &obs, &null, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netbuild::DyadKey;
    use alloc::vec;
    use JointState::*;

    fn seqs(rows: &[&[JointState]]) -> SequenceSet {
        let w = rows[0].len();
        SequenceSet::new(
            Governance::Admin,
            (0..w as u32).collect(),
            (0..rows.len()).map(DyadKey::from_index).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    fn product_table() -> TransitionTable {
        // Counts proportional to a product chain give P_obs == P_null.
        let pr = [[3u64, 1], [1, 1]];
        let pt = [[1u64, 4], [2, 3]];
        let mut counts = [[0; 4]; 4];
        for from in JointState::ALL {
            for to in JointState::ALL {
                counts[from.index()][to.index()] = 10
                    * pr[usize::from(from.rule())][usize::from(to.rule())]
                    * pt[usize::from(from.traffic())][usize::from(to.traffic())];
            }
        }
        TransitionTable {
            category: Governance::Admin,
            counts,
            n_dyads: 0,
            n_windows: 0,
        }
    }

    #[test]
    fn product_data_has_zero_diff() {
        let t = product_table();
        let (obs, null) = estimate_matrices(&t);
        let r = spillover_analytic(&t, &obs, &null, 0.99).unwrap();
        assert_eq!(r.estimates.len(), 16);
        for e in &r.estimates {
            let v = e.value.unwrap();
            assert!(v.diff.abs() < 1e-15);
            assert!(!v.significant());
            assert!(v.ci_lo <= v.diff && v.diff <= v.ci_hi);
        }
    }

    #[test]
    fn analytic_interval_matches_hand_computation() {
        let t = product_table();
        let (obs, null) = estimate_matrices(&t);
        let r = spillover_analytic(&t, &obs, &null, 0.99).unwrap();
        let e = r.get(At, AT).unwrap();
        // n(At) = 10 * (1+1) * (1+4) = 100; p_obs = 0.5 * 0.8 = 0.4
        // rule occupancy of A: 10*(1+1)*(5+5) = 200, traffic occupancy of t: 10*(4+2)*5 = 300
        let var_obs = 0.4 * 0.6 / 100.0;
        let var_null = 0.8f64.powi(2) * (0.5 * 0.5 / 200.0) + 0.5f64.powi(2) * (0.8 * 0.2 / 300.0);
        let half = 2.5758293035489004 * (var_obs + var_null).sqrt();
        let v = e.value.unwrap();
        assert_eq!(e.n_from, 100);
        assert!((v.ci_hi - half).abs() < 1e-12, "{} vs {half}", v.ci_hi);
    }

    #[test]
    fn undefined_rows_propagate() {
        let s = seqs(&[&[at, at, At], &[at, at, at]]);
        let r = analytic_from_sequences(&s, 0.99).unwrap();
        assert!(r.get(AT, AT).unwrap().value.is_none());
        assert_eq!(r.get(AT, AT).unwrap().n_from, 0);
        assert!(r.get(at, At).unwrap().value.is_some());
    }

    #[test]
    fn invalid_level_rejected() {
        let t = product_table();
        let (obs, null) = estimate_matrices(&t);
        assert!(spillover_analytic(&t, &obs, &null, 1.0).is_err());
        assert!(spillover_analytic(&t, &obs, &null, 0.0).is_err());
    }

    #[test]
    fn bootstrap_preconditions() {
        let one = seqs(&[&[at, AT]]);
        assert_eq!(
            spillover_bootstrap(&one, 100, 1, 0.99).unwrap_err(),
            Error::TooFewDyads(1)
        );
        let two = seqs(&[&[at, AT], &[AT, at]]);
        assert!(matches!(
            spillover_bootstrap(&two, 99, 1, 0.99),
            Err(Error::TooFewReplicates { .. })
        ));
    }

    #[test]
    fn identical_dyads_give_zero_width_intervals() {
        let row: &[JointState] = &[at, At, AT, AT, aT, at, AT];
        let s = seqs(&[row, row, row]);
        let r = spillover_bootstrap(&s, 200, 9, 0.99).unwrap();
        let point = analytic_from_sequences(&s, 0.99).unwrap();
        for (b, a) in r.estimates.iter().zip(&point.estimates) {
            match (b.value, a.value) {
                (Some(b), Some(a)) => {
                    assert_eq!(b.ci_lo, b.ci_hi);
                    assert_eq!(b.diff, a.diff);
                    assert_eq!(b.ci_lo, a.diff);
                }
                (None, None) => {}
                other => panic!("definedness differs: {other:?}"),
            }
        }
    }

    #[test]
    fn bootstrap_is_order_independent() {
        let s = seqs(&[&[at, At, AT], &[aT, AT, AT], &[at, at, aT], &[AT, At, at]]);
        let plan = BootstrapPlan::new(&s, 42).unwrap();
        let fwd: Vec<_> = (0..150).map(|b| plan.replicate(b)).collect();
        let mut rev: Vec<_> = (0..150).rev().map(|b| (b, plan.replicate(b))).collect();
        rev.sort_by_key(|(b, _)| *b);
        let rev: Vec<_> = rev.into_iter().map(|(_, r)| r).collect();
        assert_eq!(plan.summarize(&fwd, 0.99).unwrap(), plan.summarize(&rev, 0.99).unwrap());
        assert_eq!(
            fwd,
            vec![plan.replicate(0)]
                .into_iter()
                .chain(fwd[1..].iter().copied())
                .collect::<Vec<_>>()
        );
    }
}
