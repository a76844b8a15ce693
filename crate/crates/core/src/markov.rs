//! Joint-state Markov chains over (rule layer, traffic layer) dyad
//! trajectories, and the independent-layer null model.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::ingest::Governance;
use crate::netbuild::{DyadKey, LayerId, LayerSnapshot};

/// Joint link state of a dyad: rule link (a/A) and traffic link (t/T),
/// lower case for absent. Discriminants put the rule bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
#[allow(non_camel_case_types)]
pub enum JointState {
    at = 0,
    aT = 1,
    At = 2,
    AT = 3,
}

impl JointState {
    pub const ALL: [JointState; 4] = [JointState::at, JointState::aT, JointState::At, JointState::AT];

    pub fn new(rule: bool, traffic: bool) -> Self {
        JointState::from_index(usize::from(rule) << 1 | usize::from(traffic))
    }

    pub fn from_index(i: usize) -> Self {
        JointState::ALL[i & 3]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn rule(self) -> bool {
        self.index() & 2 != 0
    }

    pub fn traffic(self) -> bool {
        self.index() & 1 != 0
    }

    /// The same state with the two layers' roles exchanged.
    pub fn swapped(self) -> Self {
        JointState::new(self.traffic(), self.rule())
    }

    pub fn label(self) -> &'static str {
        match self {
            JointState::at => "at",
            JointState::aT => "aT",
            JointState::At => "At",
            JointState::AT => "AT",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        JointState::ALL.into_iter().find(|s| s.label() == label)
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Joint-state trajectories of many dyads for one rule category, stored
/// row-major (one row of `n_windows` states per dyad).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSet {
    category: Governance,
    windows: Vec<u32>,
    dyads: Vec<DyadKey>,
    states: Vec<JointState>,
}

impl SequenceSet {
    pub fn new(category: Governance, windows: Vec<u32>, dyads: Vec<DyadKey>, states: Vec<JointState>) -> Result<Self> {
        if windows.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::LayerMismatch("windows must be contiguous".to_string()));
        }
        if states.len() != dyads.len() * windows.len() {
            return Err(Error::LayerMismatch(format!(
                "{} states for {} dyads x {} windows",
                states.len(),
                dyads.len(),
                windows.len()
            )));
        }
        Ok(SequenceSet {
            category,
            windows,
            dyads,
            states,
        })
    }

    pub fn category(&self) -> Governance {
        self.category
    }

    pub fn windows(&self) -> &[u32] {
        &self.windows
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }

    pub fn dyads(&self) -> &[DyadKey] {
        &self.dyads
    }

    pub fn sequence(&self, i: usize) -> &[JointState] {
        let w = self.windows.len();
        &self.states[i * w..(i + 1) * w]
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadKey, &[JointState])> {
        (0..self.len()).map(move |i| (self.dyads[i], self.sequence(i)))
    }

    /// Exchanges the roles of the two layers in every state.
    pub fn swapped(&self) -> SequenceSet {
        SequenceSet {
            states: self.states.iter().map(|s| s.swapped()).collect(),
            ..self.clone()
        }
    }
}

/// Encodes each dyad's joint state per window from aligned rule and
/// traffic snapshots.
pub fn encode_sequences(rule: &[LayerSnapshot], traffic: &[LayerSnapshot]) -> Result<SequenceSet> {
    let first = rule
        .first()
        .ok_or_else(|| Error::LayerMismatch("no rule snapshots".to_string()))?;
    let LayerId::Rule(category) = first.layer else {
        return Err(Error::LayerMismatch(
            "first rule snapshot is not a rule layer".to_string(),
        ));
    };
    if rule.len() != traffic.len() {
        return Err(Error::LayerMismatch(format!(
            "{} rule snapshots vs {} traffic snapshots",
            rule.len(),
            traffic.len()
        )));
    }
    let universe = &first.universe;
    let mut windows = Vec::with_capacity(rule.len());
    for (r, t) in rule.iter().zip(traffic) {
        if r.layer != first.layer || t.layer != LayerId::Traffic {
            return Err(Error::LayerMismatch("unexpected layer in snapshot list".to_string()));
        }
        if r.window != t.window {
            return Err(Error::LayerMismatch(format!(
                "window {} paired with {}",
                r.window, t.window
            )));
        }
        if r.universe != *universe || t.universe != *universe {
            return Err(Error::LayerMismatch(format!("universe changes at window {}", r.window)));
        }
        windows.push(r.window);
    }
    let n_dyads = universe.n_dyads();
    let n_windows = windows.len();
    let mut states = Vec::with_capacity(n_dyads * n_windows);
    for d in 0..n_dyads {
        for (r, t) in rule.iter().zip(traffic) {
            states.push(JointState::new(r.links.contains_index(d), t.links.contains_index(d)));
        }
    }
    let dyads = (0..n_dyads).map(DyadKey::from_index).collect();
    SequenceSet::new(category, windows, dyads, states)
}

/// Joint-state transition counts pooled over all dyads and window pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionTable {
    pub category: Governance,
    /// `counts[from][to]`, indexed by [`JointState::index`].
    pub counts: [[u64; 4]; 4],
    pub n_dyads: u64,
    pub n_windows: u64,
}

impl TransitionTable {
    pub fn empty(category: Governance, n_windows: u64) -> Self {
        TransitionTable {
            category,
            counts: [[0; 4]; 4],
            n_dyads: 0,
            n_windows,
        }
    }

    pub fn count(&self, from: JointState, to: JointState) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn occupancy(&self, from: JointState) -> u64 {
        self.counts[from.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Associative, commutative combine of two partial tables.
    pub fn merge(mut self, other: &TransitionTable) -> Self {
        debug_assert_eq!(self.n_windows, other.n_windows);
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        self.n_dyads += other.n_dyads;
        self
    }

    /// Table of the layer-swapped chain.
    pub fn swapped(&self) -> Self {
        let mut counts = [[0; 4]; 4];
        for from in JointState::ALL {
            for to in JointState::ALL {
                counts[from.swapped().index()][to.swapped().index()] = self.count(from, to);
            }
        }
        TransitionTable { counts, ..*self }
    }
}

/// Counts transitions of the dyads in `range`.
pub fn count_transitions_in(sequences: &SequenceSet, range: Range<usize>) -> TransitionTable {
    let mut table = TransitionTable::empty(sequences.category(), sequences.n_windows() as u64);
    for i in range {
        for pair in sequences.sequence(i).windows(2) {
            table.counts[pair[0].index()][pair[1].index()] += 1;
        }
        table.n_dyads += 1;
    }
    table
}

pub fn count_transitions(sequences: &SequenceSet) -> Result<TransitionTable> {
    if sequences.n_windows() < 2 {
        return Err(Error::TooFewWindows(sequences.n_windows()));
    }
    Ok(count_transitions_in(sequences, 0..sequences.len()))
}

/// 4x4 row-stochastic matrix; rows of never-occupied states are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbMatrix {
    pub rows: [Option<[f64; 4]>; 4],
}

impl ProbMatrix {
    pub fn get(&self, from: JointState, to: JointState) -> Option<f64> {
        self.rows[from.index()].map(|r| r[to.index()])
    }

    pub fn row(&self, from: JointState) -> Option<&[f64; 4]> {
        self.rows[from.index()].as_ref()
    }
}

fn normalize<const N: usize>(counts: &[u64; N]) -> Option<[f64; N]> {
    let n: u64 = counts.iter().sum();
    (n > 0).then(|| counts.map(|c| c as f64 / n as f64))
}

pub fn observed_matrix(table: &TransitionTable) -> ProbMatrix {
    ProbMatrix {
        rows: table.counts.map(|row| normalize(&row)),
    }
}

/// Two-state chain of one layer, {absent, present}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalChain {
    pub layer: LayerId,
    pub counts: [[u64; 2]; 2],
    pub probs: [Option<[f64; 2]>; 2],
}

impl MarginalChain {
    pub fn from_counts(layer: LayerId, counts: [[u64; 2]; 2]) -> Self {
        MarginalChain {
            layer,
            counts,
            probs: counts.map(|row| normalize(&row)),
        }
    }

    pub fn p(&self, from: bool, to: bool) -> Option<f64> {
        self.probs[usize::from(from)].map(|r| r[usize::from(to)])
    }

    pub fn occupancy(&self, from: bool) -> u64 {
        self.counts[usize::from(from)].iter().sum()
    }
}

/// Projects the joint counts onto each layer: `(rule chain, traffic chain)`.
pub fn marginal_chains(table: &TransitionTable) -> (MarginalChain, MarginalChain) {
    let mut rule = [[0u64; 2]; 2];
    let mut traffic = [[0u64; 2]; 2];
    for from in JointState::ALL {
        for to in JointState::ALL {
            let c = table.count(from, to);
            rule[usize::from(from.rule())][usize::from(to.rule())] += c;
            traffic[usize::from(from.traffic())][usize::from(to.traffic())] += c;
        }
    }
    (
        MarginalChain::from_counts(LayerId::Rule(table.category), rule),
        MarginalChain::from_counts(LayerId::Traffic, traffic),
    )
}

/// Independent-layer null: the product of the two marginal chains.
pub fn null_matrix(rule: &MarginalChain, traffic: &MarginalChain) -> ProbMatrix {
    let mut rows = [None; 4];
    for from in JointState::ALL {
        let (Some(r), Some(t)) = (
            rule.probs[usize::from(from.rule())],
            traffic.probs[usize::from(from.traffic())],
        ) else {
            continue;
        };
        let mut row = [0.0; 4];
        for to in JointState::ALL {
            row[to.index()] = r[usize::from(to.rule())] * t[usize::from(to.traffic())];
        }
        rows[from.index()] = Some(row);
    }
    ProbMatrix { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netbuild::Universe;
    use alloc::string::String;
    use alloc::sync::Arc;
    use alloc::vec;
    use proptest::prelude::*;

    use JointState::*;

    fn set(states: &[&[JointState]]) -> SequenceSet {
        let w = states[0].len();
        SequenceSet::new(
            Governance::Admin,
            (0..w as u32).collect(),
            (0..states.len()).map(DyadKey::from_index).collect(),
            states.iter().flat_map(|s| s.iter().copied()).collect(),
        )
        .unwrap()
    }

    fn table(counts: [[u64; 4]; 4]) -> TransitionTable {
        TransitionTable {
            category: Governance::Admin,
            counts,
            n_dyads: 0,
            n_windows: 0,
        }
    }

    #[test]
    fn state_labels() {
        assert_eq!(JointState::new(true, false), At);
        assert_eq!(JointState::new(false, false), at);
        assert_eq!(At.swapped(), aT);
        assert_eq!(JointState::ALL.map(|s| s.label()), ["at", "aT", "At", "AT"]);
    }

    #[test]
    fn encode_three_servers_three_windows() {
        let universe = Arc::new(Universe::new(
            ["a", "b", "c"].iter().map(|s| String::from(*s)).collect(),
        ));
        let ab = DyadKey::new(0, 1).unwrap();
        let ac = DyadKey::new(0, 2).unwrap();
        let bc = DyadKey::new(1, 2).unwrap();
        let snap = |layer, w, links: &[DyadKey]| {
            let mut s = LayerSnapshot::empty(layer, w, universe.clone());
            for d in links {
                s.links.insert(*d);
            }
            s
        };
        let rule_l = LayerId::Rule(Governance::Admin);
        let rule = [snap(rule_l, 0, &[ab]), snap(rule_l, 1, &[ab, bc]), snap(rule_l, 2, &[])];
        let traffic = [
            snap(LayerId::Traffic, 0, &[]),
            snap(LayerId::Traffic, 1, &[ab, ac]),
            snap(LayerId::Traffic, 2, &[ac]),
        ];
        let seqs = encode_sequences(&rule, &traffic).unwrap();
        let manual: Vec<(DyadKey, Vec<JointState>)> =
            vec![(ab, vec![At, AT, at]), (ac, vec![at, aT, aT]), (bc, vec![at, At, at])];
        for (d, expect) in manual {
            let i = seqs.dyads().iter().position(|x| *x == d).unwrap();
            assert_eq!(seqs.sequence(i), expect.as_slice());
        }
        // Mismatched universe is fatal.
        let other = Arc::new(Universe::new(
            ["a", "b", "z"].iter().map(|s| String::from(*s)).collect(),
        ));
        let mut bad = traffic.clone();
        bad[2] = LayerSnapshot::empty(LayerId::Traffic, 2, other);
        assert!(matches!(encode_sequences(&rule, &bad), Err(Error::LayerMismatch(_))));
    }

    #[test]
    fn count_simple_sequences() {
        let t = count_transitions(&set(&[&[at, At, AT]])).unwrap();
        assert_eq!(t.count(at, At), 1);
        assert_eq!(t.count(At, AT), 1);
        assert_eq!(t.total(), 2);
        let t = count_transitions(&set(&[&[AT, AT, AT]])).unwrap();
        assert_eq!(t.count(AT, AT), 2);
        assert_eq!(t.total(), 2);
        assert_eq!(count_transitions(&set(&[&[AT]])), Err(Error::TooFewWindows(1)));
    }

    #[test]
    fn observed_rows_normalize_and_flag_undefined() {
        let mut c = [[0; 4]; 4];
        c[0] = [1, 0, 1, 0];
        let p = observed_matrix(&table(c));
        assert_eq!(p.row(at), Some(&[0.5, 0.0, 0.5, 0.0]));
        assert_eq!(p.row(AT), None);
        let mut c = [[0; 4]; 4];
        c[0][3] = 1;
        assert_eq!(observed_matrix(&table(c)).get(at, AT), Some(1.0));
    }

    #[test]
    fn marginal_projection_of_single_event() {
        let mut c = [[0; 4]; 4];
        c[at.index()][At.index()] = 1;
        let (rule, traffic) = marginal_chains(&table(c));
        assert_eq!(rule.p(false, true), Some(1.0));
        assert_eq!(traffic.p(false, false), Some(1.0));
        assert_eq!(rule.p(true, true), None);
    }

    #[test]
    fn product_chain_factors_are_recovered() {
        // Expected counts of a product chain with integer-friendly factors.
        let pr = [[3u64, 1], [1, 1]];
        let pt = [[1u64, 4], [2, 3]];
        let mut c = [[0; 4]; 4];
        for from in JointState::ALL {
            for to in JointState::ALL {
                c[from.index()][to.index()] = pr[usize::from(from.rule())][usize::from(to.rule())]
                    * pt[usize::from(from.traffic())][usize::from(to.traffic())];
            }
        }
        let (rule, traffic) = marginal_chains(&table(c));
        assert!((rule.p(false, true).unwrap() - 0.25).abs() < 1e-15);
        assert!((rule.p(true, true).unwrap() - 0.5).abs() < 1e-15);
        assert!((traffic.p(false, true).unwrap() - 0.8).abs() < 1e-15);
        assert!((traffic.p(true, false).unwrap() - 0.4).abs() < 1e-15);
        // With product-form counts the null equals the observed chain.
        let obs = observed_matrix(&table(c));
        let null = null_matrix(&rule, &traffic);
        for from in JointState::ALL {
            for to in JointState::ALL {
                assert!((obs.get(from, to).unwrap() - null.get(from, to).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symmetric_traffic_counts_give_symmetric_marginal() {
        let mut c = [[0; 4]; 4];
        c[at.index()][aT.index()] = 3;
        c[at.index()][at.index()] = 5;
        c[aT.index()][at.index()] = 3;
        c[aT.index()][aT.index()] = 5;
        let (_, traffic) = marginal_chains(&table(c));
        assert_eq!(traffic.p(false, true), traffic.p(true, false));
    }

    #[test]
    fn null_is_product_and_identity_when_absorbing() {
        let rule = MarginalChain::from_counts(LayerId::Rule(Governance::Admin), [[1, 1], [0, 1]]);
        let traffic = MarginalChain::from_counts(LayerId::Traffic, [[4, 1], [0, 1]]);
        let null = null_matrix(&rule, &traffic);
        assert!((null.get(at, AT).unwrap() - 0.1).abs() < 1e-15);
        let rule = MarginalChain::from_counts(LayerId::Rule(Governance::Admin), [[7, 0], [0, 2]]);
        let traffic = MarginalChain::from_counts(LayerId::Traffic, [[5, 0], [0, 9]]);
        let null = null_matrix(&rule, &traffic);
        for from in JointState::ALL {
            for to in JointState::ALL {
                assert_eq!(null.get(from, to), Some(if from == to { 1.0 } else { 0.0 }));
            }
        }
        let undefined = MarginalChain::from_counts(LayerId::Traffic, [[5, 0], [0, 0]]);
        let null = null_matrix(&rule, &undefined);
        assert!(null.row(aT).is_none() && null.row(AT).is_none());
        assert!(null.row(at).is_some());
    }

    #[test]
    fn merge_is_consistent_with_whole_count() {
        let s = set(&[&[at, At, AT, AT], &[aT, aT, at, AT], &[AT, at, at, aT]]);
        let whole = count_transitions(&s).unwrap();
        let parts = count_transitions_in(&s, 2..3).merge(&count_transitions_in(&s, 0..2));
        assert_eq!(whole, parts);
        assert_eq!(whole.total(), whole.n_dyads * (whole.n_windows - 1));
    }

    prop_compose! {
        fn random_counts()(c in proptest::array::uniform16(0u64..1000)) -> [[u64; 4]; 4] {
            [[c[0], c[1], c[2], c[3]], [c[4], c[5], c[6], c[7]], [c[8], c[9], c[10], c[11]], [c[12], c[13], c[14], c[15]]]
        }
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(c in random_counts()) {
            let t = table(c);
            let obs = observed_matrix(&t);
            let (r, tr) = marginal_chains(&t);
            let null = null_matrix(&r, &tr);
            for m in [obs, null] {
                for row in m.rows.iter().flatten() {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                    prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
                }
            }
        }

        #[test]
        fn observed_reprojects_onto_marginals(c in random_counts()) {
            let t = table(c);
            let obs = observed_matrix(&t);
            let (rule, traffic) = marginal_chains(&t);
            for layer_is_rule in [true, false] {
                let chain = if layer_is_rule { rule } else { traffic };
                let proj = |s: JointState| if layer_is_rule { s.rule() } else { s.traffic() };
                for x in [false, true] {
                    let mut flow = [0.0f64; 2];
                    for from in JointState::ALL.into_iter().filter(|s| proj(*s) == x) {
                        let Some(row) = obs.row(from) else { continue };
                        let n = t.occupancy(from) as f64;
                        for to in JointState::ALL {
                            flow[usize::from(proj(to))] += n * row[to.index()];
                        }
                    }
                    let total = flow[0] + flow[1];
                    match chain.probs[usize::from(x)] {
                        Some(p) => {
                            prop_assert!((flow[0] / total - p[0]).abs() < 1e-12);
                            prop_assert!((flow[1] / total - p[1]).abs() < 1e-12);
                        }
                        None => prop_assert_eq!(total, 0.0),
                    }
                }
            }
        }

        #[test]
        fn swapping_layers_commutes_with_null(c in random_counts()) {
            let t = table(c);
            let s = t.swapped();
            let (r, tr) = marginal_chains(&t);
            let (sr, st) = marginal_chains(&s);
            prop_assert_eq!(r.probs, st.probs);
            prop_assert_eq!(tr.probs, sr.probs);
            let null = null_matrix(&r, &tr);
            let snull = null_matrix(&sr, &st);
            let obs = observed_matrix(&t);
            let sobs = observed_matrix(&s);
            for from in JointState::ALL {
                for to in JointState::ALL {
                    prop_assert_eq!(null.get(from, to), snull.get(from.swapped(), to.swapped()));
                    prop_assert_eq!(obs.get(from, to), sobs.get(from.swapped(), to.swapped()));
                }
            }
        }
    }
}
