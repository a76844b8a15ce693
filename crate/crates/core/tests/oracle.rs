//! Transition counting and matrix estimation against a nested-loop
//! reimplementation.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillover_core::{
    count_transitions, marginal_chains, null_matrix, observed_matrix, DyadKey, Governance, JointState, LayerId,
    MarginalChain, SequenceSet,
};

/// Random panel; some instances restrict the alphabet so that rows go
/// unoccupied.
fn random_set(seed: u64) -> SequenceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=500usize);
    let w = rng.random_range(2..=12usize);
    let alphabet: Vec<JointState> = if rng.random_bool(0.3) {
        JointState::ALL.into_iter().filter(|_| rng.random_bool(0.6)).collect()
    } else {
        JointState::ALL.to_vec()
    };
    let alphabet = if alphabet.is_empty() {
        vec![JointState::AT]
    } else {
        alphabet
    };
    let states = (0..n * w)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect();
    SequenceSet::new(
        Governance::Economy,
        (0..w as u32).collect(),
        (0..n).map(DyadKey::from_index).collect(),
        states,
    )
    .unwrap()
}

struct Brute {
    joint: [[u64; 4]; 4],
    rule: [[u64; 2]; 2],
    traffic: [[u64; 2]; 2],
}

fn brute(seqs: &SequenceSet) -> Brute {
    let mut b = Brute {
        joint: [[0; 4]; 4],
        rule: [[0; 2]; 2],
        traffic: [[0; 2]; 2],
    };
    for d in 0..seqs.len() {
        let s = seqs.sequence(d);
        for t in 0..s.len() - 1 {
            for (i, from) in JointState::ALL.iter().enumerate() {
                for (j, to) in JointState::ALL.iter().enumerate() {
                    if s[t] == *from && s[t + 1] == *to {
                        b.joint[i][j] += 1;
                    }
                }
            }
            b.rule[s[t].rule() as usize][s[t + 1].rule() as usize] += 1;
            b.traffic[s[t].traffic() as usize][s[t + 1].traffic() as usize] += 1;
        }
    }
    b
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn estimation_matches_nested_loops(seed in any::<u64>()) {
        let seqs = random_set(seed);
        let b = brute(&seqs);
        let table = count_transitions(&seqs).unwrap();
        prop_assert_eq!(table.counts, b.joint);

        let obs = observed_matrix(&table);
        for (i, from) in JointState::ALL.iter().enumerate() {
            let row: u64 = b.joint[i].iter().sum();
            for (j, to) in JointState::ALL.iter().enumerate() {
                prop_assert!(close(obs.get(*from, *to), ratio(b.joint[i][j], row), 1e-12));
            }
        }

        let (rule, traffic) = marginal_chains(&table);
        prop_assert_eq!(rule.counts, b.rule);
        prop_assert_eq!(traffic.counts, b.traffic);
        let marg = |c: &[[u64; 2]; 2], x: usize, y: usize| ratio(c[x][y], c[x][0] + c[x][1]);
        for x in [false, true] {
            for y in [false, true] {
                prop_assert!(close(rule.p(x, y), marg(&b.rule, x as usize, y as usize), 1e-12));
                prop_assert!(close(traffic.p(x, y), marg(&b.traffic, x as usize, y as usize), 1e-12));
            }
        }

        let null = null_matrix(&rule, &traffic);
        for from in JointState::ALL {
            for to in JointState::ALL {
                let pr = marg(&b.rule, from.rule() as usize, to.rule() as usize);
                let pt = marg(&b.traffic, from.traffic() as usize, to.traffic() as usize);
                let expect = pr.zip(pt).map(|(a, c)| a * c);
                prop_assert!(close(null.get(from, to), expect, 1e-12));
            }
        }
    }

    #[test]
    fn null_factorizes(r in prop::array::uniform4(0u64..10_000), t in prop::array::uniform4(0u64..10_000)) {
        let rule = MarginalChain::from_counts(LayerId::Rule(Governance::Admin), [[r[0], r[1]], [r[2], r[3]]]);
        let traffic = MarginalChain::from_counts(LayerId::Traffic, [[t[0], t[1]], [t[2], t[3]]]);
        let null = null_matrix(&rule, &traffic);
        for from in JointState::ALL {
            for to in JointState::ALL {
                let expect = rule.p(from.rule(), to.rule()).zip(traffic.p(from.traffic(), to.traffic()));
                match (null.get(from, to), expect) {
                    (Some(p), Some((a, b))) => prop_assert!((p - a * b).abs() <= 1e-15),
                    (None, None) => {}
                    (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
                }
            }
        }
    }
}
