//! `sequences.csv`: `dyad,window,rule,traffic`, one row per dyad and window.
//!
//! The dyad column is the column-wise dyad index; rule and traffic are 0/1.

use std::collections::BTreeMap;
use std::path::Path;

use spillover_core::{DyadKey, Governance, JointState, SequenceSet};

use super::{columns, finish, reader, write_row, writer};
use crate::error::{Error, Result};

pub const SEQUENCES: &str = "sequences.csv";

pub fn write_sequences(path: &Path, seqs: &SequenceSet) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["dyad", "window", "rule", "traffic"])?;
    let windows: Vec<String> = seqs.windows().iter().map(u32::to_string).collect();
    for (dyad, states) in seqs.iter() {
        let d = dyad.index().to_string();
        for (window, s) in windows.iter().zip(states) {
            let bit = |b: bool| if b { "1" } else { "0" };
            write_row(path, &mut w, [d.as_str(), window, bit(s.rule()), bit(s.traffic())])?;
        }
    }
    finish(path, w)
}

/// Reads sequences for one category. Every dyad must cover the same
/// contiguous window run.
pub fn read_sequences(path: &Path, category: Governance) -> Result<SequenceSet> {
    let mut rdr = reader(path)?;
    let [cd, cw, cr, ct] = columns(path, &mut rdr, ["dyad", "window", "rule", "traffic"])?;
    let mut rows: BTreeMap<usize, BTreeMap<u32, JointState>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let get = |c: usize| rec.get(c).unwrap_or("").trim();
        let bad = |what: &str| Error::Input(format!("{}:{}: bad {what}", path.display(), i + 2));
        let bit = |c: usize, what: &str| match get(c) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(what)),
        };
        let dyad: usize = get(cd).parse().map_err(|_| bad("dyad"))?;
        let window: u32 = get(cw).parse().map_err(|_| bad("window"))?;
        let state = JointState::new(bit(cr, "rule")?, bit(ct, "traffic")?);
        if rows.entry(dyad).or_default().insert(window, state).is_some() {
            return Err(bad("duplicate (dyad, window)"));
        }
    }
    let windows: Vec<u32> = rows
        .values()
        .next()
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default();
    let mut dyads = Vec::with_capacity(rows.len());
    let mut states = Vec::with_capacity(rows.len() * windows.len());
    for (d, m) in rows {
        if !m.keys().eq(windows.iter()) {
            return Err(Error::Input(format!(
                "{}: dyad {d} covers different windows",
                path.display()
            )));
        }
        dyads.push(DyadKey::from_index(d));
        states.extend(m.into_values());
    }
    SequenceSet::new(category, windows, dyads, states).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use spillover_core::synth::{generate_panel, CouplingParams};

    #[test]
    fn round_trip() {
        let params = CouplingParams {
            n_dyads: 40,
            n_windows: 5,
            seed: 9,
            ..CouplingParams::default()
        };
        let seqs = generate_panel(&params).unwrap().sequences;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SEQUENCES);
        write_sequences(&path, &seqs).unwrap();
        assert_eq!(read_sequences(&path, params.category).unwrap(), seqs);
    }

    #[test]
    fn ragged_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SEQUENCES);
        std::fs::write(&path, "dyad,window,rule,traffic\n0,0,1,0\n0,1,1,1\n1,0,0,0\n").unwrap();
        assert!(matches!(read_sequences(&path, Governance::Admin), Err(Error::Input(_))));
    }
}
