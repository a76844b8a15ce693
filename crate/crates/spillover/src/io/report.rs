//! `spillover.csv`: 16 rows per rule category.

use std::path::Path;

use spillover_core::{CiMethod, EstimateValue, Governance, JointState, SpilloverEstimate, SpilloverReport, Transition};

use super::{columns, finish, reader, write_row, writer};
use crate::error::{Error, Result};

pub const SPILLOVER: &str = "spillover.csv";
pub const UNDEFINED: &str = "undefined";

const HEADER: [&str; 11] = [
    "rule_category",
    "from_state",
    "to_state",
    "p_obs",
    "p_null",
    "diff",
    "ci_lo",
    "ci_hi",
    "n_from",
    "significant",
    "method",
];

/// Floats are written in shortest round-trip form so the file parses back
/// to the exact values.
pub fn write_reports(path: &Path, reports: &[SpilloverReport]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, HEADER)?;
    for r in reports {
        for e in &r.estimates {
            let (from, to) = (e.transition.from.label(), e.transition.to.label());
            let n_from = e.n_from.to_string();
            let row: Vec<String> = match e.value {
                Some(v) => vec![
                    v.p_obs.to_string(),
                    v.p_null.to_string(),
                    v.diff.to_string(),
                    v.ci_lo.to_string(),
                    v.ci_hi.to_string(),
                    v.significant().to_string(),
                ],
                None => vec![UNDEFINED.to_string(); 6],
            };
            write_row(
                path,
                &mut w,
                [r.category.name(), from, to]
                    .into_iter()
                    .chain(row[..5].iter().map(String::as_str))
                    .chain([n_from.as_str(), row[5].as_str(), r.method.name()]),
            )?;
        }
    }
    finish(path, w)
}

/// Parses a report file. The level is not stored in the file, so the caller
/// supplies it. A `significant` column that disagrees with the interval is
/// rejected.
pub fn read_reports(path: &Path, level: f64) -> Result<Vec<SpilloverReport>> {
    let mut rdr = reader(path)?;
    let cols = columns(path, &mut rdr, HEADER)?;
    let mut reports: Vec<SpilloverReport> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let get = |k: usize| rec.get(cols[k]).unwrap_or("").trim();
        let bad = |what: &str| Error::Input(format!("{}:{line}: bad {what} {:?}", path.display(), what));
        let category = Governance::from_name(get(0)).ok_or_else(|| bad("rule_category"))?;
        let from = JointState::from_label(get(1)).ok_or_else(|| bad("from_state"))?;
        let to = JointState::from_label(get(2)).ok_or_else(|| bad("to_state"))?;
        let n_from: u64 = get(8).parse().map_err(|_| bad("n_from"))?;
        let method = CiMethod::from_name(get(10)).ok_or_else(|| bad("method"))?;
        let value = if get(3) == UNDEFINED {
            None
        } else {
            let f = |k: usize, what: &str| get(k).parse::<f64>().map_err(|_| bad(what));
            let v = EstimateValue {
                p_obs: f(3, "p_obs")?,
                p_null: f(4, "p_null")?,
                diff: f(5, "diff")?,
                ci_lo: f(6, "ci_lo")?,
                ci_hi: f(7, "ci_hi")?,
            };
            if get(9) != v.significant().to_string() {
                return Err(bad("significant"));
            }
            Some(v)
        };
        let est = SpilloverEstimate {
            transition: Transition::new(from, to),
            n_from,
            method,
            value,
        };
        match reports.last_mut() {
            Some(r) if r.category == category && r.estimates.len() < 16 => {
                if r.method != method {
                    return Err(bad("method"));
                }
                r.estimates.push(est);
            }
            _ => reports.push(SpilloverReport {
                category,
                method,
                level,
                estimates: vec![est],
            }),
        }
    }
    for r in &reports {
        let mut seen: Vec<Transition> = r.estimates.iter().map(|e| e.transition).collect();
        seen.sort_by_key(|t| t.index());
        if seen != Transition::all().collect::<Vec<_>>() {
            return Err(Error::Input(format!(
                "{}: category {} does not list all 16 transitions once",
                path.display(),
                r.category.name()
            )));
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spillover_core::spillover::analytic_from_sequences;
    use spillover_core::synth::{generate_panel, CouplingParams};

    #[test]
    fn round_trip_is_exact() {
        let params = CouplingParams {
            n_dyads: 300,
            n_windows: 6,
            rule_appear: 0.0,
            beta_inst_to_cult: 0.2,
            seed: 4,
            ..CouplingParams::default()
        };
        let seqs = generate_panel(&params).unwrap().sequences;
        let report = analytic_from_sequences(&seqs, 0.99).unwrap();
        assert!(report.estimates.iter().any(|e| e.value.is_none()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SPILLOVER);
        write_reports(&path, std::slice::from_ref(&report)).unwrap();
        assert_eq!(read_reports(&path, 0.99).unwrap(), vec![report]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.contains(",undefined,undefined,0,undefined,analytic"), "{text}");
    }

    #[test]
    fn incomplete_category_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SPILLOVER);
        std::fs::write(
            &path,
            format!(
                "{}\nadmin,at,at,0.5,0.5,0,-0.1,0.1,10,false,analytic\n",
                HEADER.join(",")
            ),
        )
        .unwrap();
        assert!(matches!(read_reports(&path, 0.99), Err(Error::Input(_))));
    }
}
