//! Panel directory: `visitors.csv`, `rule_counts.csv`, `filter_trace.csv`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use spillover_core::{FilterStage, FilterTrace, Governance, PanelDataset};

use super::{columns, finish, reader, write_row, writer};
use crate::error::{Error, Result};

pub const VISITORS: &str = "visitors.csv";
pub const RULE_COUNTS: &str = "rule_counts.csv";
pub const FILTER_TRACE: &str = "filter_trace.csv";

/// Writes the panel files into `dir` and returns their paths in write order.
pub fn write_panel(dir: &Path, panel: &PanelDataset, trace: &FilterTrace) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let servers = panel.servers();

    let path = dir.join(VISITORS);
    let mut w = writer(&path)?;
    write_row(&path, &mut w, ["window", "server", "user"])?;
    for ((window, s), users) in panel.visitor_sets() {
        let (window, name) = (window.to_string(), servers.name(s));
        for u in users {
            write_row(&path, &mut w, [window.as_str(), name, u.as_str()])?;
        }
    }
    finish(&path, w)?;
    let mut out = vec![path];

    let path = dir.join(RULE_COUNTS);
    let mut w = writer(&path)?;
    write_row(&path, &mut w, ["window", "server", "category", "count"])?;
    for &window in panel.windows() {
        for s in 0..servers.len() as u32 {
            for g in Governance::ALL {
                let c = panel.rule_count(window, s, g).expect("complete panel");
                write_row(
                    &path,
                    &mut w,
                    [&window.to_string(), servers.name(s), g.name(), &c.to_string()],
                )?;
            }
        }
    }
    finish(&path, w)?;
    out.push(path);

    let path = dir.join(FILTER_TRACE);
    let mut w = writer(&path)?;
    write_row(&path, &mut w, ["stage", "removed", "remaining", "servers"])?;
    write_row(&path, &mut w, ["input", "0", &trace.input.to_string(), ""])?;
    for ((stage, removed), left) in trace.removed.iter().zip(trace.remaining()) {
        write_row(
            &path,
            &mut w,
            [
                stage.name(),
                &removed.len().to_string(),
                &left.to_string(),
                &removed.join(";"),
            ],
        )?;
    }
    finish(&path, w)?;
    out.push(path);
    Ok(out)
}

fn parse_u32(path: &Path, line: usize, raw: &str, what: &str) -> Result<u32> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Input(format!("{}:{line}: bad {what} {raw:?}", path.display())))
}

/// Reads a panel directory. Windows and servers are taken from
/// `rule_counts.csv`, which lists every pair.
pub fn read_panel(dir: &Path) -> Result<PanelDataset> {
    let path = dir.join(RULE_COUNTS);
    let mut rdr = reader(&path)?;
    let [cw, cs, cc, cn] = columns(&path, &mut rdr, ["window", "server", "category", "count"])?;
    let mut windows = BTreeSet::new();
    let mut servers = BTreeSet::new();
    let mut counts = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let window = parse_u32(&path, line, get(cw), "window")?;
        let server = get(cs).trim().to_string();
        let g = Governance::from_name(get(cc).trim())
            .ok_or_else(|| Error::Input(format!("{}:{line}: bad category {:?}", path.display(), get(cc))))?;
        let count = parse_u32(&path, line, get(cn), "count")?;
        windows.insert(window);
        servers.insert(server.clone());
        counts.insert((window, server, g), count);
    }

    let path = dir.join(VISITORS);
    let mut rdr = reader(&path)?;
    let [vw, vs, vu] = columns(&path, &mut rdr, ["window", "server", "user"])?;
    let mut visitors: BTreeMap<(u32, String), BTreeSet<String>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let get = |c: usize| rec.get(c).unwrap_or("").trim();
        let window = parse_u32(&path, line, get(vw), "window")?;
        visitors
            .entry((window, get(vs).to_string()))
            .or_default()
            .insert(get(vu).to_string());
    }
    PanelDataset::from_parts(windows.into_iter().collect(), servers, visitors, counts)
        .map_err(|e| Error::Input(format!("{}: {e}", dir.display())))
}

/// Reads `filter_trace.csv` back into a trace.
pub fn read_filter_trace(dir: &Path) -> Result<FilterTrace> {
    let path = dir.join(FILTER_TRACE);
    let mut rdr = reader(&path)?;
    let [cs, cr, cl, cv] = columns(&path, &mut rdr, ["stage", "removed", "remaining", "servers"])?;
    let mut trace = FilterTrace::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let get = |c: usize| rec.get(c).unwrap_or("").trim();
        if get(cs) == "input" {
            trace.input = get(cl)
                .parse()
                .map_err(|_| Error::Input(format!("{}: bad input count", path.display())))?;
            continue;
        }
        let stage = FilterStage::from_name(get(cs))
            .ok_or_else(|| Error::Input(format!("{}: unknown stage {:?}", path.display(), get(cs))))?;
        let servers: Vec<String> = get(cv)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if get(cr).parse::<usize>().ok() != Some(servers.len()) {
            return Err(Error::Input(format!(
                "{}: removed count mismatch for {}",
                path.display(),
                stage.name()
            )));
        }
        trace.removed.push((stage, servers));
    }
    Ok(trace)
}
