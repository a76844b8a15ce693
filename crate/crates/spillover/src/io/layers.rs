//! `layers.csv` (links only) and the `medians.csv` sidecar.

use std::collections::BTreeMap;
use std::path::Path;

use spillover_core::{DyadKey, LayerId, LayerSnapshot};

use super::{columns, finish, reader, write_row, writer};
use crate::error::{Error, Result};

pub const LAYERS: &str = "layers.csv";
pub const MEDIANS: &str = "medians.csv";

/// One median record; `None` marks a degenerate window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianRecord {
    pub layer: LayerId,
    pub window: u32,
    pub median: Option<f64>,
}

pub fn write_layers(path: &Path, snapshots: &[LayerSnapshot]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["layer", "window", "server_a", "server_b"])?;
    for snap in snapshots {
        let window = snap.window.to_string();
        for d in snap.links.iter() {
            write_row(
                path,
                &mut w,
                [
                    snap.layer.name(),
                    &window,
                    snap.universe.name(d.low()),
                    snap.universe.name(d.high()),
                ],
            )?;
        }
    }
    finish(path, w)
}

pub fn write_medians(path: &Path, medians: &[MedianRecord]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["layer", "window", "median"])?;
    for m in medians {
        let median = m.median.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        write_row(path, &mut w, [m.layer.name(), &m.window.to_string(), &median])?;
    }
    finish(path, w)
}

/// Links per `(layer, window)` as server-name pairs `(a, b)` with `a < b`.
pub type LinkTable = BTreeMap<(LayerId, u32), Vec<(String, String)>>;

pub fn read_layers(path: &Path) -> Result<LinkTable> {
    let mut rdr = reader(path)?;
    let [cl, cw, ca, cb] = columns(path, &mut rdr, ["layer", "window", "server_a", "server_b"])?;
    let mut out = LinkTable::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let get = |c: usize| rec.get(c).unwrap_or("").trim();
        let bad = |what: &str| Error::Input(format!("{}:{}: bad {what}", path.display(), i + 2));
        let layer = LayerId::from_name(get(cl)).ok_or_else(|| bad("layer"))?;
        let window: u32 = get(cw).parse().map_err(|_| bad("window"))?;
        out.entry((layer, window))
            .or_default()
            .push((get(ca).to_string(), get(cb).to_string()));
    }
    Ok(out)
}

/// Translates a snapshot's links to name pairs, in the same shape as
/// [`read_layers`].
pub fn link_names(snap: &LayerSnapshot) -> Vec<(String, String)> {
    snap.links
        .iter()
        .map(|d: DyadKey| {
            (
                snap.universe.name(d.low()).to_string(),
                snap.universe.name(d.high()).to_string(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use spillover_core::{Governance, Universe};
    use std::sync::Arc;

    #[test]
    fn links_round_trip() {
        let universe = Arc::new(Universe::new(
            ["s1", "s2", "s3"].iter().map(|s| s.to_string()).collect(),
        ));
        let mut a = LayerSnapshot::empty(LayerId::Traffic, 0, universe.clone());
        a.links.insert(DyadKey::new(0, 2).unwrap());
        a.links.insert(DyadKey::new(1, 0).unwrap());
        let b = LayerSnapshot::empty(LayerId::Rule(Governance::Economy), 1, universe);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LAYERS);
        write_layers(&path, &[a.clone(), b]).unwrap();
        let table = read_layers(&path).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[&(LayerId::Traffic, 0)], link_names(&a));
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "layer,window,server_a,server_b\ntraffic,0,s1,s2\ntraffic,0,s1,s3\n"
        );
    }

    #[test]
    fn medians_mark_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEDIANS);
        write_medians(
            &path,
            &[
                MedianRecord {
                    layer: LayerId::Traffic,
                    window: 0,
                    median: Some(1.5),
                },
                MedianRecord {
                    layer: LayerId::Traffic,
                    window: 1,
                    median: None,
                },
            ],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "layer,window,median\ntraffic,0,1.5\ntraffic,1,undefined\n"
        );
    }
}
