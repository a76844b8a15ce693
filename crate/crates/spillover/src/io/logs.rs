//! Raw visit and plugin logs.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Deserialize;
use spillover_core::{Category, CategoryMap, PluginObservation, VisitEvent};

use super::{columns, finish, reader, write_row, writer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisitFormat {
    Csv,
    JsonLines,
}

impl VisitFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "csv" => Some(VisitFormat::Csv),
            "jsonl" | "json-lines" | "ndjson" => Some(VisitFormat::JsonLines),
            _ => None,
        }
    }

    /// `.jsonl`/`.ndjson` files are JSON lines, anything else CSV.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => VisitFormat::JsonLines,
            _ => VisitFormat::Csv,
        }
    }
}

/// A row that could not be parsed. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisitLog {
    pub events: Vec<VisitEvent>,
    pub rejects: Vec<RowReject>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PluginLog {
    pub observations: Vec<PluginObservation>,
    pub rejects: Vec<RowReject>,
    /// Raw category strings mapped to `Other` because the table lacks them.
    pub unknown_categories: BTreeMap<String, usize>,
}

pub fn parse_timestamp(raw: &str) -> std::result::Result<i64, String> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map(|t| t.timestamp())
        .map_err(|e| format!("bad timestamp {raw:?}: {e}"))
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, name: &str) -> std::result::Result<&'a str, String> {
    match rec.get(i).map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing {name}")),
    }
}

fn visit_from_parts(user: &str, server: &str, ts: &str) -> std::result::Result<VisitEvent, String> {
    let ts = parse_timestamp(ts)?;
    VisitEvent::new(user, server, ts).map_err(|e| e.to_string())
}

/// Reads a visit log. Rows with missing or malformed fields are collected in
/// `rejects`; only an unreadable file or a missing header column is fatal.
pub fn parse_visit_log(path: &Path, format: VisitFormat) -> Result<VisitLog> {
    match format {
        VisitFormat::Csv => parse_visit_csv(path),
        VisitFormat::JsonLines => parse_visit_jsonl(path),
    }
}

fn parse_visit_csv(path: &Path) -> Result<VisitLog> {
    let mut rdr = reader(path)?;
    if rdr.headers().map_err(|e| Error::csv(path, e))?.is_empty() {
        return Ok(VisitLog::default());
    }
    let [u, s, t] = columns(path, &mut rdr, ["user_id", "server_id", "timestamp"])?;
    let mut log = VisitLog::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            visit_from_parts(
                field(&rec, u, "user_id")?,
                field(&rec, s, "server_id")?,
                field(&rec, t, "timestamp")?,
            )
        });
        match parsed {
            Ok(ev) => log.events.push(ev),
            Err(reason) => log.rejects.push(RowReject { line, reason }),
        }
    }
    Ok(log)
}

#[derive(Deserialize)]
struct VisitJson {
    user_id: Option<String>,
    server_id: Option<String>,
    timestamp: Option<String>,
}

fn parse_visit_jsonl(path: &Path) -> Result<VisitLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut log = VisitLog::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let text = line.map_err(|e| Error::io(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<VisitJson>(&text)
            .map_err(|e| e.to_string())
            .and_then(|v| {
                let need = |x: Option<String>, name: &str| x.filter(|s| !s.is_empty()).ok_or(format!("missing {name}"));
                visit_from_parts(
                    &need(v.user_id, "user_id")?,
                    &need(v.server_id, "server_id")?,
                    &need(v.timestamp, "timestamp")?,
                )
            });
        match parsed {
            Ok(ev) => log.events.push(ev),
            Err(reason) => log.rejects.push(RowReject { line: line_no, reason }),
        }
    }
    Ok(log)
}

/// Reads a plugin log `server_id,plugin_id,category,week`. Unknown category
/// strings become [`Category::Other`] and are counted.
pub fn parse_plugin_log(path: &Path, categories: &CategoryMap) -> Result<PluginLog> {
    let mut rdr = reader(path)?;
    let mut log = PluginLog::default();
    if rdr.headers().map_err(|e| Error::csv(path, e))?.is_empty() {
        return Ok(log);
    }
    let [s, p, c, w] = columns(path, &mut rdr, ["server_id", "plugin_id", "category", "week"])?;
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            let server = field(&rec, s, "server_id")?;
            let plugin = field(&rec, p, "plugin_id")?;
            let raw = field(&rec, c, "category")?;
            let week: i64 = field(&rec, w, "week")?.parse().map_err(|e| format!("bad week: {e}"))?;
            Ok((server.to_string(), plugin.to_string(), raw.to_string(), week))
        });
        match parsed {
            Ok((server_id, plugin_id, raw, observed_week)) => {
                let category = categories.lookup(&raw).unwrap_or_else(|| {
                    *log.unknown_categories.entry(raw.clone()).or_default() += 1;
                    Category::Other
                });
                log.observations.push(PluginObservation {
                    server_id,
                    plugin_id,
                    category,
                    observed_week,
                });
            }
            Err(reason) => log.rejects.push(RowReject { line, reason }),
        }
    }
    Ok(log)
}

pub fn write_visit_csv(path: &Path, events: &[VisitEvent]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["user_id", "server_id", "timestamp"])?;
    for e in events {
        write_row(
            path,
            &mut w,
            [e.user_id.as_str(), e.server_id.as_str(), &format_timestamp(e.timestamp)],
        )?;
    }
    finish(path, w)
}

pub fn write_visit_jsonl(path: &Path, events: &[VisitEvent]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for e in events {
        let line = serde_json::json!({
            "user_id": e.user_id,
            "server_id": e.server_id,
            "timestamp": format_timestamp(e.timestamp),
        });
        writeln!(out, "{line}").map_err(|err| Error::io(path, err))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_plugin_csv(path: &Path, observations: &[PluginObservation]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["server_id", "plugin_id", "category", "week"])?;
    for o in observations {
        write_row(
            path,
            &mut w,
            [
                o.server_id.as_str(),
                o.plugin_id.as_str(),
                o.category.name(),
                &o.observed_week.to_string(),
            ],
        )?;
    }
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn visit_csv_with_malformed_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        fs::write(
            &path,
            "user_id,server_id,timestamp\nu1,s1,2016-02-01T00:00:00Z\nu2,,2016-02-01T00:00:00Z\nu3,s2,2016-02-02T10:00:00+02:00\n",
        )
        .unwrap();
        let log = parse_visit_log(&path, VisitFormat::Csv).unwrap();
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.events[0], VisitEvent::new("u1", "s1", 1_454_284_800).unwrap());
        assert_eq!(log.events[1].timestamp, 1_454_284_800 + 86_400 + 8 * 3600);
        assert_eq!(log.rejects.len(), 1);
        assert_eq!(log.rejects[0].line, 3);
    }

    #[test]
    fn short_rows_and_bad_timestamps_are_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        fs::write(&path, "user_id,server_id,timestamp\nu1,s1\nu2,s2,yesterday\n").unwrap();
        let log = parse_visit_log(&path, VisitFormat::Csv).unwrap();
        assert!(log.events.is_empty());
        assert_eq!(log.rejects.len(), 2);
    }

    #[test]
    fn empty_file_is_empty_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        fs::write(&path, "").unwrap();
        assert_eq!(parse_visit_log(&path, VisitFormat::Csv).unwrap(), VisitLog::default());
        let path = dir.path().join("v.jsonl");
        fs::write(&path, "").unwrap();
        assert_eq!(
            parse_visit_log(&path, VisitFormat::JsonLines).unwrap(),
            VisitLog::default()
        );
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = parse_visit_log(Path::new("/nonexistent/v.csv"), VisitFormat::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_header_column_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        fs::write(&path, "user,server_id,timestamp\nu1,s1,2016-02-01T00:00:00Z\n").unwrap();
        assert!(matches!(parse_visit_log(&path, VisitFormat::Csv), Err(Error::Input(_))));
    }

    #[test]
    fn jsonl_round_trip_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        let events = vec![
            VisitEvent::new("a", "s", 1_454_284_800).unwrap(),
            VisitEvent::new("b", "t", 1_454_284_900).unwrap(),
        ];
        write_visit_jsonl(&path, &events).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"user_id\": \"c\"}\nnot json\n");
        fs::write(&path, text).unwrap();
        let log = parse_visit_log(&path, VisitFormat::JsonLines).unwrap();
        assert_eq!(log.events, events);
        assert_eq!(log.rejects.iter().map(|r| r.line).collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn plugin_log_categories() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(
            &path,
            "server_id,plugin_id,category,week\n\
             s1,antiCheat,admin,6\n\
             s1,ban,Admin,6\n\
             s2,shop,economy,7\n\
             s2,bank,economy,7\n\
             s3,trees,worldgen,7\n",
        )
        .unwrap();
        let log = parse_plugin_log(&path, &CategoryMap::default()).unwrap();
        assert_eq!(
            log.observations[0],
            PluginObservation {
                server_id: "s1".into(),
                plugin_id: "antiCheat".into(),
                category: Category::Admin,
                observed_week: 6
            }
        );
        let mut per_cat = BTreeMap::new();
        for o in &log.observations {
            *per_cat.entry(o.category).or_insert(0) += 1;
        }
        assert_eq!(
            per_cat,
            BTreeMap::from([(Category::Admin, 2), (Category::Economy, 2), (Category::Other, 1)])
        );
        assert_eq!(log.unknown_categories, BTreeMap::from([("worldgen".to_string(), 1)]));
        assert!(log.rejects.is_empty());
    }
}
