//! Pipeline commands. Each writes its outputs plus a manifest into an
//! output directory and returns what it produced.

use std::path::{Path, PathBuf};

use spillover_core::markov::encode_sequences;
use spillover_core::seed::derive_seed;
use spillover_core::spillover::estimate_matrices;
use spillover_core::synth::{fabricate_log, generate_server_panel, server_name, CalibrationMethod, FprTable};
use spillover_core::{
    build_panel, build_rule_dummies, build_rule_layer, build_traffic_layer, filter_servers, hypothesis_report,
    spillover_analytic, CiMethod, Error as CoreError, Governance, HypothesisSummary, LayerId, LayerSnapshot,
    PanelDataset, SequenceSet, SpilloverReport,
};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::layers::{write_layers, write_medians, MedianRecord, LAYERS, MEDIANS};
use crate::io::logs::{parse_plugin_log, parse_visit_log, write_plugin_csv, write_visit_csv, VisitFormat};
use crate::io::panel::{read_panel, write_panel, RULE_COUNTS, VISITORS};
use crate::io::report::{write_reports, SPILLOVER};
use crate::io::sequences::{write_sequences, SEQUENCES};
use crate::manifest::Manifest;
use crate::parallel::{par_bootstrap, par_calibration_run, par_count_transitions, par_generate_panel, with_workers};
use crate::render::{render_table, summary_json};

pub const REPORT_TXT: &str = "report.txt";
pub const FPR: &str = "fpr.csv";
pub const VISITS_OUT: &str = "visits.csv";
pub const PLUGINS_OUT: &str = "plugins.csv";
pub const TRUTH_LAYERS: &str = "truth_layers.csv";
pub const CONFIG_OUT: &str = "config.toml";

pub fn summary_file(g: Governance) -> String {
    format!("summary_{}.json", g.name())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Input(format!("{}: no such file", path.display())))
    }
}

fn finish(dir: &Path, mut manifest: Manifest, files: &[PathBuf]) -> Result<RunOutput> {
    for f in files {
        manifest.add_output(f)?;
    }
    manifest.write(dir)?;
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        manifest,
    })
}

pub fn ingest(cfg: &RunConfig, visits: &Path, plugins: &Path, format: VisitFormat, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    require_file(visits)?;
    require_file(plugins)?;
    let categories = cfg.category_map()?;
    let visit_log = parse_visit_log(visits, format)?;
    let plugin_log = parse_plugin_log(plugins, &categories)?;

    let mut manifest = Manifest::new("ingest", cfg);
    manifest.add_input("visits", visits)?;
    manifest.add_input("plugins", plugins)?;
    manifest.options.insert(
        "visit_format".into(),
        match format {
            VisitFormat::Csv => "csv",
            VisitFormat::JsonLines => "jsonl",
        }
        .into(),
    );
    for r in &visit_log.rejects {
        manifest.warnings.push(format!("visits line {}: {}", r.line, r.reason));
    }
    for r in &plugin_log.rejects {
        manifest.warnings.push(format!("plugins line {}: {}", r.line, r.reason));
    }
    for (raw, n) in &plugin_log.unknown_categories {
        manifest.warnings.push(format!(
            "plugin category {raw:?} not in the category table; {n} rows mapped to other"
        ));
    }

    let window = cfg.window_spec();
    let calendar = cfg.calendar();
    let (eligible, trace) = filter_servers(
        &visit_log.events,
        &plugin_log.observations,
        &cfg.filter_criteria(),
        &window,
        &calendar,
    )?;
    if eligible.is_empty() {
        return Err(Error::Degenerate(format!(
            "no server passes the filters ({} in input)",
            trace.input
        )));
    }
    let (panel, warnings) = build_panel(
        &visit_log.events,
        &plugin_log.observations,
        &eligible,
        &window,
        &calendar,
    )?;
    manifest.warnings.extend(warnings.iter().map(ToString::to_string));
    create_dir(out)?;
    let files = write_panel(out, &panel, &trace)?;
    finish(out, manifest, &files)
}

/// Layers for every window: the traffic layer and one rule layer per
/// category, plus the medians used.
pub struct PanelLayers {
    pub traffic: Vec<LayerSnapshot>,
    pub rule: Vec<(Governance, Vec<LayerSnapshot>)>,
    pub medians: Vec<MedianRecord>,
    pub warnings: Vec<String>,
}

pub fn build_layers(cfg: &RunConfig, panel: &PanelDataset) -> Result<PanelLayers> {
    let support = cfg.median_support()?;
    let mode = cfg.rule_link_mode()?;
    let mut out = PanelLayers {
        traffic: Vec::new(),
        rule: Vec::new(),
        medians: Vec::new(),
        warnings: Vec::new(),
    };
    for &w in panel.windows() {
        let build = build_traffic_layer(panel, w, support)?;
        if build.median.is_none() {
            out.warnings.push(format!(
                "window {w}: no dyad in the traffic median support; traffic layer empty"
            ));
        }
        out.medians.push(MedianRecord {
            layer: LayerId::Traffic,
            window: w,
            median: build.median,
        });
        out.traffic.push(build.snapshot);
    }
    for g in Governance::ALL {
        let mut layers = Vec::new();
        for &w in panel.windows() {
            let dummies = build_rule_dummies(panel, w, g)?;
            out.medians.push(MedianRecord {
                layer: LayerId::Rule(g),
                window: w,
                median: Some(dummies.median),
            });
            layers.push(build_rule_layer(&dummies, mode));
        }
        out.rule.push((g, layers));
    }
    Ok(out)
}

/// Bootstrap seed for a category, derived from the analysis seed.
pub fn category_seed(seed: u64, g: Governance) -> u64 {
    derive_seed(seed, g.index() as u64)
}

pub fn analyze_sequence_set(cfg: &RunConfig, seqs: &SequenceSet) -> Result<SpilloverReport> {
    let level = cfg.analysis.level;
    match cfg.ci_method()? {
        CiMethod::Analytic => {
            let table = par_count_transitions(seqs)?;
            let (obs, null) = estimate_matrices(&table);
            Ok(spillover_analytic(&table, &obs, &null, level)?)
        }
        CiMethod::Bootstrap => par_bootstrap(
            seqs,
            cfg.analysis.bootstrap_replicates,
            category_seed(cfg.analysis.seed, seqs.category()),
            level,
        ),
    }
}

fn undefined_warnings(report: &SpilloverReport) -> Vec<String> {
    spillover_core::JointState::ALL
        .iter()
        .filter(|s| report.get(**s, **s).is_some_and(|e| e.value.is_none()))
        .map(|s| {
            format!(
                "{}: from-state {} never occupied; its 4 transitions are undefined",
                report.category.name(),
                s.label()
            )
        })
        .collect()
}

fn write_reports_and_summaries(
    cfg: &RunConfig,
    out: &Path,
    reports: &[SpilloverReport],
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>> {
    let mode = cfg.rule_link_mode()?;
    let mut files = Vec::new();
    let path = out.join(SPILLOVER);
    write_reports(&path, reports)?;
    files.push(path);
    let summaries: Vec<HypothesisSummary> = reports.iter().map(|r| hypothesis_report(r, mode)).collect();
    for s in &summaries {
        let path = out.join(summary_file(s.category));
        let mut text = serde_json::to_string_pretty(&summary_json(s)).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    let path = out.join(REPORT_TXT);
    std::fs::write(&path, render_table(&summaries)).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    for r in reports {
        manifest.warnings.extend(undefined_warnings(r));
    }
    if cfg.ci_method()? == CiMethod::Bootstrap {
        manifest.seeds.insert("analysis".into(), cfg.analysis.seed);
        for r in reports {
            manifest.seeds.insert(
                format!("bootstrap.{}", r.category.name()),
                category_seed(cfg.analysis.seed, r.category),
            );
        }
    }
    Ok(files)
}

fn degenerate(e: CoreError) -> Error {
    match e {
        CoreError::TooFewWindows(n) => Error::Degenerate(format!("panel has {n} window(s); at least 2 are needed")),
        CoreError::TooFewDyads(n) => Error::Degenerate(format!("panel has {n} dyad(s); the bootstrap needs 2")),
        other => other.into(),
    }
}

pub fn analyze_panel(cfg: &RunConfig, panel_dir: &Path, out: &Path, workers: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    if !panel_dir.is_dir() {
        return Err(Error::Input(format!(
            "{}: panel directory not found",
            panel_dir.display()
        )));
    }
    let panel = read_panel(panel_dir)?;
    if panel.is_empty() {
        return Err(Error::Degenerate(format!("{}: panel is empty", panel_dir.display())));
    }
    if panel.servers().len() < 2 {
        return Err(Error::Degenerate(
            "panel has fewer than 2 servers; no dyads".to_string(),
        ));
    }
    let mut manifest = Manifest::new("analyze", cfg);
    manifest.add_input("panel/visitors.csv", &panel_dir.join(VISITORS))?;
    manifest.add_input("panel/rule_counts.csv", &panel_dir.join(RULE_COUNTS))?;

    let layers = build_layers(cfg, &panel)?;
    manifest.warnings.extend(layers.warnings.iter().cloned());
    let reports = with_workers(workers, || {
        layers
            .rule
            .iter()
            .map(|(_, rule)| {
                let seqs = encode_sequences(rule, &layers.traffic).map_err(degenerate)?;
                analyze_sequence_set(cfg, &seqs).map_err(|e| match e {
                    Error::Core(c) => degenerate(c),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    create_dir(out)?;
    let mut files = Vec::new();
    let path = out.join(LAYERS);
    let all: Vec<LayerSnapshot> = layers
        .traffic
        .iter()
        .chain(layers.rule.iter().flat_map(|(_, l)| l.iter()))
        .cloned()
        .collect();
    write_layers(&path, &all)?;
    files.push(path);
    let path = out.join(MEDIANS);
    write_medians(&path, &layers.medians)?;
    files.push(path);
    files.extend(write_reports_and_summaries(cfg, out, &reports, &mut manifest)?);
    finish(out, manifest, &files)
}

pub fn analyze_sequences(
    cfg: &RunConfig,
    sequences: &Path,
    category: Governance,
    out: &Path,
    workers: Option<usize>,
) -> Result<RunOutput> {
    cfg.validate()?;
    require_file(sequences)?;
    let seqs = crate::io::sequences::read_sequences(sequences, category)?;
    if seqs.is_empty() {
        return Err(Error::Degenerate(format!("{}: no sequences", sequences.display())));
    }
    let mut manifest = Manifest::new("analyze", cfg);
    manifest.add_input("sequences", sequences)?;
    manifest.options.insert("category".into(), category.name().into());
    let report = with_workers(workers, || analyze_sequence_set(cfg, &seqs))?.map_err(|e| match e {
        Error::Core(c) => degenerate(c),
        other => other,
    })?;
    create_dir(out)?;
    let files = write_reports_and_summaries(cfg, out, &[report], &mut manifest)?;
    finish(out, manifest, &files)
}

/// Synthetic dyad sequences, and optionally fabricated raw logs from the
/// server-level generator with the config needed to ingest them.
pub fn simulate(cfg: &RunConfig, out: &Path, fabricate: bool, workers: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let params = cfg.coupling_params()?;
    let mut manifest = Manifest::new("simulate", cfg);
    manifest.seeds.insert("simulate".into(), params.seed);
    let panel = with_workers(workers, || par_generate_panel(&params))??;
    if panel.clamped {
        manifest
            .warnings
            .push("coupled appearance probability left [0, 1] and was clamped".to_string());
    }
    create_dir(out)?;
    let mut files = Vec::new();
    let path = out.join(SEQUENCES);
    write_sequences(&path, &panel.sequences)?;
    files.push(path);

    if fabricate {
        manifest.options.insert("fabricate_logs".into(), "true".into());
        let sp = cfg.server_params()?;
        let server_panel = generate_server_panel(&sp)?;
        if server_panel.clamped {
            manifest
                .warnings
                .push("server-level traffic appearance probability was clamped".to_string());
        }
        let calendar = cfg.calendar();
        let log = fabricate_log(
            &server_panel,
            &calendar,
            cfg.window.study_start_week,
            cfg.window.weeks_per_window,
            cfg.simulate.decoys,
        )?;
        let path = out.join(VISITS_OUT);
        write_visit_csv(&path, &log.visits)?;
        files.push(path);
        let path = out.join(PLUGINS_OUT);
        write_plugin_csv(&path, &log.plugins)?;
        files.push(path);

        let universe = std::sync::Arc::new(spillover_core::Universe::new(
            (0..server_panel.n_servers).map(server_name).collect(),
        ));
        let mut truth = Vec::new();
        for (w, t) in server_panel.traffic.iter().enumerate() {
            truth.push(LayerSnapshot {
                layer: LayerId::Traffic,
                window: w as u32,
                universe: universe.clone(),
                links: t.clone(),
            });
        }
        for g in Governance::ALL {
            for w in 0..server_panel.n_windows {
                truth.push(LayerSnapshot {
                    layer: LayerId::Rule(g),
                    window: w as u32,
                    universe: universe.clone(),
                    links: server_panel.rule_links(w, g),
                });
            }
        }
        let path = out.join(TRUTH_LAYERS);
        write_layers(&path, &truth)?;
        files.push(path);

        let mut ingest_cfg = cfg.clone();
        ingest_cfg.window.study_start_week = log.window.study_start_week;
        ingest_cfg.window.study_end_week = log.window.study_end_week;
        ingest_cfg.window.weeks_per_window = log.window.weeks_per_window;
        ingest_cfg.network.rule_link_mode = "match".into();
        ingest_cfg.network.median_support = "positive".into();
        let path = out.join(CONFIG_OUT);
        std::fs::write(&path, ingest_cfg.to_toml()).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    finish(out, manifest, &files)
}

pub fn write_fpr(path: &Path, tables: &[FprTable]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let row = |w: &mut csv::Writer<std::fs::File>, r: &[String]| w.write_record(r).map_err(|e| Error::csv(path, e));
    row(
        &mut w,
        &[
            "method",
            "from_state",
            "to_state",
            "n_defined",
            "n_structural_zero",
            "n_rejected",
            "fpr",
            "mean_occupancy",
        ]
        .map(String::from),
    )?;
    for t in tables {
        for r in &t.rows {
            row(
                &mut w,
                &[
                    t.method.name().to_string(),
                    r.transition.from.label().to_string(),
                    r.transition.to.label().to_string(),
                    r.n_defined.to_string(),
                    r.n_structural_zero.to_string(),
                    r.n_rejected.to_string(),
                    r.fpr().map_or_else(|| "undefined".to_string(), |f| f.to_string()),
                    r.mean_occupancy.to_string(),
                ],
            )?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// False-positive rates of the configured CI method on uncoupled panels.
pub fn calibrate(
    cfg: &RunConfig,
    replicates: usize,
    out: &Path,
    workers: Option<usize>,
) -> Result<(RunOutput, FprTable)> {
    cfg.validate()?;
    let params = cfg.coupling_params()?;
    let method = match cfg.ci_method()? {
        CiMethod::Analytic => CalibrationMethod::Analytic,
        CiMethod::Bootstrap => CalibrationMethod::Bootstrap {
            replicates: cfg.analysis.bootstrap_replicates,
        },
    };
    let table = with_workers(workers, || {
        par_calibration_run(&params, replicates, method, cfg.analysis.level)
    })??;
    let mut manifest = Manifest::new("calibrate", cfg);
    manifest.options.insert("replicates".into(), replicates.to_string());
    manifest.seeds.insert("simulate".into(), params.seed);
    create_dir(out)?;
    let path = out.join(FPR);
    write_fpr(&path, std::slice::from_ref(&table))?;
    let run = finish(out, manifest, &[path])?;
    Ok((run, table))
}
