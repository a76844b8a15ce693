use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spillover::config::RunConfig;
use spillover::io::logs::VisitFormat;
use spillover::io::report::read_reports;
use spillover::manifest::{Manifest, MANIFEST};
use spillover::render::render_reports;
use spillover::{pipeline, Error, Result};
use spillover_core::{Governance, RuleLinkMode};

/// Detect directional spillover between a traffic layer and rule-similarity
/// layers of a temporal multiplex server network.
///
/// Settings come from defaults, then the `--config` TOML file, then flags.
/// `spillover defaults` prints the full default config.
#[derive(Parser)]
#[command(name = "spillover", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter servers and aggregate raw logs into a panel directory.
    Ingest(IngestArgs),
    /// Build layers and estimate spillover for every rule category.
    Analyze(AnalyzeArgs),
    /// Generate synthetic sequences and, optionally, raw logs.
    Simulate(SimulateArgs),
    /// Render the summary table from an existing spillover.csv.
    Report(ReportArgs),
    /// False-positive rates of the CI method on uncoupled synthetic panels.
    Calibrate(CalibrateArgs),
    /// Print the default configuration as TOML.
    Defaults,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Default)]
struct WindowFlags {
    /// Calendar year whose ISO week 1 is study week 1 [default: 2016].
    #[arg(long)]
    study_year: Option<i32>,
    /// First study week [default: 5].
    #[arg(long)]
    study_start_week: Option<i64>,
    /// Last study week; a partial trailing window is dropped [default: 22].
    #[arg(long)]
    study_end_week: Option<i64>,
    /// Weeks per aggregation window [default: 4].
    #[arg(long)]
    weeks_per_window: Option<u32>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// Visit log (`user_id,server_id,timestamp`), CSV or JSON lines.
    #[arg(long)]
    visits: PathBuf,
    /// Plugin log (`server_id,plugin_id,category,week`).
    #[arg(long)]
    plugins: PathBuf,
    /// Visit log format: csv or jsonl [default: from the file extension].
    #[arg(long)]
    visit_format: Option<String>,
    #[command(flatten)]
    window: WindowFlags,
    /// Minimum distinct visited weeks inside the study span [default: 16].
    #[arg(long)]
    min_live_weeks: Option<u32>,
    /// Minimum first-to-last visit span in weeks [default: 4].
    #[arg(long)]
    min_survival_weeks: Option<u32>,
    /// Keep servers with no plugin observation [default: drop them].
    #[arg(long)]
    allow_missing_governance: bool,
}

#[derive(Args, Default)]
struct AnalysisFlags {
    /// analytic or bootstrap [default: analytic].
    #[arg(long)]
    ci_method: Option<String>,
    /// Two-sided confidence level [default: 0.99].
    #[arg(long)]
    level: Option<f64>,
    /// Bootstrap resamples, at least 100 [default: 1000].
    #[arg(long)]
    bootstrap_replicates: Option<usize>,
    /// Bootstrap master seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// match (same level) or both_high [default: match].
    #[arg(long)]
    rule_link_mode: Option<String>,
    /// Traffic median over positive weights or all dyads [default: positive].
    #[arg(long)]
    median_support: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Panel directory written by `ingest`.
    #[arg(long, conflicts_with = "sequences", required_unless_present = "sequences")]
    panel: Option<PathBuf>,
    /// Sequence CSV (`dyad,window,rule,traffic`) written by `simulate`.
    #[arg(long)]
    sequences: Option<PathBuf>,
    /// Rule category label for `--sequences` input.
    #[arg(long, default_value = "admin")]
    category: String,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Args, Default)]
struct SimFlags {
    /// Dyads [default: 2000].
    #[arg(long)]
    n_dyads: Option<usize>,
    /// Windows per sequence [default: 18].
    #[arg(long)]
    n_windows: Option<usize>,
    /// Rule-layer appearance probability [default: 0.1].
    #[arg(long)]
    rule_appear: Option<f64>,
    /// Rule-layer vanishing probability [default: 0.3].
    #[arg(long)]
    rule_vanish: Option<f64>,
    /// Traffic-layer appearance probability [default: 0.1].
    #[arg(long)]
    traffic_appear: Option<f64>,
    /// Traffic-layer vanishing probability [default: 0.3].
    #[arg(long)]
    traffic_vanish: Option<f64>,
    /// Added to traffic appearance while a rule link is present [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    beta_inst_to_cult: Option<f64>,
    /// Added to rule appearance while a traffic link is present [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    beta_cult_to_inst: Option<f64>,
    /// Generator seed [default: 0].
    #[arg(long = "sim-seed")]
    sim_seed: Option<u64>,
    /// Rule category of the generated layer [default: admin].
    #[arg(long = "sim-category")]
    sim_category: Option<String>,
    /// Servers for fabricated logs [default: 200].
    #[arg(long)]
    n_servers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Also write visits.csv, plugins.csv, truth_layers.csv and an ingest
    /// config.toml from the server-level generator.
    #[arg(long)]
    fabricate_logs: bool,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct ReportArgs {
    /// spillover.csv from `analyze`.
    input: PathBuf,
    /// Level shown in the header [default: from a manifest.json next to
    /// the input, else 0.99].
    #[arg(long)]
    level: Option<f64>,
    /// Rule link mode shown in the header [default: from the manifest, else
    /// match].
    #[arg(long)]
    rule_link_mode: Option<String>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// Replicate panels.
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[command(flatten)]
    analysis: AnalysisFlags,
    #[command(flatten)]
    sim: SimFlags,
}

fn load(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            if !p.is_file() {
                return Err(Error::Input(format!("{}: config file not found", p.display())));
            }
            RunConfig::load(p)
        }
        None => Ok(RunConfig::default()),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl WindowFlags {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.window.study_year, self.study_year);
        set(&mut cfg.window.study_start_week, self.study_start_week);
        set(&mut cfg.window.study_end_week, self.study_end_week);
        set(&mut cfg.window.weeks_per_window, self.weeks_per_window);
    }
}

impl AnalysisFlags {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.analysis.ci_method, self.ci_method);
        set(&mut cfg.analysis.level, self.level);
        set(&mut cfg.analysis.bootstrap_replicates, self.bootstrap_replicates);
        set(&mut cfg.analysis.seed, self.seed);
        set(&mut cfg.network.rule_link_mode, self.rule_link_mode);
        set(&mut cfg.network.median_support, self.median_support);
    }
}

impl SimFlags {
    fn apply(self, cfg: &mut RunConfig) {
        let s = &mut cfg.simulate;
        set(&mut s.n_dyads, self.n_dyads);
        set(&mut s.n_windows, self.n_windows);
        set(&mut s.rule_appear, self.rule_appear);
        set(&mut s.rule_vanish, self.rule_vanish);
        set(&mut s.traffic_appear, self.traffic_appear);
        set(&mut s.traffic_vanish, self.traffic_vanish);
        set(&mut s.beta_inst_to_cult, self.beta_inst_to_cult);
        set(&mut s.beta_cult_to_inst, self.beta_cult_to_inst);
        set(&mut s.seed, self.sim_seed);
        set(&mut s.category, self.sim_category);
        set(&mut s.n_servers, self.n_servers);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let mut cfg = load(a.common.config.as_deref())?;
            a.window.apply(&mut cfg);
            set(&mut cfg.filter.min_live_weeks, a.min_live_weeks);
            set(&mut cfg.filter.min_survival_weeks, a.min_survival_weeks);
            if a.allow_missing_governance {
                cfg.filter.require_governance_info = false;
            }
            let format = match a.visit_format.as_deref() {
                Some(name) => VisitFormat::from_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown visit format {name:?}")))?,
                None => VisitFormat::infer(&a.visits),
            };
            let out = pipeline::ingest(&cfg, &a.visits, &a.plugins, format, &a.common.out)?;
            report_warnings(&out.manifest);
        }
        Command::Analyze(a) => {
            let mut cfg = load(a.common.config.as_deref())?;
            a.analysis.apply(&mut cfg);
            let out = match (&a.panel, &a.sequences) {
                (Some(panel), _) => pipeline::analyze_panel(&cfg, panel, &a.common.out, a.common.workers)?,
                (None, Some(seqs)) => {
                    let g = Governance::from_name(&a.category)
                        .ok_or_else(|| Error::Config(format!("unknown category {:?}", a.category)))?;
                    pipeline::analyze_sequences(&cfg, seqs, g, &a.common.out, a.common.workers)?
                }
                (None, None) => return Err(Error::Config("one of --panel or --sequences is required".into())),
            };
            report_warnings(&out.manifest);
            let table = std::fs::read_to_string(out.dir.join(pipeline::REPORT_TXT))
                .map_err(|e| Error::io(&out.dir.join(pipeline::REPORT_TXT), e))?;
            print!("{table}");
        }
        Command::Simulate(a) => {
            let mut cfg = load(a.common.config.as_deref())?;
            a.sim.apply(&mut cfg);
            let out = pipeline::simulate(&cfg, &a.common.out, a.fabricate_logs, a.common.workers)?;
            report_warnings(&out.manifest);
        }
        Command::Report(a) => {
            if !a.input.is_file() {
                return Err(Error::Input(format!("{}: no such file", a.input.display())));
            }
            let beside = a.input.parent().map(|p| p.join(MANIFEST)).filter(|p| p.is_file());
            let manifest = beside.as_deref().map(Manifest::read).transpose()?;
            let level = a
                .level
                .or(manifest.as_ref().map(|m| m.config.analysis.level))
                .unwrap_or(spillover_core::spillover::DEFAULT_LEVEL);
            let mode_name = a
                .rule_link_mode
                .or(manifest.map(|m| m.config.network.rule_link_mode))
                .unwrap_or_else(|| "match".into());
            let mode = RuleLinkMode::from_name(&mode_name)
                .ok_or_else(|| Error::Config(format!("unknown rule_link_mode {mode_name:?}")))?;
            let reports = read_reports(&a.input, level)?;
            let text = render_reports(&reports, mode);
            match a.out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?,
                None => print!("{text}"),
            }
        }
        Command::Calibrate(a) => {
            let mut cfg = load(a.common.config.as_deref())?;
            a.analysis.apply(&mut cfg);
            a.sim.apply(&mut cfg);
            let (_, table) = pipeline::calibrate(&cfg, a.replicates, &a.common.out, a.common.workers)?;
            for r in &table.rows {
                let fpr = r.fpr().map_or_else(|| "undefined".to_string(), |f| format!("{f:.3}"));
                println!(
                    "{:<7} fpr={fpr:<9} mean_occupancy={:.1}",
                    r.transition.to_string(),
                    r.mean_occupancy
                );
            }
        }
        Command::Defaults => print!("{}", RunConfig::default().to_toml()),
    }
    Ok(())
}

fn report_warnings(m: &Manifest) {
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
