//! Seeded synthetic panels with injectable cross-layer coupling.
//!
//! Two generators are provided. [`generate_panel`] evolves independent
//! dyads as two-layer chains and yields [`SequenceSet`]s directly.
//! [`generate_server_panel`] evolves server-level rule levels and dyad-level
//! traffic links, which [`fabricate_log`] renders as raw visit and plugin
//! records that reproduce the same layers after ingestion and median
//! splitting.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::dyadset::DyadSet;
use crate::error::{Error, Result};
use crate::ingest::{Category, Governance, PluginObservation, VisitEvent, WeekCalendar, WindowSpec};
use crate::markov::{JointState, SequenceSet};
use crate::netbuild::{DyadKey, Level};
use crate::seed::{derive_seed, rng_for};
use crate::spillover::{analytic_from_sequences, spillover_bootstrap, CiMethod, SpilloverReport, Transition};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} = {p} is outside [0, 1]")))
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite")))
    }
}

fn stationary(appear: f64, vanish: f64) -> f64 {
    if appear + vanish > 0.0 {
        appear / (appear + vanish)
    } else {
        0.0
    }
}

/// Dyad-level two-layer chain parameters. Coupling adds `beta_*` to the
/// other layer's appearance probability while the source link is present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub n_dyads: usize,
    pub n_windows: usize,
    pub rule_appear: f64,
    pub rule_vanish: f64,
    pub traffic_appear: f64,
    pub traffic_vanish: f64,
    /// Shift of `traffic_appear` while the rule link is present.
    pub beta_inst_to_cult: f64,
    /// Shift of `rule_appear` while the traffic link is present.
    pub beta_cult_to_inst: f64,
    pub seed: u64,
    /// Category label attached to the generated rule layer.
    pub category: Governance,
}

impl Default for CouplingParams {
    fn default() -> Self {
        CouplingParams {
            n_dyads: 2000,
            n_windows: 18,
            rule_appear: 0.1,
            rule_vanish: 0.3,
            traffic_appear: 0.1,
            traffic_vanish: 0.3,
            beta_inst_to_cult: 0.0,
            beta_cult_to_inst: 0.0,
            seed: 0,
            category: Governance::Admin,
        }
    }
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        check_prob("rule_appear", self.rule_appear)?;
        check_prob("rule_vanish", self.rule_vanish)?;
        check_prob("traffic_appear", self.traffic_appear)?;
        check_prob("traffic_vanish", self.traffic_vanish)?;
        check_finite("beta_inst_to_cult", self.beta_inst_to_cult)?;
        check_finite("beta_cult_to_inst", self.beta_cult_to_inst)?;
        if self.n_dyads < 1 {
            return Err(Error::InvalidParams("n_dyads must be >= 1".to_string()));
        }
        if self.n_windows < 2 {
            return Err(Error::InvalidParams("n_windows must be >= 2".to_string()));
        }
        Ok(())
    }

    /// Whether a shifted appearance probability leaves `[0, 1]` and is
    /// clamped.
    pub fn clamps(&self) -> bool {
        let out = |p: f64| !(0.0..=1.0).contains(&p);
        out(self.traffic_appear + self.beta_inst_to_cult) || out(self.rule_appear + self.beta_cult_to_inst)
    }

    /// Writes the trajectory of dyad `k` into `out` (length `n_windows`).
    pub fn dyad_states(&self, k: usize, out: &mut [JointState]) {
        let mut rng = rng_for(self.seed, k as u64);
        let mut rule = rng.random::<f64>() < stationary(self.rule_appear, self.rule_vanish);
        let mut traffic = rng.random::<f64>() < stationary(self.traffic_appear, self.traffic_vanish);
        out[0] = JointState::new(rule, traffic);
        for slot in &mut out[1..] {
            let (u_rule, u_traffic) = (rng.random::<f64>(), rng.random::<f64>());
            let next_rule = if rule {
                u_rule >= self.rule_vanish
            } else {
                let p = self.rule_appear + if traffic { self.beta_cult_to_inst } else { 0.0 };
                u_rule < p.clamp(0.0, 1.0)
            };
            let next_traffic = if traffic {
                u_traffic >= self.traffic_vanish
            } else {
                let p = self.traffic_appear + if rule { self.beta_inst_to_cult } else { 0.0 };
                u_traffic < p.clamp(0.0, 1.0)
            };
            rule = next_rule;
            traffic = next_traffic;
            *slot = JointState::new(rule, traffic);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPanel {
    pub sequences: SequenceSet,
    /// A coupled probability was clamped to `[0, 1]`.
    pub clamped: bool,
}

pub fn generate_panel(params: &CouplingParams) -> Result<SyntheticPanel> {
    params.validate()?;
    let w = params.n_windows;
    let mut states = vec![JointState::at; params.n_dyads * w];
    for (k, chunk) in states.chunks_mut(w).enumerate() {
        params.dyad_states(k, chunk);
    }
    Ok(SyntheticPanel {
        sequences: assemble(params, states)?,
        clamped: params.clamps(),
    })
}

/// Wraps generated states (row-major per dyad) into a [`SequenceSet`].
pub fn assemble(params: &CouplingParams, states: Vec<JointState>) -> Result<SequenceSet> {
    SequenceSet::new(
        params.category,
        (0..params.n_windows as u32).collect(),
        (0..params.n_dyads).map(DyadKey::from_index).collect(),
        states,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMethod {
    Analytic,
    Bootstrap { replicates: usize },
}

impl CalibrationMethod {
    pub fn ci_method(self) -> CiMethod {
        match self {
            CalibrationMethod::Analytic => CiMethod::Analytic,
            CalibrationMethod::Bootstrap { .. } => CiMethod::Bootstrap,
        }
    }
}

/// Seeds of calibration replicate `r`: (panel seed, bootstrap seed).
pub fn replicate_seeds(master: u64, r: u64) -> (u64, u64) {
    let panel = derive_seed(master, r);
    (panel, derive_seed(panel, u64::MAX))
}

/// Generates and analyses calibration replicate `r`.
pub fn calibration_replicate(
    params: &CouplingParams,
    r: u64,
    method: CalibrationMethod,
    level: f64,
) -> Result<SpilloverReport> {
    let (panel_seed, boot_seed) = replicate_seeds(params.seed, r);
    let panel = generate_panel(&CouplingParams {
        seed: panel_seed,
        ..*params
    })?;
    match method {
        CalibrationMethod::Analytic => analytic_from_sequences(&panel.sequences, level),
        CalibrationMethod::Bootstrap { replicates } => {
            spillover_bootstrap(&panel.sequences, replicates, boot_seed, level)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FprRow {
    pub transition: Transition,
    /// Replicates with a defined estimate that is not a structural zero.
    pub n_defined: usize,
    /// Replicates where both the observed and null probability are zero.
    pub n_structural_zero: usize,
    /// Defined replicates whose interval excludes zero.
    pub n_rejected: usize,
    /// From-state occupancy averaged over all replicates.
    pub mean_occupancy: f64,
}

impl FprRow {
    pub fn fpr(&self) -> Option<f64> {
        (self.n_defined > 0).then(|| self.n_rejected as f64 / self.n_defined as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FprTable {
    pub method: CiMethod,
    pub level: f64,
    pub replicates: usize,
    pub rows: Vec<FprRow>,
}

/// Per-transition false-positive rates over replicate reports.
pub fn tabulate(reports: &[SpilloverReport], method: CiMethod, level: f64) -> FprTable {
    let rows = Transition::all()
        .map(|tr| {
            let mut row = FprRow {
                transition: tr,
                n_defined: 0,
                n_structural_zero: 0,
                n_rejected: 0,
                mean_occupancy: 0.0,
            };
            let mut occupancy = 0u64;
            for e in reports.iter().filter_map(|r| r.get(tr.from, tr.to)) {
                occupancy += e.n_from;
                let Some(v) = e.value else { continue };
                if v.p_obs == 0.0 && v.p_null == 0.0 {
                    row.n_structural_zero += 1;
                    continue;
                }
                row.n_defined += 1;
                row.n_rejected += usize::from(v.significant());
            }
            if !reports.is_empty() {
                row.mean_occupancy = occupancy as f64 / reports.len() as f64;
            }
            row
        })
        .collect();
    FprTable {
        method,
        level,
        replicates: reports.len(),
        rows,
    }
}

/// Runs `replicates` uncoupled panels through the detector.
pub fn calibration_run(
    params: &CouplingParams,
    replicates: usize,
    method: CalibrationMethod,
    level: f64,
) -> Result<FprTable> {
    check_calibration(params, replicates)?;
    let reports = (0..replicates as u64)
        .map(|r| calibration_replicate(params, r, method, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(tabulate(&reports, method.ci_method(), level))
}

pub fn check_calibration(params: &CouplingParams, replicates: usize) -> Result<()> {
    params.validate()?;
    if params.beta_inst_to_cult != 0.0 || params.beta_cult_to_inst != 0.0 {
        return Err(Error::InvalidParams(
            "calibration requires both betas to be zero".to_string(),
        ));
    }
    if replicates == 0 {
        return Err(Error::InvalidParams(
            "calibration needs at least one replicate".to_string(),
        ));
    }
    Ok(())
}

/// Server-level generator. Traffic links evolve per dyad; every server
/// carries a High/Low level per governance category.
///
/// Institution to culture: traffic appearance gains `beta_inst_to_cult`
/// while the dyad's levels agree in `coupled`. Culture to institution: with
/// probability `beta_cult_to_inst` a server copies the `coupled` level of a
/// uniformly drawn traffic partner instead of its baseline flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerCouplingParams {
    pub n_servers: usize,
    pub n_windows: usize,
    pub traffic_appear: f64,
    pub traffic_vanish: f64,
    /// Low to High flip probability.
    pub level_up: f64,
    /// High to Low flip probability.
    pub level_down: f64,
    pub beta_inst_to_cult: f64,
    pub beta_cult_to_inst: f64,
    pub coupled: Governance,
    pub seed: u64,
}

impl Default for ServerCouplingParams {
    fn default() -> Self {
        ServerCouplingParams {
            n_servers: 200,
            n_windows: 18,
            traffic_appear: 0.005,
            traffic_vanish: 0.32,
            level_up: 0.15,
            level_down: 0.15,
            beta_inst_to_cult: 0.0,
            beta_cult_to_inst: 0.0,
            coupled: Governance::Admin,
            seed: 0,
        }
    }
}

impl ServerCouplingParams {
    pub fn validate(&self) -> Result<()> {
        check_prob("traffic_appear", self.traffic_appear)?;
        check_prob("traffic_vanish", self.traffic_vanish)?;
        check_prob("level_up", self.level_up)?;
        check_prob("level_down", self.level_down)?;
        check_finite("beta_inst_to_cult", self.beta_inst_to_cult)?;
        check_prob("beta_cult_to_inst", self.beta_cult_to_inst)?;
        if self.n_servers < 2 {
            return Err(Error::InvalidParams("n_servers must be >= 2".to_string()));
        }
        if self.n_windows < 2 {
            return Err(Error::InvalidParams("n_windows must be >= 2".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerPanel {
    pub n_servers: usize,
    pub n_windows: usize,
    /// `levels[window * n_servers + server][category]`.
    pub levels: Vec<[Level; 4]>,
    pub traffic: Vec<DyadSet>,
    pub clamped: bool,
}

impl ServerPanel {
    pub fn level(&self, window: usize, server: usize, category: Governance) -> Level {
        self.levels[window * self.n_servers + server][category.index()]
    }

    /// Match-mode rule layer implied by the levels.
    pub fn rule_links(&self, window: usize, category: Governance) -> DyadSet {
        let mut set = DyadSet::empty(self.n_servers);
        for d in 0..set.n_dyads() {
            let k = DyadKey::from_index(d);
            let same =
                self.level(window, k.low() as usize, category) == self.level(window, k.high() as usize, category);
            set.set_index(d, same);
        }
        set
    }
}

pub fn generate_server_panel(params: &ServerCouplingParams) -> Result<ServerPanel> {
    params.validate()?;
    let n = params.n_servers;
    let n_dyads = DyadKey::count(n);
    let mut rng = rng_for(params.seed, 0);
    let p_high = stationary(params.level_up, params.level_down);
    let p_traffic = stationary(params.traffic_appear, params.traffic_vanish);
    let coupled = params.coupled.index();

    let mut levels: Vec<[Level; 4]> = (0..n)
        .map(|_| {
            core::array::from_fn(|_| {
                if rng.random::<f64>() < p_high {
                    Level::High
                } else {
                    Level::Low
                }
            })
        })
        .collect();
    let mut traffic = DyadSet::empty(n);
    for d in 0..n_dyads {
        traffic.set_index(d, rng.random::<f64>() < p_traffic);
    }
    let shifted = params.traffic_appear + params.beta_inst_to_cult;
    let clamped = !(0.0..=1.0).contains(&shifted);

    let mut all_levels = levels.clone();
    let mut all_traffic = vec![traffic.clone()];
    let mut partners: Vec<Vec<u32>> = vec![Vec::new(); n];
    for _ in 1..params.n_windows {
        for p in partners.iter_mut() {
            p.clear();
        }
        for k in traffic.iter() {
            partners[k.low() as usize].push(k.high());
            partners[k.high() as usize].push(k.low());
        }
        let mut next_traffic = DyadSet::empty(n);
        for d in 0..n_dyads {
            let k = DyadKey::from_index(d);
            let u = rng.random::<f64>();
            let linked = if traffic.contains_index(d) {
                u >= params.traffic_vanish
            } else {
                let agree = levels[k.low() as usize][coupled] == levels[k.high() as usize][coupled];
                let p = params.traffic_appear + if agree { params.beta_inst_to_cult } else { 0.0 };
                u < p.clamp(0.0, 1.0)
            };
            next_traffic.set_index(d, linked);
        }
        let mut next_levels = levels.clone();
        for s in 0..n {
            for g in 0..4 {
                let current = levels[s][g];
                if g == coupled && params.beta_cult_to_inst > 0.0 {
                    let u = rng.random::<f64>();
                    let pick = rng.random_range(0..partners[s].len().max(1));
                    if u < params.beta_cult_to_inst {
                        if let Some(&j) = partners[s].get(pick) {
                            next_levels[s][g] = levels[j as usize][g];
                        }
                        continue;
                    }
                }
                let u = rng.random::<f64>();
                next_levels[s][g] = match current {
                    Level::Low if u < params.level_up => Level::High,
                    Level::High if u < params.level_down => Level::Low,
                    other => other,
                };
            }
        }
        levels = next_levels;
        traffic = next_traffic;
        all_levels.extend_from_slice(&levels);
        all_traffic.push(traffic.clone());
    }
    Ok(ServerPanel {
        n_servers: n,
        n_windows: params.n_windows,
        levels: all_levels,
        traffic: all_traffic,
        clamped,
    })
}

/// Raw records fabricated from a [`ServerPanel`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FabricatedLog {
    pub visits: Vec<VisitEvent>,
    pub plugins: Vec<PluginObservation>,
    /// Window spec under which the records reproduce the panel.
    pub window: WindowSpec,
    pub servers: Vec<String>,
}

pub fn server_name(s: usize) -> String {
    format!("srv{s:03}")
}

pub const PLUGINS_LOW: usize = 1;
pub const PLUGINS_HIGH: usize = 3;

/// Renders visits and plugin snapshots that reproduce the panel's layers
/// after filtering, aggregation and median splitting (positive traffic
/// support, match-mode rule links).
///
/// Every server has a resident user visiting each week. Per window, each
/// traffic-linked dyad shares three users and every other dyad one, so the
/// positive-support median is 1 as long as at most half the dyads are
/// linked. Low servers carry one plugin per category and High servers
/// three, so the rule median is 1 while at most half the servers are High;
/// otherwise the labels are swapped, which leaves match-mode links intact.
/// `decoys` extra servers fail one filter stage each.
pub fn fabricate_log(
    panel: &ServerPanel,
    calendar: &WeekCalendar,
    study_start_week: i64,
    weeks_per_window: u32,
    decoys: usize,
) -> Result<FabricatedLog> {
    let n = panel.n_servers;
    let n_dyads = DyadKey::count(n);
    for (w, t) in panel.traffic.iter().enumerate() {
        if 2 * t.len() > n_dyads {
            return Err(Error::Fabrication(format!(
                "window {w}: {} of {n_dyads} dyads linked; at most half can be represented",
                t.len()
            )));
        }
    }
    let window = WindowSpec {
        study_start_week,
        study_end_week: study_start_week + (panel.n_windows as i64) * i64::from(weeks_per_window) - 1,
        weeks_per_window,
    };
    window.validate()?;
    let names: Vec<String> = (0..n).map(server_name).collect();
    let mut visits = Vec::new();
    let mut plugins = Vec::new();
    let hour = 3600;

    for week in study_start_week..=window.study_end_week {
        let t = calendar.week_start(week) + hour;
        for name in &names {
            visits.push(VisitEvent::new(format!("res-{name}"), name.clone(), t)?);
        }
    }
    for w in 0..panel.n_windows {
        let first_week = *window.weeks_of(w as u32).start();
        let t0 = calendar.week_start(first_week) + 12 * hour;
        for d in 0..n_dyads {
            let k = DyadKey::from_index(d);
            let shared = if panel.traffic[w].contains_index(d) { 3 } else { 1 };
            for u in 0..shared {
                let user = format!("w{w}-{}-{}-{u}", k.low(), k.high());
                visits.push(VisitEvent::new(user.clone(), names[k.low() as usize].clone(), t0)?);
                visits.push(VisitEvent::new(user, names[k.high() as usize].clone(), t0 + hour)?);
            }
        }
        // A median split marks at most half the servers High. Match-mode
        // links only see the partition, so a High majority is written with
        // the labels swapped.
        let swap: [bool; 4] = core::array::from_fn(|g| {
            let high = (0..n)
                .filter(|&s| panel.level(w, s, Governance::ALL[g]) == Level::High)
                .count();
            2 * high > n
        });
        for (s, name) in names.iter().enumerate() {
            for g in Governance::ALL {
                let high = panel.level(w, s, g) == Level::High;
                let count = if high != swap[g.index()] {
                    PLUGINS_HIGH
                } else {
                    PLUGINS_LOW
                };
                for p in 0..count {
                    plugins.push(PluginObservation {
                        server_id: name.clone(),
                        plugin_id: format!("{g}-{p}"),
                        category: g.into(),
                        observed_week: first_week,
                    });
                }
            }
            plugins.push(PluginObservation {
                server_id: name.clone(),
                plugin_id: "worldgen".to_string(),
                category: Category::Other,
                observed_week: first_week,
            });
        }
    }

    for i in 0..decoys {
        let name = format!("decoy{i:02}");
        let plugin = |week| PluginObservation {
            server_id: name.clone(),
            plugin_id: "admin-0".to_string(),
            category: Category::Admin,
            observed_week: week,
        };
        let start = study_start_week;
        let end = window.study_end_week;
        match i % 4 {
            // Never visited.
            0 => plugins.push(plugin(start)),
            // A single week of activity.
            1 => {
                visits.push(VisitEvent::new(
                    format!("res-{name}"),
                    name.clone(),
                    calendar.week_start(start) + hour,
                )?);
                plugins.push(plugin(start));
            }
            // Live throughout, no plugin information.
            2 => {
                for week in start..=end {
                    visits.push(VisitEvent::new(
                        format!("res-{name}"),
                        name.clone(),
                        calendar.week_start(week) + hour,
                    )?);
                }
            }
            // Long-lived but visited in only three weeks.
            _ => {
                for week in [start, (start + end) / 2, end] {
                    visits.push(VisitEvent::new(
                        format!("res-{name}"),
                        name.clone(),
                        calendar.week_start(week) + hour,
                    )?);
                }
                plugins.push(plugin(start));
            }
        }
    }

    Ok(FabricatedLog {
        visits,
        plugins,
        window,
        servers: names,
    })
}
