//! Server eligibility filtering and windowed panel aggregation.
//!
//! Parsing lives in the `spillover` crate; everything here works on
//! in-memory records and is deterministic in the order of its inputs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::netbuild::Universe;

pub const SECONDS_PER_WEEK: i64 = 7 * 86_400;

/// Plugin category as reported by the plugin log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Admin,
    Communication,
    Economy,
    Information,
    Other,
}

impl Category {
    pub fn governance(self) -> Option<Governance> {
        match self {
            Category::Admin => Some(Governance::Admin),
            Category::Communication => Some(Governance::Communication),
            Category::Economy => Some(Governance::Economy),
            Category::Information => Some(Governance::Information),
            Category::Other => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self.governance() {
            Some(g) => g.name(),
            None => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        if name.eq_ignore_ascii_case("other") {
            return Some(Category::Other);
        }
        Governance::from_name(name).map(Category::from)
    }
}

impl From<Governance> for Category {
    fn from(g: Governance) -> Self {
        match g {
            Governance::Admin => Category::Admin,
            Governance::Communication => Category::Communication,
            Governance::Economy => Category::Economy,
            Governance::Information => Category::Information,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four governance categories that define rule layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Governance {
    Admin,
    Communication,
    Economy,
    Information,
}

impl Governance {
    pub const ALL: [Governance; 4] = [
        Governance::Admin,
        Governance::Communication,
        Governance::Economy,
        Governance::Information,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Governance::Admin => "admin",
            Governance::Communication => "communication",
            Governance::Economy => "economy",
            Governance::Information => "information",
        }
    }

    pub fn from_name(name: &str) -> Option<Governance> {
        Governance::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Governance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps raw category strings from the plugin log onto [`Category`].
/// Keys are matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    entries: BTreeMap<String, Category>,
}

impl Default for CategoryMap {
    fn default() -> Self {
        let mut map = CategoryMap {
            entries: BTreeMap::new(),
        };
        for (raw, cat) in [
            ("admin", Category::Admin),
            ("administration", Category::Admin),
            ("communication", Category::Communication),
            ("chat", Category::Communication),
            ("economy", Category::Economy),
            ("information", Category::Information),
            ("informational", Category::Information),
            ("other", Category::Other),
        ] {
            map.insert(raw, cat);
        }
        map
    }
}

impl CategoryMap {
    pub fn empty() -> Self {
        CategoryMap {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, raw: &str, category: Category) {
        self.entries.insert(raw.trim().to_ascii_lowercase(), category);
    }

    /// Returns the mapped category, or `None` for strings absent from the
    /// table (callers map those to [`Category::Other`] and count a warning).
    pub fn lookup(&self, raw: &str) -> Option<Category> {
        self.entries.get(&raw.trim().to_ascii_lowercase()).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Category)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VisitEvent {
    pub user_id: String,
    pub server_id: String,
    /// Unix seconds, UTC.
    pub timestamp: i64,
}

impl VisitEvent {
    pub fn new(user_id: impl Into<String>, server_id: impl Into<String>, timestamp: i64) -> Result<Self> {
        let (user_id, server_id) = (user_id.into(), server_id.into());
        if user_id.is_empty() || server_id.is_empty() {
            return Err(Error::InvalidRecord("empty user or server id".to_string()));
        }
        Ok(VisitEvent {
            user_id,
            server_id,
            timestamp,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PluginObservation {
    pub server_id: String,
    pub plugin_id: String,
    pub category: Category,
    pub observed_week: i64,
}

/// Maps instants to week indices. Week 1 starts at `origin` and weeks are
/// seven days long, so for [`WeekCalendar::iso_year`] the index equals the
/// ISO week number throughout that year and keeps counting past its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeekCalendar {
    origin: i64,
}

impl WeekCalendar {
    pub fn with_origin(origin_unix: i64) -> Self {
        WeekCalendar { origin: origin_unix }
    }

    /// Calendar anchored at Monday 00:00 UTC of ISO week 1 of `year`.
    pub fn iso_year(year: i32) -> Self {
        let jan4 = days_from_civil(year, 1, 4);
        // 1970-01-01 was a Thursday; ISO weekday 1 = Monday.
        let weekday = (jan4 + 3).rem_euclid(7);
        WeekCalendar {
            origin: (jan4 - weekday) * 86_400,
        }
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn week_of(&self, timestamp: i64) -> i64 {
        (timestamp - self.origin).div_euclid(SECONDS_PER_WEEK) + 1
    }

    /// First second of `week`.
    pub fn week_start(&self, week: i64) -> i64 {
        self.origin + (week - 1) * SECONDS_PER_WEEK
    }
}

impl Default for WeekCalendar {
    fn default() -> Self {
        WeekCalendar::iso_year(2016)
    }
}

// Days since 1970-01-01 for a proleptic Gregorian date.
fn days_from_civil(year: i32, month: u32, day: u32) -> i64 {
    let y = i64::from(year) - i64::from(month <= 2);
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let m = i64::from(month);
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + i64::from(day) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Study span in week indices and its partition into windows. A partial
/// trailing window is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub study_start_week: i64,
    pub study_end_week: i64,
    pub weeks_per_window: u32,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            study_start_week: 5,
            study_end_week: 22,
            weeks_per_window: 4,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weeks_per_window == 0 {
            return Err(Error::InvalidWindow("weeks_per_window must be >= 1".to_string()));
        }
        if self.study_end_week < self.study_start_week {
            return Err(Error::InvalidWindow(format!(
                "study_end_week {} precedes study_start_week {}",
                self.study_end_week, self.study_start_week
            )));
        }
        if self.n_windows() == 0 {
            return Err(Error::InvalidWindow(format!(
                "span of {} weeks is shorter than one window",
                self.span_weeks()
            )));
        }
        Ok(())
    }

    pub fn span_weeks(&self) -> i64 {
        self.study_end_week - self.study_start_week + 1
    }

    pub fn n_windows(&self) -> u32 {
        (self.span_weeks().max(0) / i64::from(self.weeks_per_window.max(1))) as u32
    }

    pub fn windows(&self) -> core::ops::Range<u32> {
        0..self.n_windows()
    }

    /// Last week covered by a complete window.
    pub fn last_windowed_week(&self) -> i64 {
        self.study_start_week + i64::from(self.n_windows()) * i64::from(self.weeks_per_window) - 1
    }

    pub fn in_span(&self, week: i64) -> bool {
        (self.study_start_week..=self.study_end_week).contains(&week)
    }

    pub fn window_of_week(&self, week: i64) -> Option<u32> {
        if week < self.study_start_week || week > self.last_windowed_week() {
            return None;
        }
        Some(((week - self.study_start_week) / i64::from(self.weeks_per_window)) as u32)
    }

    pub fn weeks_of(&self, window: u32) -> RangeInclusive<i64> {
        let k = i64::from(self.weeks_per_window);
        let start = self.study_start_week + i64::from(window) * k;
        start..=start + k - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterCriteria {
    pub min_live_weeks: u32,
    pub require_governance_info: bool,
    pub min_survival_weeks: u32,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        FilterCriteria {
            min_live_weeks: 16,
            require_governance_info: true,
            min_survival_weeks: 4,
        }
    }
}

/// Filter stages in the order they are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FilterStage {
    /// No visit event at all during collection.
    Disconnected,
    /// First-to-last visit span shorter than `min_survival_weeks`.
    ShortLived,
    /// No plugin observation at all (when governance info is required).
    MissingGovernanceInfo,
    /// Fewer than `min_live_weeks` distinct visited weeks inside the span.
    InsufficientLiveWeeks,
}

impl FilterStage {
    pub const ALL: [FilterStage; 4] = [
        FilterStage::Disconnected,
        FilterStage::ShortLived,
        FilterStage::MissingGovernanceInfo,
        FilterStage::InsufficientLiveWeeks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterStage::Disconnected => "disconnected",
            FilterStage::ShortLived => "short_lived",
            FilterStage::MissingGovernanceInfo => "missing_governance_info",
            FilterStage::InsufficientLiveWeeks => "insufficient_live_weeks",
        }
    }

    pub fn from_name(name: &str) -> Option<FilterStage> {
        FilterStage::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Servers removed at each filter stage.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterTrace {
    pub input: usize,
    pub removed: Vec<(FilterStage, Vec<String>)>,
}

impl FilterTrace {
    /// Servers remaining after each stage, in stage order.
    pub fn remaining(&self) -> Vec<usize> {
        let mut left = self.input;
        self.removed
            .iter()
            .map(|(_, r)| {
                left -= r.len();
                left
            })
            .collect()
    }

    pub fn eligible(&self) -> usize {
        self.input - self.removed.iter().map(|(_, r)| r.len()).sum::<usize>()
    }
}

#[derive(Default)]
struct ServerActivity {
    first: Option<i64>,
    last: Option<i64>,
    live_weeks: BTreeSet<i64>,
    plugins: usize,
}

/// Applies the eligibility funnel. The input universe is every server named
/// in either stream.
pub fn filter_servers(
    events: &[VisitEvent],
    plugins: &[PluginObservation],
    criteria: &FilterCriteria,
    window: &WindowSpec,
    calendar: &WeekCalendar,
) -> Result<(BTreeSet<String>, FilterTrace)> {
    window.validate()?;
    let mut activity: BTreeMap<&str, ServerActivity> = BTreeMap::new();
    for e in events {
        let a = activity.entry(e.server_id.as_str()).or_default();
        a.first = Some(a.first.map_or(e.timestamp, |f| f.min(e.timestamp)));
        a.last = Some(a.last.map_or(e.timestamp, |l| l.max(e.timestamp)));
        let week = calendar.week_of(e.timestamp);
        if window.in_span(week) {
            a.live_weeks.insert(week);
        }
    }
    for p in plugins {
        activity.entry(p.server_id.as_str()).or_default().plugins += 1;
    }

    let mut trace = FilterTrace {
        input: activity.len(),
        removed: FilterStage::ALL.iter().map(|&s| (s, Vec::new())).collect(),
    };
    let mut eligible = BTreeSet::new();
    for (server, a) in &activity {
        let stage = match (a.first, a.last) {
            (None, _) | (_, None) => Some(FilterStage::Disconnected),
            (Some(first), Some(last)) => {
                let span = calendar.week_of(last) - calendar.week_of(first) + 1;
                if span < i64::from(criteria.min_survival_weeks) {
                    Some(FilterStage::ShortLived)
                } else if criteria.require_governance_info && a.plugins == 0 {
                    Some(FilterStage::MissingGovernanceInfo)
                } else if a.live_weeks.len() < criteria.min_live_weeks as usize {
                    Some(FilterStage::InsufficientLiveWeeks)
                } else {
                    None
                }
            }
        };
        match stage {
            Some(stage) => trace.removed[stage as usize].1.push((*server).to_string()),
            None => {
                eligible.insert((*server).to_string());
            }
        }
    }
    Ok((eligible, trace))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PanelWarning {
    /// No visits on any server during the window.
    EmptyWindow(u32),
    /// No plugin snapshot at or before the window; counts default to zero.
    NoPluginHistory { window: u32, server: String },
}

impl fmt::Display for PanelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PanelWarning::EmptyWindow(w) => write!(f, "window {w} has no visits on any server"),
            PanelWarning::NoPluginHistory { window, server } => write!(
                f,
                "server {server} has no plugin snapshot at or before window {window}; rule counts set to 0"
            ),
        }
    }
}

/// Per-window, per-server aggregates over the eligible servers. Immutable
/// after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelDataset {
    windows: Vec<u32>,
    servers: Arc<Universe>,
    visitors: BTreeMap<(u32, u32), BTreeSet<String>>,
    // window position * n_servers + server index
    rule_counts: Vec<[u32; 4]>,
}

impl PanelDataset {
    /// Assembles a panel from keyed parts, validating the cross references.
    /// Every `(window, server, category)` must have a rule count.
    pub fn from_parts(
        windows: Vec<u32>,
        servers: BTreeSet<String>,
        visitors: BTreeMap<(u32, String), BTreeSet<String>>,
        rule_counts: BTreeMap<(u32, String, Governance), u32>,
    ) -> Result<Self> {
        if windows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InconsistentPanel(
                "windows must be strictly increasing".to_string(),
            ));
        }
        let universe = Arc::new(Universe::new(servers));
        let n = universe.len();
        let mut vis = BTreeMap::new();
        for ((w, s), users) in visitors {
            if windows.binary_search(&w).is_err() {
                return Err(Error::InconsistentPanel(format!("visitor window {w} not in panel")));
            }
            let idx = universe
                .index_of(&s)
                .ok_or_else(|| Error::InconsistentPanel(format!("visitor server {s} not in panel")))?;
            if !users.is_empty() {
                vis.insert((w, idx), users);
            }
        }
        let mut counts = alloc::vec![[u32::MAX; 4]; windows.len() * n];
        for ((w, s, g), c) in rule_counts {
            let pos = windows
                .binary_search(&w)
                .map_err(|_| Error::InconsistentPanel(format!("rule count window {w} not in panel")))?;
            let idx = universe
                .index_of(&s)
                .ok_or_else(|| Error::InconsistentPanel(format!("rule count server {s} not in panel")))?;
            counts[pos * n + idx as usize][g.index()] = c;
        }
        if counts.iter().flatten().any(|&c| c == u32::MAX) {
            return Err(Error::InconsistentPanel(
                "rule counts missing for some (window, server, category)".to_string(),
            ));
        }
        Ok(PanelDataset {
            windows,
            servers: universe,
            visitors: vis,
            rule_counts: counts,
        })
    }

    pub fn windows(&self) -> &[u32] {
        &self.windows
    }

    pub fn servers(&self) -> &Arc<Universe> {
        &self.servers
    }

    pub fn window_position(&self, window: u32) -> Option<usize> {
        self.windows.binary_search(&window).ok()
    }

    pub fn visitors(&self, window: u32, server: u32) -> Option<&BTreeSet<String>> {
        self.visitors.get(&(window, server))
    }

    /// Non-empty visitor sets keyed by `(window, server index)`.
    pub fn visitor_sets(&self) -> impl Iterator<Item = ((u32, u32), &BTreeSet<String>)> {
        self.visitors.iter().map(|(k, v)| (*k, v))
    }

    pub fn rule_count(&self, window: u32, server: u32, category: Governance) -> Option<u32> {
        let pos = self.window_position(window)?;
        let n = self.servers.len();
        if server as usize >= n {
            return None;
        }
        Some(self.rule_counts[pos * n + server as usize][category.index()])
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty() || self.servers.is_empty()
    }
}

/// Aggregates visits and plugin snapshots into windows for the eligible
/// servers.
///
/// Rule counts are distinct plugin ids per category over all observations
/// of the server inside the window. A window without observations inherits
/// the previous window's counts; the first window inherits the latest
/// weekly snapshot before the span, or zero when there is none.
pub fn build_panel(
    events: &[VisitEvent],
    plugins: &[PluginObservation],
    eligible: &BTreeSet<String>,
    window: &WindowSpec,
    calendar: &WeekCalendar,
) -> Result<(PanelDataset, Vec<PanelWarning>)> {
    window.validate()?;
    if eligible.is_empty() {
        return Err(Error::NoEligibleServers);
    }
    let universe = Arc::new(Universe::new(eligible.iter().cloned().collect()));
    let n = universe.len();
    let windows: Vec<u32> = window.windows().collect();
    let mut warnings = Vec::new();

    let mut visitors: BTreeMap<(u32, u32), BTreeSet<String>> = BTreeMap::new();
    for e in events {
        let Some(idx) = universe.index_of(&e.server_id) else {
            continue;
        };
        let Some(w) = window.window_of_week(calendar.week_of(e.timestamp)) else {
            continue;
        };
        visitors.entry((w, idx)).or_default().insert(e.user_id.clone());
    }
    for &w in &windows {
        if visitors.range((w, 0)..(w + 1, 0)).next().is_none() {
            warnings.push(PanelWarning::EmptyWindow(w));
        }
    }

    // Per server: week -> category -> distinct plugin ids.
    type Snapshot<'a> = [BTreeSet<&'a str>; 4];
    let mut by_server: Vec<BTreeMap<i64, Snapshot<'_>>> = alloc::vec![BTreeMap::new(); n];
    for p in plugins {
        let (Some(idx), Some(g)) = (universe.index_of(&p.server_id), p.category.governance()) else {
            continue;
        };
        if p.observed_week > window.last_windowed_week() {
            continue;
        }
        by_server[idx as usize].entry(p.observed_week).or_default()[g.index()].insert(p.plugin_id.as_str());
    }
    // Servers observed only with "Other" plugins still have a snapshot.
    for p in plugins {
        if let (Some(idx), None) = (universe.index_of(&p.server_id), p.category.governance()) {
            if p.observed_week <= window.last_windowed_week() {
                by_server[idx as usize].entry(p.observed_week).or_default();
            }
        }
    }

    let counts_of = |snaps: &mut dyn Iterator<Item = &Snapshot<'_>>| -> [u32; 4] {
        let mut union: [BTreeSet<&str>; 4] = Default::default();
        for s in snaps {
            for g in 0..4 {
                union[g].extend(s[g].iter().copied());
            }
        }
        union.map(|u| u.len() as u32)
    };

    let mut rule_counts = alloc::vec![[0u32; 4]; windows.len() * n];
    for (idx, weeks) in by_server.iter().enumerate() {
        let mut prev: Option<[u32; 4]> = weeks
            .range(..window.study_start_week)
            .next_back()
            .map(|(_, s)| counts_of(&mut core::iter::once(s)));
        for (pos, &w) in windows.iter().enumerate() {
            let mut in_window = weeks.range(window.weeks_of(w)).map(|(_, s)| s).peekable();
            let counts = if in_window.peek().is_some() {
                counts_of(&mut in_window)
            } else if let Some(c) = prev {
                c
            } else {
                warnings.push(PanelWarning::NoPluginHistory {
                    window: w,
                    server: universe.name(idx as u32).to_string(),
                });
                [0; 4]
            };
            rule_counts[pos * n + idx] = counts;
            prev = Some(counts);
        }
    }

    warnings.sort();
    Ok((
        PanelDataset {
            windows,
            servers: universe,
            visitors,
            rule_counts,
        },
        warnings,
    ))
}
