//! Run configuration: one TOML file, command-line flags override it, and
//! every key has a default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spillover_core::synth::{CouplingParams, ServerCouplingParams};
use spillover_core::{
    Category, CategoryMap, CiMethod, FilterCriteria, Governance, MedianSupport, RuleLinkMode, WeekCalendar, WindowSpec,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Week 1 starts on the Monday of ISO week 1 of this year.
    pub study_year: i32,
    pub study_start_week: i64,
    pub study_end_week: i64,
    pub weeks_per_window: u32,
}

impl Default for WindowSection {
    fn default() -> Self {
        let w = WindowSpec::default();
        WindowSection {
            study_year: 2016,
            study_start_week: w.study_start_week,
            study_end_week: w.study_end_week,
            weeks_per_window: w.weeks_per_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub min_live_weeks: u32,
    pub min_survival_weeks: u32,
    pub require_governance_info: bool,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterCriteria::default();
        FilterSection {
            min_live_weeks: f.min_live_weeks,
            min_survival_weeks: f.min_survival_weeks,
            require_governance_info: f.require_governance_info,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// `match` or `both_high`.
    pub rule_link_mode: String,
    /// `positive` or `all`.
    pub median_support: String,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            rule_link_mode: RuleLinkMode::Match.name().to_string(),
            median_support: MedianSupport::Positive.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// `analytic` or `bootstrap`.
    pub ci_method: String,
    pub level: f64,
    pub bootstrap_replicates: usize,
    pub seed: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            ci_method: CiMethod::Analytic.name().to_string(),
            level: 0.99,
            bootstrap_replicates: 1000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_dyads: usize,
    pub n_windows: usize,
    pub rule_appear: f64,
    pub rule_vanish: f64,
    pub traffic_appear: f64,
    pub traffic_vanish: f64,
    pub beta_inst_to_cult: f64,
    pub beta_cult_to_inst: f64,
    pub seed: u64,
    pub category: String,
    /// Server-level generator used for fabricated raw logs.
    pub n_servers: usize,
    pub server_traffic_appear: f64,
    pub server_traffic_vanish: f64,
    pub level_up: f64,
    pub level_down: f64,
    pub decoys: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let d = CouplingParams::default();
        let s = ServerCouplingParams::default();
        SimulateSection {
            n_dyads: d.n_dyads,
            n_windows: d.n_windows,
            rule_appear: d.rule_appear,
            rule_vanish: d.rule_vanish,
            traffic_appear: d.traffic_appear,
            traffic_vanish: d.traffic_vanish,
            beta_inst_to_cult: 0.0,
            beta_cult_to_inst: 0.0,
            seed: 0,
            category: Governance::Admin.name().to_string(),
            n_servers: s.n_servers,
            server_traffic_appear: s.traffic_appear,
            server_traffic_vanish: s.traffic_vanish,
            level_up: s.level_up,
            level_down: s.level_down,
            decoys: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window: WindowSection,
    pub filter: FilterSection,
    pub network: NetworkSection,
    pub analysis: AnalysisSection,
    pub simulate: SimulateSection,
    /// Extra raw category strings, e.g. `antiCheat = "admin"`. Merged over
    /// the built-in table.
    pub categories: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.window_spec().validate()?;
        self.rule_link_mode()?;
        self.median_support()?;
        self.ci_method()?;
        self.category_map()?;
        if !(self.analysis.level > 0.0 && self.analysis.level < 1.0) {
            return Err(Error::Config(format!(
                "analysis.level = {} must lie in (0, 1)",
                self.analysis.level
            )));
        }
        Governance::from_name(&self.simulate.category)
            .ok_or_else(|| Error::Config(format!("unknown simulate.category {:?}", self.simulate.category)))?;
        Ok(())
    }

    pub fn calendar(&self) -> WeekCalendar {
        WeekCalendar::iso_year(self.window.study_year)
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            study_start_week: self.window.study_start_week,
            study_end_week: self.window.study_end_week,
            weeks_per_window: self.window.weeks_per_window,
        }
    }

    pub fn filter_criteria(&self) -> FilterCriteria {
        FilterCriteria {
            min_live_weeks: self.filter.min_live_weeks,
            require_governance_info: self.filter.require_governance_info,
            min_survival_weeks: self.filter.min_survival_weeks,
        }
    }

    pub fn rule_link_mode(&self) -> Result<RuleLinkMode> {
        RuleLinkMode::from_name(&self.network.rule_link_mode)
            .ok_or_else(|| Error::Config(format!("unknown rule_link_mode {:?}", self.network.rule_link_mode)))
    }

    pub fn median_support(&self) -> Result<MedianSupport> {
        MedianSupport::from_name(&self.network.median_support)
            .ok_or_else(|| Error::Config(format!("unknown median_support {:?}", self.network.median_support)))
    }

    pub fn ci_method(&self) -> Result<CiMethod> {
        CiMethod::from_name(&self.analysis.ci_method)
            .ok_or_else(|| Error::Config(format!("unknown ci_method {:?}", self.analysis.ci_method)))
    }

    pub fn category_map(&self) -> Result<CategoryMap> {
        let mut map = CategoryMap::default();
        for (raw, name) in &self.categories {
            let cat = Category::from_name(name)
                .ok_or_else(|| Error::Config(format!("category {raw:?} maps to unknown {name:?}")))?;
            map.insert(raw, cat);
        }
        Ok(map)
    }

    pub fn coupling_params(&self) -> Result<CouplingParams> {
        let s = &self.simulate;
        Ok(CouplingParams {
            n_dyads: s.n_dyads,
            n_windows: s.n_windows,
            rule_appear: s.rule_appear,
            rule_vanish: s.rule_vanish,
            traffic_appear: s.traffic_appear,
            traffic_vanish: s.traffic_vanish,
            beta_inst_to_cult: s.beta_inst_to_cult,
            beta_cult_to_inst: s.beta_cult_to_inst,
            seed: s.seed,
            category: Governance::from_name(&s.category)
                .ok_or_else(|| Error::Config(format!("unknown simulate.category {:?}", s.category)))?,
        })
    }

    pub fn server_params(&self) -> Result<ServerCouplingParams> {
        let s = &self.simulate;
        Ok(ServerCouplingParams {
            n_servers: s.n_servers,
            n_windows: s.n_windows,
            traffic_appear: s.server_traffic_appear,
            traffic_vanish: s.server_traffic_vanish,
            level_up: s.level_up,
            level_down: s.level_down,
            beta_inst_to_cult: s.beta_inst_to_cult,
            beta_cult_to_inst: s.beta_cult_to_inst,
            coupled: self.coupling_params()?.category,
            seed: s.seed,
        })
    }
}
