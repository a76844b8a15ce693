//! Per-window construction of the dichotomized traffic layer and the four
//! rule-similarity layers over all server dyads.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::dyadset::DyadSet;
use crate::error::{Error, Result};
use crate::ingest::{Governance, PanelDataset};

/// Sorted, duplicate-free set of server ids. Servers are addressed by their
/// position in this order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Universe {
    names: Vec<String>,
}

impl Universe {
    pub fn new(names: BTreeSet<String>) -> Self {
        Universe {
            names: names.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub fn name(&self, index: u32) -> &str {
        &self.names[index as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_dyads(&self) -> usize {
        DyadKey::count(self.len())
    }
}

/// Unordered server pair, stored as universe indices with `low < high`.
///
/// Dyads are enumerated column-wise: `index = high * (high - 1) / 2 + low`.
/// The enumeration does not depend on the universe size, and `Ord` follows
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadKey {
    low: u32,
    high: u32,
}

impl DyadKey {
    /// Canonicalizes the pair; `None` for a self-pair.
    pub fn new(a: u32, b: u32) -> Option<Self> {
        match a.cmp(&b) {
            Ordering::Less => Some(DyadKey { low: a, high: b }),
            Ordering::Greater => Some(DyadKey { low: b, high: a }),
            Ordering::Equal => None,
        }
    }

    pub fn low(self) -> u32 {
        self.low
    }

    pub fn high(self) -> u32 {
        self.high
    }

    pub fn index(self) -> usize {
        let h = self.high as usize;
        h * (h - 1) / 2 + self.low as usize
    }

    pub fn from_index(index: usize) -> Self {
        // Largest h with h(h-1)/2 <= index.
        let mut h = ((1.0 + libm::sqrt(1.0 + 8.0 * index as f64)) / 2.0) as usize;
        while h * (h - 1) / 2 > index {
            h -= 1;
        }
        while (h + 1) * h / 2 <= index {
            h += 1;
        }
        DyadKey {
            low: (index - h * (h - 1) / 2) as u32,
            high: h as u32,
        }
    }

    /// Number of dyads over `n` servers.
    pub fn count(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }
}

impl Ord for DyadKey {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.high, self.low).cmp(&(other.high, other.low))
    }
}

impl PartialOrd for DyadKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayerId {
    Traffic,
    Rule(Governance),
}

impl LayerId {
    pub const ALL: [LayerId; 5] = [
        LayerId::Traffic,
        LayerId::Rule(Governance::Admin),
        LayerId::Rule(Governance::Communication),
        LayerId::Rule(Governance::Economy),
        LayerId::Rule(Governance::Information),
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerId::Traffic => "traffic",
            LayerId::Rule(g) => g.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<LayerId> {
        LayerId::ALL.into_iter().find(|l| l.name() == name)
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One layer's link set at one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSnapshot {
    pub layer: LayerId,
    pub window: u32,
    pub universe: Arc<Universe>,
    pub links: DyadSet,
}

impl LayerSnapshot {
    pub fn empty(layer: LayerId, window: u32, universe: Arc<Universe>) -> Self {
        let links = DyadSet::empty(universe.len());
        LayerSnapshot {
            layer,
            window,
            universe,
            links,
        }
    }

    pub fn has_link(&self, dyad: DyadKey) -> bool {
        self.links.contains(dyad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MedianSupport {
    /// Median over strictly positive values; non-positive values are Low.
    #[default]
    Positive,
    All,
}

impl MedianSupport {
    pub fn name(self) -> &'static str {
        match self {
            MedianSupport::Positive => "positive",
            MedianSupport::All => "all",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "positive" => Some(MedianSupport::Positive),
            "all" => Some(MedianSupport::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RuleLinkMode {
    /// Linked when both dummies agree (High-High or Low-Low).
    #[default]
    Match,
    /// Linked only when both dummies are High.
    BothHigh,
}

impl RuleLinkMode {
    pub fn name(self) -> &'static str {
        match self {
            RuleLinkMode::Match => "match",
            RuleLinkMode::BothHigh => "both_high",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "match" => Some(RuleLinkMode::Match),
            "both_high" => Some(RuleLinkMode::BothHigh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianSplit<K> {
    pub median: f64,
    pub levels: BTreeMap<K, Level>,
}

impl<K: Ord> MedianSplit<K> {
    pub fn high(&self) -> impl Iterator<Item = &K> {
        self.levels.iter().filter(|(_, l)| **l == Level::High).map(|(k, _)| k)
    }
}

/// Median of the values in `support`; the mean of the two middle values
/// for an even count.
pub fn support_median(values: impl Iterator<Item = f64>, support: MedianSupport) -> Result<f64> {
    let mut kept: Vec<f64> = match support {
        MedianSupport::Positive => values.filter(|v| *v > 0.0).collect(),
        MedianSupport::All => values.collect(),
    };
    if kept.is_empty() {
        return Err(Error::EmptySupport);
    }
    kept.sort_unstable_by(f64::total_cmp);
    let m = kept.len() / 2;
    Ok(if kept.len() % 2 == 1 {
        kept[m]
    } else {
        kept[m - 1] / 2.0 + kept[m] / 2.0
    })
}

/// Splits values at their median: High iff strictly above it.
pub fn median_split<K: Ord + Clone>(values: &BTreeMap<K, f64>, support: MedianSupport) -> Result<MedianSplit<K>> {
    let median = support_median(values.values().copied(), support)?;
    let levels = values
        .iter()
        .map(|(k, &v)| (k.clone(), if v > median { Level::High } else { Level::Low }))
        .collect();
    Ok(MedianSplit { median, levels })
}

/// Number of distinct users shared by each dyad in `window`. Dyads with no
/// shared user are omitted.
pub fn shared_membership_weights(panel: &PanelDataset, window: u32) -> Result<BTreeMap<DyadKey, u32>> {
    panel.window_position(window).ok_or(Error::UnknownWindow(window))?;
    let mut by_user: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for ((w, server), users) in panel.visitor_sets() {
        if w != window {
            continue;
        }
        for u in users {
            by_user.entry(u.as_str()).or_default().push(server);
        }
    }
    let mut weights = BTreeMap::new();
    for servers in by_user.values() {
        for (i, &a) in servers.iter().enumerate() {
            for &b in &servers[i + 1..] {
                if let Some(d) = DyadKey::new(a, b) {
                    *weights.entry(d).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(weights)
}

/// Result of building one layer, with the median used for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBuild {
    pub snapshot: LayerSnapshot,
    /// `None` when the support was empty (degenerate window).
    pub median: Option<f64>,
}

/// Traffic layer: dyads whose shared-membership weight is strictly above
/// the median. Zero-weight dyads belong to the support only under
/// [`MedianSupport::All`].
pub fn build_traffic_layer(panel: &PanelDataset, window: u32, support: MedianSupport) -> Result<LayerBuild> {
    let weights = shared_membership_weights(panel, window)?;
    let universe = panel.servers().clone();
    let n_dyads = universe.n_dyads();
    let zeros = n_dyads - weights.len();
    let values = weights
        .values()
        .map(|&w| f64::from(w))
        .chain(core::iter::repeat_n(0.0, zeros));
    let mut snapshot = LayerSnapshot::empty(LayerId::Traffic, window, universe);
    let median = match support_median(values, support) {
        Ok(m) => m,
        Err(Error::EmptySupport) => return Ok(LayerBuild { snapshot, median: None }),
        Err(e) => return Err(e),
    };
    for (d, &w) in &weights {
        if f64::from(w) > median {
            snapshot.links.insert(*d);
        }
    }
    Ok(LayerBuild {
        snapshot,
        median: Some(median),
    })
}

/// High/Low rule dummies for one category and window, indexed by server.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleDummies {
    pub category: Governance,
    pub window: u32,
    pub median: f64,
    pub universe: Arc<Universe>,
    pub levels: Vec<Level>,
}

impl RuleDummies {
    pub fn n_high(&self) -> usize {
        self.levels.iter().filter(|l| **l == Level::High).count()
    }
}

/// Median split of rule counts over all servers.
pub fn build_rule_dummies(panel: &PanelDataset, window: u32, category: Governance) -> Result<RuleDummies> {
    panel.window_position(window).ok_or(Error::UnknownWindow(window))?;
    let n = panel.servers().len() as u32;
    let counts: Vec<f64> = (0..n)
        .map(|s| f64::from(panel.rule_count(window, s, category).unwrap_or(0)))
        .collect();
    let median = support_median(counts.iter().copied(), MedianSupport::All)?;
    let levels = counts
        .iter()
        .map(|&c| if c > median { Level::High } else { Level::Low })
        .collect();
    Ok(RuleDummies {
        category,
        window,
        median,
        universe: panel.servers().clone(),
        levels,
    })
}

pub fn build_rule_layer(dummies: &RuleDummies, mode: RuleLinkMode) -> LayerSnapshot {
    let mut snapshot = LayerSnapshot::empty(
        LayerId::Rule(dummies.category),
        dummies.window,
        dummies.universe.clone(),
    );
    let levels = &dummies.levels;
    for high in 1..levels.len() {
        for low in 0..high {
            let linked = match mode {
                RuleLinkMode::Match => levels[low] == levels[high],
                RuleLinkMode::BothHigh => levels[low] == Level::High && levels[high] == Level::High,
            };
            if linked {
                let d = DyadKey {
                    low: low as u32,
                    high: high as u32,
                };
                snapshot.links.set_index(d.index(), true);
            }
        }
    }
    snapshot
}
