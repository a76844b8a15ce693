//! Spillover detection for co-evolving link layers of a temporal multiplex
//! network.
//!
//! The crate is `no_std` (with `alloc`). It covers the algorithmic pipeline
//! end to end:
//!
//! * [`ingest`]: server eligibility filtering and windowed panel aggregation
//!   over in-memory visit and plugin records.
//! * [`netbuild`]: median-split dichotomization into one traffic layer and
//!   four rule-similarity layers over all server dyads.
//! * [`markov`]: joint-state encoding, transition counting, observed and
//!   independent-layer null transition matrices.
//! * [`spillover`]: observed minus null differences with analytic or
//!   dyad-bootstrap confidence intervals.
//! * [`taxonomy`]: fast/slow/irrelevant transition labels and directional
//!   verdicts.
//! * [`synth`]: seeded generators with injectable cross-layer coupling.
//!
//! File formats, parallel drivers and the command line live in the
//! `spillover` crate.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod ingest;
pub mod markov;
pub mod netbuild;
pub mod seed;
pub mod spillover;
pub mod stats;
pub mod synth;
pub mod taxonomy;

mod dyadset;

pub use dyadset::DyadSet;
pub use error::{Error, Result};
pub use ingest::{
    build_panel, filter_servers, Category, CategoryMap, FilterCriteria, FilterStage, FilterTrace, Governance,
    PanelDataset, PanelWarning, PluginObservation, VisitEvent, WeekCalendar, WindowSpec,
};
pub use markov::{
    count_transitions, encode_sequences, marginal_chains, null_matrix, observed_matrix, JointState, MarginalChain,
    ProbMatrix, SequenceSet, TransitionTable,
};
pub use netbuild::{
    build_rule_dummies, build_rule_layer, build_traffic_layer, median_split, shared_membership_weights, DyadKey,
    LayerId, LayerSnapshot, Level, MedianSplit, MedianSupport, RuleDummies, RuleLinkMode, Universe,
};
pub use spillover::{
    spillover_analytic, spillover_bootstrap, BootstrapPlan, CiMethod, EstimateValue, SpilloverEstimate,
    SpilloverReport, Transition,
};
pub use taxonomy::{
    classify, hypothesis_report, Corroboration, DirectionalEvidence, EvidenceCell, HypothesisSummary, TransitionCode,
    Verdict,
};
