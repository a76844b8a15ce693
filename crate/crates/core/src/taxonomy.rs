//! Fast/slow/irrelevant transition labels and directional evidence.

use core::fmt;

use crate::ingest::Governance;
use crate::markov::JointState::{self, *};
use crate::netbuild::RuleLinkMode;
use crate::spillover::{CiMethod, EstimateValue, SpilloverReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransitionCode {
    F1_1,
    F1_2,
    S1_1,
    S1_2,
    S2_1,
    S2_2,
    X,
}

impl TransitionCode {
    pub const NAMED: [TransitionCode; 6] = [
        TransitionCode::F1_1,
        TransitionCode::F1_2,
        TransitionCode::S1_1,
        TransitionCode::S1_2,
        TransitionCode::S2_1,
        TransitionCode::S2_2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransitionCode::F1_1 => "F1.1",
            TransitionCode::F1_2 => "F1.2",
            TransitionCode::S1_1 => "S1.1",
            TransitionCode::S1_2 => "S1.2",
            TransitionCode::S2_1 => "S2.1",
            TransitionCode::S2_2 => "S2.2",
            TransitionCode::X => "X",
        }
    }

    /// The transition a named code stands for.
    pub fn transition(self) -> Option<(JointState, JointState)> {
        match self {
            TransitionCode::F1_1 => Some((at, AT)),
            TransitionCode::F1_2 => Some((AT, at)),
            TransitionCode::S1_1 => Some((At, AT)),
            TransitionCode::S1_2 => Some((AT, At)),
            TransitionCode::S2_1 => Some((aT, AT)),
            TransitionCode::S2_2 => Some((AT, aT)),
            TransitionCode::X => None,
        }
    }
}

impl fmt::Display for TransitionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Timescale {
    Fast,
    Slow,
    Irrelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Adirectional,
    InstitutionToCulture,
    CultureToInstitution,
    NotApplicable,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Adirectional => "adirectional",
            Direction::InstitutionToCulture => "institution->culture",
            Direction::CultureToInstitution => "culture->institution",
            Direction::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionLabel {
    pub code: TransitionCode,
    pub timescale: Timescale,
    pub direction: Direction,
}

pub fn classify(from: JointState, to: JointState) -> TransitionLabel {
    use Direction::*;
    use Timescale::*;
    let (code, timescale, direction) = match (from, to) {
        (at, AT) => (TransitionCode::F1_1, Fast, Adirectional),
        (AT, at) => (TransitionCode::F1_2, Fast, Adirectional),
        (At, AT) => (TransitionCode::S1_1, Slow, InstitutionToCulture),
        (AT, At) => (TransitionCode::S1_2, Slow, InstitutionToCulture),
        (aT, AT) => (TransitionCode::S2_1, Slow, CultureToInstitution),
        (AT, aT) => (TransitionCode::S2_2, Slow, CultureToInstitution),
        _ => (TransitionCode::X, Irrelevant, NotApplicable),
    };
    TransitionLabel {
        code,
        timescale,
        direction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Supported,
    NotSupported,
    Unavailable,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::NotSupported => "not supported",
            Verdict::Unavailable => "unavailable",
        }
    }
}

/// How a loss transition bears on its directional hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corroboration {
    /// Negative and significant.
    Significant,
    /// Negative but not significant.
    DirectionOnly,
    /// Zero or positive.
    Absent,
    Unavailable,
}

impl Corroboration {
    pub fn name(self) -> &'static str {
        match self {
            Corroboration::Significant => "significant",
            Corroboration::DirectionOnly => "direction only",
            Corroboration::Absent => "absent",
            Corroboration::Unavailable => "unavailable",
        }
    }
}

/// One named transition's estimate, `None` when undefined or missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceCell {
    pub code: TransitionCode,
    pub estimate: Option<EstimateValue>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalEvidence {
    pub direction: Direction,
    pub primary: EvidenceCell,
    pub corroboration_cell: EvidenceCell,
    pub verdict: Verdict,
    pub corroboration: Corroboration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisSummary {
    pub category: Governance,
    pub rule_link_mode: RuleLinkMode,
    pub ci_method: CiMethod,
    pub level: f64,
    pub institution_to_culture: DirectionalEvidence,
    pub culture_to_institution: DirectionalEvidence,
    pub fast_gain: EvidenceCell,
    pub fast_loss: EvidenceCell,
}

impl HypothesisSummary {
    pub fn cells(&self) -> [EvidenceCell; 6] {
        [
            self.fast_gain,
            self.fast_loss,
            self.institution_to_culture.primary,
            self.institution_to_culture.corroboration_cell,
            self.culture_to_institution.primary,
            self.culture_to_institution.corroboration_cell,
        ]
    }
}

fn cell(report: &SpilloverReport, code: TransitionCode) -> EvidenceCell {
    let estimate = code
        .transition()
        .and_then(|(from, to)| report.get(from, to))
        .and_then(|e| e.value);
    EvidenceCell { code, estimate }
}

fn directional(
    report: &SpilloverReport,
    direction: Direction,
    primary: TransitionCode,
    loss: TransitionCode,
) -> DirectionalEvidence {
    let primary = cell(report, primary);
    let corroboration_cell = cell(report, loss);
    let verdict = match primary.estimate {
        None => Verdict::Unavailable,
        Some(v) if v.significant() && v.diff > 0.0 => Verdict::Supported,
        Some(_) => Verdict::NotSupported,
    };
    let corroboration = match corroboration_cell.estimate {
        None => Corroboration::Unavailable,
        Some(v) if v.diff < 0.0 && v.significant() => Corroboration::Significant,
        Some(v) if v.diff < 0.0 => Corroboration::DirectionOnly,
        Some(_) => Corroboration::Absent,
    };
    DirectionalEvidence {
        direction,
        primary,
        corroboration_cell,
        verdict,
        corroboration,
    }
}

/// Directional verdicts for one category. Support comes only from a
/// significant positive gain transition (S1.1 or S2.1); the matching loss
/// transition (S1.2 or S2.2) is reported as corroboration.
pub fn hypothesis_report(report: &SpilloverReport, mode: RuleLinkMode) -> HypothesisSummary {
    HypothesisSummary {
        category: report.category,
        rule_link_mode: mode,
        ci_method: report.method,
        level: report.level,
        institution_to_culture: directional(
            report,
            Direction::InstitutionToCulture,
            TransitionCode::S1_1,
            TransitionCode::S1_2,
        ),
        culture_to_institution: directional(
            report,
            Direction::CultureToInstitution,
            TransitionCode::S2_1,
            TransitionCode::S2_2,
        ),
        fast_gain: cell(report, TransitionCode::F1_1),
        fast_loss: cell(report, TransitionCode::F1_2),
    }
}
