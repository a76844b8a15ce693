//! Human-readable renderings of reports and summaries.

use serde_json::{json, Value};
use spillover_core::{
    hypothesis_report, DirectionalEvidence, EstimateValue, EvidenceCell, HypothesisSummary, RuleLinkMode,
    SpilloverReport, Verdict,
};

/// Decimal places for an estimate line: at least 3, and enough to show two
/// significant digits of the largest magnitude among diff and bounds.
fn decimals(v: &EstimateValue) -> usize {
    let max_abs = v.diff.abs().max(v.ci_lo.abs()).max(v.ci_hi.abs());
    if max_abs == 0.0 || !max_abs.is_finite() {
        return 3;
    }
    let d = 1 - max_abs.log10().floor() as i64;
    d.clamp(3, 12) as usize
}

fn fixed(x: f64, places: usize) -> String {
    let s = format!("{x:.places$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

/// `"<code>_diff = <diff> [<lo>, <hi>]"`, or `"<code>_diff = undefined"`.
pub fn format_estimate(code: &str, value: Option<&EstimateValue>) -> String {
    match value {
        Some(v) => {
            let p = decimals(v);
            format!(
                "{code}_diff = {} [{}, {}]",
                fixed(v.diff, p),
                fixed(v.ci_lo, p),
                fixed(v.ci_hi, p)
            )
        }
        None => format!("{code}_diff = undefined"),
    }
}

pub fn format_cell(cell: &EvidenceCell) -> String {
    format_estimate(cell.code.name(), cell.estimate.as_ref())
}

pub fn verdict_phrase(v: Verdict) -> &'static str {
    match v {
        Verdict::Supported => "supported by spillover evidence",
        Verdict::NotSupported => "not supported by spillover evidence",
        Verdict::Unavailable => "unavailable",
    }
}

/// Every row of a report, one line per transition with state labels.
pub fn render_transitions(report: &SpilloverReport) -> String {
    let mut out = String::new();
    for e in &report.estimates {
        let code = spillover_core::classify(e.transition.from, e.transition.to).code;
        let sig = match e.significant() {
            Some(true) => " *",
            _ => "",
        };
        out.push_str(&format!(
            "{:<6} {:<4} n_from={:<8} {}{}\n",
            e.transition.to_string(),
            code.name(),
            e.n_from,
            format_estimate(code.name(), e.value.as_ref()),
            sig,
        ));
    }
    out
}

fn direction_line(d: &DirectionalEvidence) -> String {
    format!(
        "  {:<21} {:<37} {:<37} {} (corroboration: {})\n",
        d.direction.name(),
        format_cell(&d.primary),
        format_cell(&d.corroboration_cell),
        verdict_phrase(d.verdict),
        d.corroboration.name()
    )
}

/// Plain-text table: one block per category with the two directional rows
/// and the adirectional fast transitions.
pub fn render_table(summaries: &[HypothesisSummary]) -> String {
    let mut out = String::new();
    if let Some(first) = summaries.first() {
        out.push_str(&format!(
            "spillover summary: ci={} level={} rule_link_mode={}\n",
            first.ci_method.name(),
            first.level,
            first.rule_link_mode.name()
        ));
    }
    for s in summaries {
        out.push('\n');
        out.push_str(s.category.name());
        out.push('\n');
        out.push_str(&direction_line(&s.institution_to_culture));
        out.push_str(&direction_line(&s.culture_to_institution));
        out.push_str(&format!(
            "  {:<21} {:<37} {}\n",
            "adirectional",
            format_cell(&s.fast_gain),
            format_cell(&s.fast_loss)
        ));
    }
    out
}

pub fn render_reports(reports: &[SpilloverReport], mode: RuleLinkMode) -> String {
    let summaries: Vec<_> = reports.iter().map(|r| hypothesis_report(r, mode)).collect();
    render_table(&summaries)
}

fn cell_json(c: &EvidenceCell) -> Value {
    match &c.estimate {
        Some(v) => json!({
            "code": c.code.name(),
            "diff": v.diff,
            "ci_lo": v.ci_lo,
            "ci_hi": v.ci_hi,
            "p_obs": v.p_obs,
            "p_null": v.p_null,
            "significant": v.significant(),
            "text": format_cell(c),
        }),
        None => json!({ "code": c.code.name(), "estimate": "undefined", "text": format_cell(c) }),
    }
}

fn direction_json(d: &DirectionalEvidence) -> Value {
    json!({
        "direction": d.direction.name(),
        "verdict": verdict_phrase(d.verdict),
        "primary": cell_json(&d.primary),
        "corroboration": d.corroboration.name(),
        "corroboration_cell": cell_json(&d.corroboration_cell),
    })
}

pub fn summary_json(s: &HypothesisSummary) -> Value {
    json!({
        "rule_category": s.category.name(),
        "rule_link_mode": s.rule_link_mode.name(),
        "ci_method": s.ci_method.name(),
        "level": s.level,
        "institution_to_culture": direction_json(&s.institution_to_culture),
        "culture_to_institution": direction_json(&s.culture_to_institution),
        "fast_cotransition": { "gain": cell_json(&s.fast_gain), "loss": cell_json(&s.fast_loss) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(diff: f64, lo: f64, hi: f64) -> EstimateValue {
        EstimateValue {
            p_obs: 0.5,
            p_null: 0.5 - diff,
            diff,
            ci_lo: lo,
            ci_hi: hi,
        }
    }

    #[test]
    fn presentation_examples() {
        assert_eq!(
            format_estimate("S1.1", Some(&v(0.146, 0.036, 0.256))),
            "S1.1_diff = 0.146 [0.036, 0.256]"
        );
        assert_eq!(
            format_estimate("F1.1", Some(&v(0.0007, 0.0004, 0.0010))),
            "F1.1_diff = 0.0007 [0.0004, 0.0010]"
        );
        assert_eq!(
            format_estimate("S2.1", Some(&v(0.068, -0.052, 0.188))),
            "S2.1_diff = 0.068 [-0.052, 0.188]"
        );
        assert_eq!(format_estimate("S1.2", None), "S1.2_diff = undefined");
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(
            format_estimate("X", Some(&v(-0.0001, -0.2, 0.2))),
            "X_diff = 0.000 [-0.200, 0.200]"
        );
        assert_eq!(
            format_estimate("X", Some(&v(0.0, 0.0, 0.0))),
            "X_diff = 0.000 [0.000, 0.000]"
        );
    }

    #[test]
    fn large_values_keep_three_places() {
        assert_eq!(
            format_estimate("S1.1", Some(&v(1.0, 0.5, 1.5))),
            "S1.1_diff = 1.000 [0.500, 1.500]"
        );
    }
}
