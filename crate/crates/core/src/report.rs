//! The selected explanations and their text / JSON renderings.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Duration;

use serde_json::{json, Map, Value};

use crate::error::Phase;
use crate::lpsolve::Selection;
use crate::pipeline::Settings;
use crate::tabular::{AggregateView, QuerySpec};
use crate::treatmine::{ExplanationCandidate, LatticeNode};

#[derive(Debug, Clone)]
pub struct SummaryReport {
    pub query: QuerySpec,
    pub settings: Settings,
    pub view: AggregateView,
    pub grouping_attrs: Vec<String>,
    /// Grouping patterns searched for treatments.
    pub grouping_patterns: usize,
    /// Every candidate the selection step saw.
    pub candidates: Vec<ExplanationCandidate>,
    pub selected: Vec<ExplanationCandidate>,
    pub covered_count: usize,
    pub coverage_fraction: f64,
    pub total_weight: f64,
    pub size_ok: bool,
    pub coverage_ok: bool,
    /// The relaxation (or exact search) proved that no selection exists.
    pub no_solution: bool,
    pub lp_objective: Option<f64>,
    /// Wall-clock time per phase. Not part of either rendering.
    pub timings: Vec<(Phase, Duration)>,
}

impl SummaryReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        query: QuerySpec,
        settings: Settings,
        view: AggregateView,
        grouping_attrs: Vec<String>,
        grouping_patterns: usize,
        candidates: Vec<ExplanationCandidate>,
        selection: Option<Selection>,
        lp_objective: Option<f64>,
        timings: Vec<(Phase, Duration)>,
    ) -> SummaryReport {
        let no_solution = selection.is_none();
        let selected: Vec<ExplanationCandidate> = selection
            .map(|s| s.indices.iter().map(|&j| candidates[j].clone()).collect())
            .unwrap_or_default();
        let covered: BTreeSet<usize> = selected.iter().flat_map(|c| c.covered.iter().copied()).collect();
        let m = view.m();
        let required = ((settings.theta * m as f64) - 1e-9).ceil().max(0.0) as usize;
        SummaryReport {
            covered_count: covered.len(),
            coverage_fraction: if m == 0 { 0.0 } else { covered.len() as f64 / m as f64 },
            total_weight: selected.iter().map(|c| c.weight).sum(),
            size_ok: selected.len() <= settings.k,
            coverage_ok: !no_solution && covered.len() >= required,
            no_solution,
            query,
            settings,
            view,
            grouping_attrs,
            grouping_patterns,
            candidates,
            selected,
            lp_objective,
            timings,
        }
    }
}

/// Rounds to three significant digits and prints without exponent.
pub fn format_effect(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.2e}").parse().unwrap_or(x);
    let magnitude = rounded.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Smallest rung of 0.1, 0.05, 0.01, 1e-3, 1e-4, ... above `p`.
pub fn format_p(p: f64) -> String {
    if p >= 0.1 {
        return "1".into();
    }
    if p >= 0.05 {
        return "0.1".into();
    }
    if p >= 0.01 {
        return "0.05".into();
    }
    if p >= 1e-3 {
        return "0.01".into();
    }
    for e in 4..=16 {
        if p >= 10f64.powi(-e) {
            return format!("1e-{}", e - 1);
        }
    }
    "1e-16".into()
}

fn effect_clause(node: &LatticeNode, sep: &str) -> String {
    format!(
        "effect size{sep} {}, p < {}",
        format_effect(node.estimate.cate),
        format_p(node.estimate.p_value)
    )
}

pub fn render_text(r: &SummaryReport) -> String {
    if r.selected.is_empty() {
        return "No feasible explanation summary.\n".into();
    }
    let outcome = &r.query.avg_attr;
    let mut out = String::new();
    for c in &r.selected {
        let scope = if c.pg.is_empty() {
            "all groups".to_string()
        } else {
            c.pg.to_string()
        };
        let mut para = format!("For {scope}, ");
        match &c.pos {
            Some(pos) => {
                let _ = write!(
                    para,
                    "the most substantial effect on high {outcome} ({}) is observed for {}.",
                    effect_clause(pos, " of"),
                    pos.pattern
                );
                if let Some(neg) = &c.neg {
                    let _ = write!(
                        para,
                        " Conversely, {} has the greatest adverse impact ({}).",
                        neg.pattern,
                        effect_clause(neg, ":")
                    );
                }
            }
            None => {
                if let Some(neg) = &c.neg {
                    let _ = write!(
                        para,
                        "{} has the greatest adverse impact on {outcome} ({}).",
                        neg.pattern,
                        effect_clause(neg, ":")
                    );
                }
            }
        }
        out.push_str(&para);
        out.push_str("\n\n");
    }
    let _ = writeln!(
        out,
        "Covered {} of {} groups ({:.1}%); total explainability {}.",
        r.covered_count,
        r.view.m(),
        100.0 * r.coverage_fraction,
        format_effect(r.total_weight)
    );
    out
}

/// Twelve significant digits; non-finite values become null.
fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    json!(rounded)
}

fn node_json(n: &Option<LatticeNode>) -> Value {
    match n {
        None => Value::Null,
        Some(n) => json!({
            "pattern": n.pattern.to_string(),
            "cate": num(n.estimate.cate),
            "std_error": num(n.estimate.std_error),
            "p_value": num(n.estimate.p_value),
            "n_treated": n.estimate.n_treated,
            "n_control": n.estimate.n_control,
        }),
    }
}

/// Canonical JSON document (sorted keys, trailing newline).
pub fn render_json(r: &SummaryReport) -> String {
    let view: Vec<Value> = r
        .view
        .groups
        .iter()
        .map(|g| json!({"key": g.key, "avg": num(g.avg), "count": g.count}))
        .collect();
    let explanations: Vec<Value> = r
        .selected
        .iter()
        .map(|c| {
            json!({
                "grouping_pattern": c.pg.to_string(),
                "covered_groups": c.covered,
                "positive": node_json(&c.pos),
                "negative": node_json(&c.neg),
                "weight": num(c.weight),
            })
        })
        .collect();
    let mut doc = Map::new();
    doc.insert(
        "query".into(),
        json!({
            "group_by": r.query.group_by,
            "avg": r.query.avg_attr,
            "where": r.query.where_pred.as_ref().map(|p| p.to_string()),
        }),
    );
    doc.insert(
        "params".into(),
        json!({
            "k": r.settings.k,
            "theta": num(r.settings.theta),
            "tau": num(r.settings.tau),
            "seed": r.settings.seed,
            "algorithm": r.settings.algorithm.as_str(),
        }),
    );
    doc.insert("view".into(), Value::Array(view));
    doc.insert("explanations".into(), Value::Array(explanations));
    doc.insert(
        "summary".into(),
        json!({
            "covered_count": r.covered_count,
            "coverage_fraction": num(r.coverage_fraction),
            "total_weight": num(r.total_weight),
            "size_ok": r.size_ok,
            "coverage_ok": r.coverage_ok,
            "no_solution": r.no_solution,
            "candidates": r.candidates.len(),
        }),
    );
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effect::CateEstimate;
    use crate::patterns::{Pattern, SimplePredicate};
    use crate::tabular::Group;

    fn node(attr: &str, v: &str, cate: f64, p: f64) -> LatticeNode {
        LatticeNode {
            pattern: Pattern::single(SimplePredicate::eq(attr, v)),
            estimate: CateEstimate {
                cate,
                std_error: 1000.0,
                p_value: p,
                n_treated: 40,
                n_control: 60,
                n_used: 100,
            },
        }
    }

    fn report(selected: bool) -> SummaryReport {
        let view = AggregateView {
            group_by: vec!["Country".into()],
            avg_attr: "Salary".into(),
            groups: vec![
                Group { key: vec!["DE".into()], avg: 61234.56789012345, count: 3 },
                Group { key: vec!["FR".into()], avg: 55000.0, count: 2 },
            ],
            rows: vec![0, 1, 2, 3, 4],
            row_group: vec![0, 0, 0, 1, 1],
            representatives: vec![0, 3],
        };
        let cand = ExplanationCandidate::new(
            Pattern::single(SimplePredicate::eq("Continent", "Europe")),
            vec![0, 1],
            Some(node("Role", "Dev", 36_000.0, 2e-4)),
            Some(node("Education", "None", -39_000.0, 5e-4)),
        );
        let sel = selected.then(|| Selection { indices: vec![0], weight: cand.weight, covered: 2 });
        SummaryReport::new(
            QuerySpec::new(vec!["Country".into()], "Salary"),
            Settings::default(),
            view,
            vec!["Country".into(), "Continent".into()],
            1,
            vec![cand],
            sel,
            None,
            Vec::new(),
        )
    }

    #[test]
    fn effect_formatting() {
        assert_eq!(format_effect(36_012.0), "36000");
        assert_eq!(format_effect(-2.4567), "-2.46");
        assert_eq!(format_effect(9.996), "10.0");
        assert_eq!(format_effect(0.012345), "0.0123");
        assert_eq!(format_effect(0.0), "0");
    }

    #[test]
    fn p_ladder() {
        assert_eq!(format_p(2e-4), "1e-3");
        assert_eq!(format_p(0.0005), "1e-3");
        assert_eq!(format_p(0.001), "0.01");
        assert_eq!(format_p(0.03), "0.05");
        assert_eq!(format_p(0.005), "0.01");
        assert_eq!(format_p(1e-20), "1e-16");
        assert_eq!(format_p(0.0), "1e-16");
    }

    #[test]
    fn text_shape() {
        let text = render_text(&report(true));
        assert!(text.starts_with(
            "For Continent = Europe, the most substantial effect on high Salary (effect size of 36000, p < 1e-3) \
             is observed for Role = Dev. Conversely, Education = None has the greatest adverse impact \
             (effect size: -39000, p < 1e-3)."
        ));
        assert_eq!(text, render_text(&report(true)));
        assert_eq!(render_text(&report(false)), "No feasible explanation summary.\n");
    }

    #[test]
    fn summary_flags() {
        let r = report(true);
        assert_eq!(r.covered_count, 2);
        assert_eq!(r.coverage_fraction, 1.0);
        assert!(r.size_ok && r.coverage_ok && !r.no_solution);
        let r = report(false);
        assert!(r.no_solution && !r.coverage_ok);
        assert!(r.selected.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let r = report(true);
        let text = render_json(&r);
        assert!(text.ends_with("}\n"));
        let v: Value = serde_json::from_str(&text).unwrap();
        let avg = v["view"][0]["avg"].as_f64().unwrap();
        assert!((avg - 61234.56789012345).abs() / avg < 1e-9);
        assert_eq!(v["explanations"][0]["positive"]["cate"].as_f64(), Some(36_000.0));
        assert_eq!(v["explanations"][0]["weight"].as_f64(), Some(75_000.0));
        assert_eq!(v["summary"]["covered_count"], 2);
        assert_eq!(v["query"]["where"], Value::Null);
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);

        let empty: Value = serde_json::from_str(&render_json(&report(false))).unwrap();
        assert_eq!(empty["explanations"], json!([]));
        assert_eq!(empty["summary"]["no_solution"], true);
    }
}
