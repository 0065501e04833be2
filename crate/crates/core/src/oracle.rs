//! Exhaustive reference implementations and evaluation metrics.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::dag::CausalDag;
use crate::error::{Error, Result};
use crate::groupmine::{dedup_grouping, min_support};
use crate::patterns::{covered_groups, Pattern, SimplePredicate};
use crate::pipeline::{explain, Algorithm, Settings};
use crate::report::SummaryReport;
use crate::tabular::{AggregateView, AttributePartition, Column, Dataset, QuerySpec, MISSING};
use crate::treatmine::{gen_level1, Direction, ExplanationCandidate, TreatmentSearch};

pub const MAX_GROUPING_ATTRS: usize = 6;
pub const MAX_TREATMENT_ATTRS: usize = 4;
/// Bounds on the number of conjunctions enumerated per side.
pub const MAX_GROUPING_SPACE: usize = 100_000;
pub const MAX_TREATMENT_SPACE: usize = 10_000;

/// Every non-empty conjunction choosing at most one option per slot.
fn conjunctions(options: &[Vec<SimplePredicate>]) -> Vec<Pattern> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(options: &[Vec<SimplePredicate>], i: usize, cur: &mut Vec<SimplePredicate>, out: &mut Vec<Pattern>) {
        if i == options.len() {
            if !cur.is_empty() {
                out.push(Pattern::new(cur.clone()).expect("one predicate per attribute"));
            }
            return;
        }
        rec(options, i + 1, cur, out);
        for p in &options[i] {
            cur.push(p.clone());
            rec(options, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(options, 0, &mut cur, &mut out);
    out.sort();
    out
}

fn space(options: &[Vec<SimplePredicate>]) -> usize {
    options.iter().fold(1usize, |acc, o| acc.saturating_mul(o.len() + 1))
}

/// Candidates from every grouping pattern over the mining attributes (no
/// support threshold) and every treatment pattern (no pruning), with effects
/// estimated on all rows.
pub fn brute_force_candidates(
    d: &Dataset,
    dag: &CausalDag,
    view: &AggregateView,
    parts: &AttributePartition,
    settings: &Settings,
) -> Result<Vec<ExplanationCandidate>> {
    let mining = parts.mining_attrs();
    if mining.len() > MAX_GROUPING_ATTRS {
        return Err(Error::Size(format!(
            "{} grouping attributes exceed the exhaustive bound of {MAX_GROUPING_ATTRS}",
            mining.len()
        )));
    }
    let mut options = Vec::new();
    for attr in &mining {
        let Column::Categorical { codes, domain } = d.column_by_name(attr)? else {
            return Err(Error::Schema(format!("grouping attribute {attr} is not categorical")));
        };
        let present: BTreeSet<u32> = view.rows.iter().map(|&r| codes[r]).filter(|&c| c != MISSING).collect();
        options.push(
            present
                .into_iter()
                .map(|c| SimplePredicate::eq(attr.clone(), domain[c as usize].clone()))
                .collect::<Vec<_>>(),
        );
    }
    if space(&options) > MAX_GROUPING_SPACE {
        return Err(Error::Size("grouping pattern space exceeds the exhaustive bound".into()));
    }
    let grouping = dedup_grouping(&conjunctions(&options), d, &parts.grouping, view)?;

    let level1 = gen_level1(d, view, &parts.treatment, dag, settings.bins)?;
    let mut by_attr: BTreeMap<String, Vec<SimplePredicate>> = BTreeMap::new();
    for p in &level1 {
        let pred = p.predicates()[0].clone();
        by_attr.entry(pred.attr.clone()).or_default().push(pred);
    }
    if by_attr.len() > MAX_TREATMENT_ATTRS {
        return Err(Error::Size(format!(
            "{} treatment attributes exceed the exhaustive bound of {MAX_TREATMENT_ATTRS}",
            by_attr.len()
        )));
    }
    let options: Vec<Vec<SimplePredicate>> = by_attr.into_values().collect();
    if space(&options) > MAX_TREATMENT_SPACE {
        return Err(Error::Size("treatment pattern space exceeds the exhaustive bound".into()));
    }
    let treatments = conjunctions(&options);

    let mut cfg = settings.treatment_config();
    cfg.effect.sample_size = usize::MAX;
    let results: Vec<Result<Option<ExplanationCandidate>>> = grouping
        .par_iter()
        .map(|pg| {
            let covered = covered_groups(pg, d, &parts.grouping, view)?;
            let mut search = TreatmentSearch::new(d, dag, view, pg, &treatments, cfg)?;
            let pos = search.admissible(&treatments, Direction::Positive)?.into_iter().next();
            let neg = search.admissible(&treatments, Direction::Negative)?.into_iter().next();
            Ok((pos.is_some() || neg.is_some()).then(|| ExplanationCandidate::new(pg.clone(), covered, pos, neg)))
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// The exhaustive pipeline: brute-force candidates, exact selection.
pub fn brute_force_summarize(d: &Dataset, dag: &CausalDag, q: &QuerySpec, settings: &Settings) -> Result<SummaryReport> {
    let settings = Settings {
        algorithm: Algorithm::Bruteforce,
        ..settings.clone()
    };
    explain(d, dag, q, &settings)
}

/// Frequent equality conjunctions over `attrs`, counted over all rows by
/// direct enumeration. Small tables only.
pub fn naive_frequent_patterns(d: &Dataset, attrs: &[String], tau: f64) -> Result<Vec<Pattern>> {
    if attrs.len() > 8 || d.row_count() > 200 {
        return Err(Error::Size("naive enumeration supports at most 8 attributes and 200 rows".into()));
    }
    let minsup = min_support(tau, d.row_count());
    let mut attrs = attrs.to_vec();
    attrs.sort();
    attrs.dedup();
    let mut cols = Vec::new();
    for a in &attrs {
        match d.column_by_name(a)? {
            Column::Categorical { codes, domain } => cols.push((a.clone(), codes, domain)),
            Column::Numeric { .. } => return Err(Error::Schema(format!("{a} is not categorical"))),
        }
    }
    let mut out = Vec::new();
    let all: Vec<usize> = (0..d.row_count()).collect();
    let mut cur = Vec::new();
    #[allow(clippy::type_complexity)]
    fn rec(
        cols: &[(String, &Vec<u32>, &Vec<String>)],
        i: usize,
        rows: &[usize],
        cur: &mut Vec<SimplePredicate>,
        minsup: usize,
        out: &mut Vec<Pattern>,
    ) {
        if i == cols.len() {
            if !cur.is_empty() && rows.len() >= minsup {
                out.push(Pattern::new(cur.clone()).expect("distinct attributes"));
            }
            return;
        }
        rec(cols, i + 1, rows, cur, minsup, out);
        let (attr, codes, domain) = &cols[i];
        for (code, value) in domain.iter().enumerate() {
            let sub: Vec<usize> = rows.iter().copied().filter(|&r| codes[r] == code as u32).collect();
            // an empty match set stays empty under more predicates
            if sub.is_empty() {
                continue;
            }
            cur.push(SimplePredicate::eq(attr.clone(), value.clone()));
            rec(cols, i + 1, &sub, cur, minsup, out);
            cur.pop();
        }
    }
    rec(&cols, 0, &all, &mut cur, minsup, &mut out);
    out.sort();
    Ok(out)
}

/// Precision and recall of `found` against `truth`. An empty `found` has
/// precision 1; an empty `truth` has recall 1.
pub fn precision_recall(found: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> (f64, f64) {
    let hit = found.intersection(truth).count() as f64;
    let precision = if found.is_empty() { 1.0 } else { hit / found.len() as f64 };
    let recall = if truth.is_empty() { 1.0 } else { hit / truth.len() as f64 };
    (precision, recall)
}

/// Kendall rank correlation between two orderings of the same items.
pub fn kendall_tau<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64> {
    let pos: BTreeMap<&T, usize> = b.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let set_a: BTreeSet<&T> = a.iter().collect();
    if set_a.len() != a.len() || pos.len() != b.len() || a.len() != b.len() || a.iter().any(|x| !pos.contains_key(x)) {
        return Err(Error::Config("rankings must order the same distinct items".into()));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let ranks: Vec<usize> = a.iter().map(|x| pos[x]).collect();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            score += if ranks[i] < ranks[j] { 1 } else { -1 };
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}
