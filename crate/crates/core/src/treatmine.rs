//! Greedy lattice search for the treatment patterns with the largest positive
//! and negative effect inside one grouping pattern's subpopulation.
//!
//! Level one holds single predicates over treatment attributes that are
//! causal ancestors of the outcome. A level keeps only significant effects of
//! the searched sign, then the better half by magnitude. A pattern of length
//! `l + 1` is evaluated only if all of its length-`l` parents survived. The
//! search stops at the first level whose best effect does not beat the best
//! seen so far.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::CausalDag;
use crate::effect::{CateEstimate, CateEstimator, EffectConfig, Estimate};
use crate::error::Result;
use crate::patterns::{covered_groups, quantile_cuts, Literal, Op, Pattern, SimplePredicate};
use crate::tabular::{AggregateView, Column, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn admits(self, cate: f64) -> bool {
        match self {
            Direction::Positive => cate > 0.0,
            Direction::Negative => cate < 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreatmentConfig {
    /// Significance level an effect must beat to be kept.
    pub alpha: f64,
    /// Effects below this fraction of the outcome's standard deviation in the
    /// subpopulation count as zero.
    pub near_zero_frac: f64,
    /// Equal-frequency bins for numeric treatment attributes.
    pub bins: usize,
    pub effect: EffectConfig,
}

impl Default for TreatmentConfig {
    fn default() -> Self {
        TreatmentConfig {
            alpha: 0.05,
            near_zero_frac: 0.01,
            bins: 5,
            effect: EffectConfig::default(),
        }
    }
}

/// A treatment pattern with its estimate. Level is the pattern length.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeNode {
    pub pattern: Pattern,
    pub estimate: CateEstimate,
}

impl LatticeNode {
    pub fn level(&self) -> usize {
        self.pattern.len()
    }
}

/// Larger |effect| first, then shorter, then text order.
pub fn rank_nodes(a: &LatticeNode, b: &LatticeNode) -> Ordering {
    b.estimate
        .cate
        .abs()
        .total_cmp(&a.estimate.cate.abs())
        .then(a.pattern.len().cmp(&b.pattern.len()))
        .then_with(|| a.pattern.to_string().cmp(&b.pattern.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationCandidate {
    pub pg: Pattern,
    /// Indices into the view's groups, ascending.
    pub covered: Vec<usize>,
    pub pos: Option<LatticeNode>,
    pub neg: Option<LatticeNode>,
    /// |positive effect| + |negative effect|, absent directions counting 0.
    pub weight: f64,
}

impl ExplanationCandidate {
    pub fn new(pg: Pattern, covered: Vec<usize>, pos: Option<LatticeNode>, neg: Option<LatticeNode>) -> Self {
        let weight = pos.as_ref().map_or(0.0, |n| n.estimate.cate.abs())
            + neg.as_ref().map_or(0.0, |n| n.estimate.cate.abs());
        ExplanationCandidate {
            pg,
            covered,
            pos,
            neg,
            weight,
        }
    }
}

/// Treatment attributes with a directed path to the outcome.
pub fn causal_treatment_attrs(treatment_attrs: &[String], dag: &CausalDag, outcome: &str) -> Result<Vec<String>> {
    if !dag.has_node(outcome) {
        return Ok(Vec::new());
    }
    let ancestors = dag.causal_ancestors(outcome)?;
    let mut out: Vec<String> = treatment_attrs
        .iter()
        .filter(|a| ancestors.contains(*a))
        .cloned()
        .collect();
    out.sort();
    Ok(out)
}

/// Single-predicate treatment patterns: one equality per active-domain value
/// of categorical attributes, and `<= cut` / `> cut` for the quantile cuts of
/// numeric ones. Attributes that cannot affect the outcome are dropped.
pub fn gen_level1(
    d: &Dataset,
    view: &AggregateView,
    treatment_attrs: &[String],
    dag: &CausalDag,
    bins: usize,
) -> Result<Vec<Pattern>> {
    let mut out = Vec::new();
    for attr in causal_treatment_attrs(treatment_attrs, dag, &view.avg_attr)? {
        match d.column_by_name(&attr)? {
            Column::Categorical { domain, .. } => {
                out.extend(domain.iter().map(|v| Pattern::single(SimplePredicate::eq(attr.clone(), v.clone()))));
            }
            Column::Numeric { values, .. } => {
                let mut present: Vec<f64> = view.rows.iter().filter_map(|&r| values[r]).collect();
                present.sort_by(f64::total_cmp);
                for cut in quantile_cuts(&present, bins) {
                    for op in [Op::Le, Op::Gt] {
                        out.push(Pattern::single(SimplePredicate::new(attr.clone(), op, Literal::Number(cut))));
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Length-`l + 1` candidates all of whose length-`l` parents are in `nodes`.
/// Joins patterns sharing their first `l - 1` predicates whose last
/// predicates sit on different attributes.
pub fn gen_next_level(nodes: &[Pattern]) -> Vec<Pattern> {
    let mut sorted: Vec<&Pattern> = nodes.iter().collect();
    sorted.sort();
    sorted.dedup();
    let present: HashSet<&Pattern> = sorted.iter().copied().collect();
    let mut out = BTreeSet::new();
    for i in 0..sorted.len() {
        let a = sorted[i].predicates();
        let Some((a_last, a_prefix)) = a.split_last() else { continue };
        for b in sorted.iter().skip(i + 1).map(|p| p.predicates()) {
            if b.len() != a.len() {
                continue;
            }
            let (b_last, b_prefix) = b.split_last().unwrap();
            if a_prefix != b_prefix {
                break;
            }
            if a_last.attr == b_last.attr || a_prefix.iter().any(|p| p.attr == b_last.attr) {
                continue;
            }
            let Ok(cand) = sorted[i].with(b_last.clone()) else { continue };
            if cand.parents().all(|p| present.contains(&p)) {
                out.insert(cand);
            }
        }
    }
    out.into_iter().collect()
}

/// Search state for one grouping pattern. Estimates are memoized, so the two
/// directions share level-one work and no pattern is estimated twice.
pub struct TreatmentSearch<'a> {
    estimator: CateEstimator<'a>,
    pg: Pattern,
    rows: Vec<usize>,
    level1: &'a [Pattern],
    cfg: TreatmentConfig,
    near_zero: Option<f64>,
    cache: HashMap<Pattern, Estimate>,
    estimations: usize,
}

impl<'a> TreatmentSearch<'a> {
    pub fn new(
        d: &'a Dataset,
        dag: &'a CausalDag,
        view: &'a AggregateView,
        pg: &Pattern,
        level1: &'a [Pattern],
        cfg: TreatmentConfig,
    ) -> Result<Self> {
        let rows = pg.compile(d)?.filter(&view.rows);
        let y_col = d.index_of(&view.avg_attr)?;
        let ys: Vec<f64> = rows.iter().filter_map(|&r| d.number(y_col, r)).collect();
        let near_zero = (!ys.is_empty())
            .then(|| {
                let mean = ys.iter().sum::<f64>() / ys.len() as f64;
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
                var.sqrt()
            })
            .filter(|&sd| sd > 0.0)
            .map(|sd| cfg.near_zero_frac * sd);
        Ok(TreatmentSearch {
            estimator: CateEstimator {
                dataset: d,
                dag,
                outcome: &view.avg_attr,
                config: cfg.effect,
            },
            pg: pg.clone(),
            rows,
            level1,
            cfg,
            near_zero,
            cache: HashMap::new(),
            estimations: 0,
        })
    }

    /// Number of effect estimations performed so far.
    pub fn estimations(&self) -> usize {
        self.estimations
    }

    pub fn subpopulation(&self) -> &[usize] {
        &self.rows
    }

    fn evaluate(&mut self, cands: &[Pattern]) -> Result<()> {
        let missing: Vec<&Pattern> = cands.iter().filter(|c| !self.cache.contains_key(*c)).collect();
        let estimator = &self.estimator;
        let rows = &self.rows;
        let pg = &self.pg;
        let results: Vec<Result<Estimate>> = missing
            .par_iter()
            .map(|pt| estimator.estimate(rows, pg, pt))
            .collect();
        self.estimations += missing.len();
        for (pt, res) in missing.into_iter().zip(results) {
            self.cache.insert(pt.clone(), res?);
        }
        Ok(())
    }

    /// Estimates each candidate and returns the significant, non-negligible
    /// effects of sign `sigma`, best first.
    pub fn admissible(&mut self, cands: &[Pattern], sigma: Direction) -> Result<Vec<LatticeNode>> {
        let Some(eps) = self.near_zero else {
            // constant outcome: nothing can have an effect
            return Ok(Vec::new());
        };
        self.evaluate(cands)?;
        let mut kept: Vec<LatticeNode> = cands
            .iter()
            .filter_map(|pt| match self.cache[pt] {
                Ok(est) if sigma.admits(est.cate) && est.p_value < self.cfg.alpha && est.cate.abs() >= eps => {
                    Some(LatticeNode {
                        pattern: pt.clone(),
                        estimate: est,
                    })
                }
                _ => None,
            })
            .collect();
        kept.sort_by(rank_nodes);
        Ok(kept)
    }

    /// `admissible`, cut to the better half when more than two survive.
    pub fn filter_candidates(&mut self, cands: &[Pattern], sigma: Direction) -> Result<Vec<LatticeNode>> {
        let mut kept = self.admissible(cands, sigma)?;
        if kept.len() > 2 {
            kept.truncate(kept.len().div_ceil(2));
        }
        Ok(kept)
    }

    /// The most extreme effect of sign `sigma`, or `None` when no single
    /// predicate qualifies.
    pub fn top_treatment(&mut self, sigma: Direction) -> Result<Option<LatticeNode>> {
        let level1 = self.level1;
        let mut nodes = self.filter_candidates(level1, sigma)?;
        let Some(mut best) = nodes.first().cloned() else {
            return Ok(None);
        };
        loop {
            let patterns: Vec<Pattern> = nodes.iter().map(|n| n.pattern.clone()).collect();
            let cands = gen_next_level(&patterns);
            if cands.is_empty() {
                break;
            }
            let next = self.filter_candidates(&cands, sigma)?;
            let Some(level_best) = next.first() else { break };
            if rank_nodes(level_best, &best) == Ordering::Less {
                best = level_best.clone();
                nodes = next;
            } else {
                break;
            }
        }
        Ok(Some(best))
    }
}

/// One candidate per grouping pattern that has an effect in either
/// direction. Grouping patterns are searched in parallel; output follows the
/// input order.
pub fn build_candidates(
    d: &Dataset,
    view: &AggregateView,
    grouping_attrs: &[String],
    treatment_attrs: &[String],
    grouping_patterns: &[Pattern],
    dag: &CausalDag,
    cfg: TreatmentConfig,
) -> Result<Vec<ExplanationCandidate>> {
    let level1 = gen_level1(d, view, treatment_attrs, dag, cfg.bins)?;
    let results: Vec<Result<Option<ExplanationCandidate>>> = grouping_patterns
        .par_iter()
        .map(|pg| {
            let covered = covered_groups(pg, d, grouping_attrs, view)?;
            let mut search = TreatmentSearch::new(d, dag, view, pg, &level1, cfg)?;
            let pos = search.top_treatment(Direction::Positive)?;
            let neg = search.top_treatment(Direction::Negative)?;
            if pos.is_none() && neg.is_none() {
                return Ok(None);
            }
            Ok(Some(ExplanationCandidate::new(pg.clone(), covered, pos, neg)))
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        if let Some(c) = r? {
            out.push(c);
        }
    }
    Ok(out)
}
