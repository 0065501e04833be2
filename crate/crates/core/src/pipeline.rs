//! End-to-end orchestration: query, attribute split, grouping-pattern mining,
//! treatment mining, and selection.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::dag::{parse_dot, CausalDag};
use crate::effect::EffectConfig;
use crate::error::{Error, Phase, PhaseExt, Result};
use crate::groupmine::{dedup_grouping, mine_grouping_patterns};
use crate::lpsolve::{
    build_ilp, greedy_select, randomized_rounding, solve_ilp_exact, solve_lp_relaxation, IlpInstance, Selection,
};
use crate::oracle::brute_force_candidates;
use crate::patterns::Pattern;
use crate::report::SummaryReport;
use crate::tabular::{
    evaluate_query, load_csv, partition_attributes, partition_declared, AttributePartition, Dataset, Kind, QuerySpec,
};
use crate::treatmine::{build_candidates, ExplanationCandidate, TreatmentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// LP relaxation plus randomized rounding over lattice-mined candidates.
    #[default]
    Causumx,
    /// Exhaustive candidates and exact selection; small inputs only.
    Bruteforce,
    /// Lattice-mined candidates with greedy selection.
    Greedy,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Causumx => "causumx",
            Algorithm::Bruteforce => "bruteforce",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "causumx" => Ok(Algorithm::Causumx),
            "bruteforce" | "brute-force" => Ok(Algorithm::Bruteforce),
            "greedy" => Ok(Algorithm::Greedy),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Tuning knobs shared by every entry point.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub k: usize,
    pub theta: f64,
    pub tau: f64,
    pub sample_size: usize,
    pub alpha: f64,
    pub min_arm: usize,
    pub bins: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Worker threads; 0 picks the machine default.
    pub threads: usize,
    /// Grouping attributes to use instead of every determined attribute.
    pub grouping_attrs: Option<Vec<String>>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            k: 5,
            theta: 0.75,
            tau: 0.1,
            sample_size: 1_000_000,
            alpha: 0.05,
            min_arm: 10,
            bins: 5,
            algorithm: Algorithm::Causumx,
            seed: 0,
            threads: 0,
            grouping_attrs: None,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k < 1 {
            return bad(format!("k must be at least 1, got {}", self.k));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must be in [0, 1], got {}", self.theta));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must be in [0, 1], got {}", self.tau));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.sample_size < 1 {
            return bad("sample size must be at least 1".into());
        }
        if self.min_arm < 1 {
            return bad("min-arm must be at least 1".into());
        }
        if self.bins < 1 {
            return bad("bins must be at least 1".into());
        }
        if matches!(&self.grouping_attrs, Some(g) if g.is_empty()) {
            return bad("grouping attribute list is empty".into());
        }
        Ok(())
    }

    pub fn treatment_config(&self) -> TreatmentConfig {
        TreatmentConfig {
            alpha: self.alpha,
            bins: self.bins,
            effect: EffectConfig {
                sample_size: self.sample_size,
                min_arm: self.min_arm,
                seed: self.seed,
            },
            ..TreatmentConfig::default()
        }
    }
}

/// Everything needed to run from files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub dag: PathBuf,
    pub group_by: Vec<String>,
    pub avg: String,
    /// Row filter in pattern syntax.
    pub where_clause: Option<String>,
    /// Columns read as categorical even when every value looks numeric.
    pub categorical: Vec<String>,
    pub settings: Settings,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(Dataset, CausalDag, QuerySpec)> {
    let overrides: HashMap<String, Kind> = cfg.categorical.iter().map(|c| (c.clone(), Kind::Categorical)).collect();
    let d = load_csv(&cfg.data, &overrides).phase(Phase::Load)?;
    let dot = std::fs::read_to_string(&cfg.dag)
        .map_err(|source| Error::Io {
            path: cfg.dag.display().to_string(),
            source,
        })
        .phase(Phase::Load)?;
    let dag = parse_dot(&dot).phase(Phase::Load)?;
    let mut q = QuerySpec::new(cfg.group_by.clone(), cfg.avg.clone());
    if let Some(w) = &cfg.where_clause {
        q = q.with_where(Pattern::parse(w, &d).phase(Phase::Query)?);
    }
    Ok((d, dag, q))
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<SummaryReport> {
    cfg.settings.validate()?;
    let (d, dag, q) = load_inputs(cfg)?;
    explain(&d, &dag, &q, &cfg.settings)
}

/// Runs the whole search on an in-memory dataset inside a pool of
/// `settings.threads` workers.
pub fn explain(d: &Dataset, dag: &CausalDag, q: &QuerySpec, settings: &Settings) -> Result<SummaryReport> {
    settings.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| explain_in_pool(d, dag, q, settings))
}

fn partition(d: &Dataset, q: &QuerySpec, settings: &Settings) -> Result<AttributePartition> {
    match &settings.grouping_attrs {
        Some(declared) => partition_declared(d, q, declared),
        None => partition_attributes(d, q),
    }
}

/// Grouping patterns and explanation candidates from the lattice search.
pub fn mine_candidates(
    d: &Dataset,
    dag: &CausalDag,
    view: &crate::tabular::AggregateView,
    parts: &AttributePartition,
    settings: &Settings,
    timings: &mut Vec<(Phase, Duration)>,
) -> Result<(usize, Vec<ExplanationCandidate>)> {
    let start = Instant::now();
    let mining = parts.mining_attrs();
    let mined = mine_grouping_patterns(d, view, &mining, settings.tau).phase(Phase::GroupMining)?;
    let patterns = dedup_grouping(&mined, d, &parts.grouping, view).phase(Phase::GroupMining)?;
    timings.push((Phase::GroupMining, start.elapsed()));

    let start = Instant::now();
    let cands = build_candidates(
        d,
        view,
        &parts.grouping,
        &parts.treatment,
        &patterns,
        dag,
        settings.treatment_config(),
    )
    .phase(Phase::TreatmentMining)?;
    timings.push((Phase::TreatmentMining, start.elapsed()));
    Ok((patterns.len(), cands))
}

/// Outcome of the selection step: `None` means no feasible selection exists.
pub fn select(ilp: &IlpInstance, algorithm: Algorithm, seed: u64) -> Result<(Option<Selection>, Option<f64>)> {
    match algorithm {
        Algorithm::Causumx => match solve_lp_relaxation(ilp)? {
            None => Ok((None, None)),
            Some(frac) => {
                let picked = randomized_rounding(&frac, ilp.k, seed);
                let sel = Selection {
                    weight: ilp.weight_of(&picked),
                    covered: ilp.covered_by(&picked),
                    indices: picked,
                };
                Ok((Some(sel), Some(frac.objective)))
            }
        },
        Algorithm::Greedy => Ok((Some(greedy_select(ilp)), None)),
        Algorithm::Bruteforce => Ok((solve_ilp_exact(ilp)?, None)),
    }
}

fn explain_in_pool(d: &Dataset, dag: &CausalDag, q: &QuerySpec, settings: &Settings) -> Result<SummaryReport> {
    let mut timings = Vec::new();

    let start = Instant::now();
    let view = evaluate_query(d, q).phase(Phase::Query)?;
    timings.push((Phase::Query, start.elapsed()));

    let start = Instant::now();
    let parts = partition(d, q, settings).phase(Phase::Partition)?;
    timings.push((Phase::Partition, start.elapsed()));

    let (pattern_count, cands) = match settings.algorithm {
        Algorithm::Bruteforce => {
            let start = Instant::now();
            let cands = brute_force_candidates(d, dag, &view, &parts, settings).phase(Phase::TreatmentMining)?;
            timings.push((Phase::TreatmentMining, start.elapsed()));
            (cands.len(), cands)
        }
        _ => mine_candidates(d, dag, &view, &parts, settings, &mut timings)?,
    };

    let start = Instant::now();
    let ilp = build_ilp(&cands, view.m(), settings.k, settings.theta).phase(Phase::Selection)?;
    let (selection, lp_objective) = select(&ilp, settings.algorithm, settings.seed).phase(Phase::Selection)?;
    timings.push((Phase::Selection, start.elapsed()));

    Ok(SummaryReport::new(
        q.clone(),
        settings.clone(),
        view,
        parts.grouping,
        pattern_count,
        cands,
        selection,
        lp_objective,
        timings,
    ))
}
