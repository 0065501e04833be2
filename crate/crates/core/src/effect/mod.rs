//! Treatment assignment and conditional average treatment effects.
//!
//! A treatment pattern splits a subpopulation into treated rows (pattern
//! holds) and control rows. The effect is the coefficient of the treatment
//! indicator in an ordinary least squares fit of the outcome on
//! `[intercept, confounders..., T]`, where the confounders are the DAG
//! parents of the treatment attributes. Categorical confounders are one-hot
//! encoded with the smallest present level as reference.

pub mod ols;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::dag::CausalDag;
use crate::error::{Error, Result};
use crate::patterns::Pattern;
use crate::tabular::{AggregateView, Column, Dataset, MISSING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CateEstimate {
    pub cate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub n_used: usize,
}

/// Why an estimate was not produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Skip {
    /// One arm has fewer than `min_arm` rows.
    Overlap,
    /// The treatment indicator is spanned by the other design columns, or
    /// no residual degrees of freedom remain.
    Collinear,
    EmptySubpopulation,
}

pub type Estimate = std::result::Result<CateEstimate, Skip>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectConfig {
    /// Rows beyond this are subsampled before estimation.
    pub sample_size: usize,
    /// Minimum rows per arm.
    pub min_arm: usize,
    pub seed: u64,
}

impl Default for EffectConfig {
    fn default() -> Self {
        EffectConfig {
            sample_size: 1_000_000,
            min_arm: 10,
            seed: 0,
        }
    }
}

pub fn assign_treatment(d: &Dataset, rows: &[usize], pt: &Pattern) -> Result<Vec<bool>> {
    let compiled = pt.compile(d)?;
    Ok(rows.iter().map(|&r| compiled.matches(r)).collect())
}

/// Uniform sample of `max_n` rows without replacement, in ascending row
/// order; `rows` unchanged when it is already small enough.
pub fn sample_rows(rows: &[usize], max_n: usize, seed: u64) -> Vec<usize> {
    assert!(max_n >= 1, "sample size must be positive");
    if rows.len() <= max_n {
        return rows.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, rows.len(), max_n)
        .into_iter()
        .collect();
    picked.sort_unstable();
    picked.into_iter().map(|i| rows[i]).collect()
}

/// Seed for one (grouping, treatment) estimate, independent of scheduling.
pub fn derive_seed(run_seed: u64, pg: &Pattern, pt: &Pattern) -> u64 {
    let mut h = DefaultHasher::new();
    run_seed.hash(&mut h);
    pg.hash(&mut h);
    pt.hash(&mut h);
    h.finish()
}

/// Two-sided Student-t tail probability `P(|T_df| >= |t|)`.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Regresses the outcome on `[1, confounders..., treated]` over `rows` and
/// reports the treatment coefficient. Rows missing any confounder are dropped.
pub fn regress_effect(
    d: &Dataset,
    rows: &[usize],
    treated: &[bool],
    outcome: &str,
    confounders: &[String],
    min_arm: usize,
) -> Result<Estimate> {
    assert_eq!(rows.len(), treated.len());
    if rows.is_empty() {
        return Ok(Err(Skip::EmptySubpopulation));
    }
    let y_col = d.index_of(outcome)?;
    let z_cols: Vec<&Column> = confounders
        .iter()
        .map(|z| d.column_by_name(z))
        .collect::<Result<_>>()?;

    let keep: Vec<usize> = (0..rows.len())
        .filter(|&i| {
            let r = rows[i];
            d.number(y_col, r).is_some() && z_cols.iter().all(|c| !c.is_missing(r))
        })
        .collect();
    if keep.is_empty() {
        return Ok(Err(Skip::EmptySubpopulation));
    }
    let n_treated = keep.iter().filter(|&&i| treated[i]).count();
    let n_control = keep.len() - n_treated;
    if n_treated < min_arm.max(1) || n_control < min_arm.max(1) {
        return Ok(Err(Skip::Overlap));
    }

    let n = keep.len();
    let mut design: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for col in &z_cols {
        match col {
            Column::Numeric { values, .. } => {
                design.push(keep.iter().map(|&i| values[rows[i]].unwrap()).collect());
            }
            Column::Categorical { codes, .. } => {
                let mut levels: Vec<u32> = keep.iter().map(|&i| codes[rows[i]]).collect();
                levels.sort_unstable();
                levels.dedup();
                debug_assert!(!levels.contains(&MISSING));
                for &level in levels.iter().skip(1) {
                    design.push(
                        keep.iter()
                            .map(|&i| if codes[rows[i]] == level { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }
    design.push(keep.iter().map(|&i| if treated[i] { 1.0 } else { 0.0 }).collect());
    let y: Vec<f64> = keep.iter().map(|&i| d.number(y_col, rows[i]).unwrap()).collect();

    let fit = ols::fit(&design, &y);
    let Some(r_last) = fit.r_last else {
        return Ok(Err(Skip::Collinear));
    };
    if fit.rank >= n {
        return Ok(Err(Skip::Collinear));
    }
    let df = (n - fit.rank) as f64;
    let cate = fit.beta[design.len() - 1].unwrap();
    let sigma2 = fit.rss / df;
    let std_error = sigma2.sqrt() / r_last;
    if !cate.is_finite() || !std_error.is_finite() {
        return Err(Error::Estimation(format!("non-finite coefficient {cate} (se {std_error})")));
    }
    let p_value = if std_error == 0.0 {
        if cate == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        two_sided_p(cate / std_error, df)
    };
    Ok(Ok(CateEstimate {
        cate,
        std_error,
        p_value,
        n_treated,
        n_control,
        n_used: n,
    }))
}

/// Estimates the effect of `pt` on the outcome within `rows`, a grouping
/// pattern's subpopulation.
pub struct CateEstimator<'a> {
    pub dataset: &'a Dataset,
    pub dag: &'a CausalDag,
    pub outcome: &'a str,
    pub config: EffectConfig,
}

impl CateEstimator<'_> {
    pub fn estimate(&self, rows: &[usize], pg: &Pattern, pt: &Pattern) -> Result<Estimate> {
        if rows.is_empty() {
            return Ok(Err(Skip::EmptySubpopulation));
        }
        let sample = sample_rows(rows, self.config.sample_size, derive_seed(self.config.seed, pg, pt));
        let treated = assign_treatment(self.dataset, &sample, pt)?;
        let confounders = if pt.is_empty() {
            Vec::new()
        } else {
            self.dag.adjustment_set(&pt.attrs(), self.outcome)?
        };
        // DAG nodes without a column cannot be adjusted for
        let confounders: Vec<String> = confounders.into_iter().filter(|z| self.dataset.has(z)).collect();
        regress_effect(self.dataset, &sample, &treated, self.outcome, &confounders, self.config.min_arm)
    }
}

/// Effect of `pt` on the view's averaged attribute among the view's rows
/// satisfying `pg`.
pub fn estimate_cate(
    d: &Dataset,
    view: &AggregateView,
    pg: &Pattern,
    pt: &Pattern,
    dag: &CausalDag,
    config: EffectConfig,
) -> Result<Estimate> {
    let rows = pg.compile(d)?.filter(&view.rows);
    CateEstimator {
        dataset: d,
        dag,
        outcome: &view.avg_attr,
        config,
    }
    .estimate(&rows, pg, pt)
}
