//! Selection of at most `k` explanations covering at least a `theta` share of
//! the groups with maximum total weight.
//!
//! The integer program has a 0/1 variable `g_j` per candidate and `t_i` per
//! group (`t_i <= sum of g_j over candidates covering i`). Groups with the
//! same covering set are interchangeable, so the relaxation is solved over
//! one variable per covering class, which keeps it small even for very many
//! groups.

pub mod simplex;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treatmine::ExplanationCandidate;
use simplex::{LinearProgram, LpOutcome, Relation};

/// Largest instance `solve_ilp_exact` accepts.
pub const EXACT_MAX_CANDIDATES: usize = 25;
pub const EXACT_MAX_K: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct IlpInstance {
    pub weights: Vec<f64>,
    /// Per candidate, the covered group indices (ascending).
    pub coverage: Vec<Vec<usize>>,
    pub m: usize,
    pub k: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub g: Vec<f64>,
    pub t: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Candidate indices, ascending.
    pub indices: Vec<usize>,
    pub weight: f64,
    pub covered: usize,
}

pub fn build_ilp(cands: &[ExplanationCandidate], m: usize, k: usize, theta: f64) -> Result<IlpInstance> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta must be in [0, 1], got {theta}")));
    }
    for c in cands {
        if let Some(&i) = c.covered.iter().find(|&&i| i >= m) {
            return Err(Error::Solver(format!("candidate covers group {i} of {m}")));
        }
    }
    Ok(IlpInstance {
        weights: cands.iter().map(|c| c.weight).collect(),
        coverage: cands.iter().map(|c| c.covered.clone()).collect(),
        m,
        k,
        theta,
    })
}

impl IlpInstance {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Groups a feasible selection must cover.
    pub fn required(&self) -> usize {
        ((self.theta * self.m as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn covered_by(&self, selection: &[usize]) -> usize {
        let mut hit = vec![false; self.m];
        for &j in selection {
            for &i in &self.coverage[j] {
                hit[i] = true;
            }
        }
        hit.iter().filter(|&&h| h).count()
    }

    pub fn weight_of(&self, selection: &[usize]) -> f64 {
        selection.iter().map(|&j| self.weights[j]).sum()
    }

    pub fn is_feasible(&self, selection: &[usize]) -> bool {
        selection.len() <= self.k && self.covered_by(selection) >= self.required()
    }

    fn selection(&self, mut indices: Vec<usize>) -> Selection {
        indices.sort_unstable();
        indices.dedup();
        Selection {
            weight: self.weight_of(&indices),
            covered: self.covered_by(&indices),
            indices,
        }
    }

    /// Covering classes: (candidate set, member groups).
    fn classes(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut sig: Vec<Vec<usize>> = vec![Vec::new(); self.m];
        for (j, cov) in self.coverage.iter().enumerate() {
            for &i in cov {
                sig[i].push(j);
            }
        }
        let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, s) in sig.into_iter().enumerate() {
            classes.entry(s).or_default().push(i);
        }
        classes.into_iter().collect()
    }
}

/// Optimal solution of the LP relaxation, or `None` when even the
/// relaxation is infeasible.
pub fn solve_lp_relaxation(ilp: &IlpInstance) -> Result<Option<FractionalSolution>> {
    let l = ilp.len();
    let classes = ilp.classes();
    let nvars = l + classes.len();
    let mut objective = ilp.weights.clone();
    objective.resize(nvars, 0.0);
    let mut upper = vec![1.0; l];
    for (members_of, members) in &classes {
        // uncovered groups can never count
        upper.push(if members_of.is_empty() { 0.0 } else { members.len() as f64 });
    }
    let mut lp = LinearProgram::new(objective, upper);
    lp.add((0..l).map(|j| (j, 1.0)).collect(), Relation::Le, ilp.k as f64);
    for (c, (members_of, members)) in classes.iter().enumerate() {
        if members_of.is_empty() {
            continue;
        }
        let n_c = members.len() as f64;
        let mut row = vec![(l + c, 1.0)];
        row.extend(members_of.iter().map(|&j| (j, -n_c)));
        lp.add(row, Relation::Le, 0.0);
    }
    lp.add((l..nvars).map(|v| (v, 1.0)).collect(), Relation::Ge, ilp.theta * ilp.m as f64);

    match simplex::solve(&lp)? {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Solver("selection relaxation is unbounded".into())),
        LpOutcome::Optimal { x, objective } => {
            let g: Vec<f64> = x[..l]
                .iter()
                .map(|&v| if v < 1e-12 { 0.0 } else { v.min(1.0) })
                .collect();
            let mut t = vec![0.0; ilp.m];
            for (c, (_, members)) in classes.iter().enumerate() {
                let share = (x[l + c] / members.len() as f64).clamp(0.0, 1.0);
                for &i in members {
                    t[i] = share;
                }
            }
            Ok(Some(FractionalSolution { g, t, objective }))
        }
    }
}

/// `k` independent draws, each picking candidate `j` with probability
/// `g_j / k` (and nothing with the leftover probability). Repeated picks
/// collapse. Deterministic for a fixed seed.
pub fn randomized_rounding(frac: &FractionalSolution, k: usize, seed: u64) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for _ in 0..k {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (j, &g) in frac.g.iter().enumerate() {
            acc += g / k as f64;
            if u < acc {
                picked.push(j);
                break;
            }
        }
    }
    picked.sort_unstable();
    picked.dedup();
    picked
}

/// Greedy baseline: while budget remains, take the heaviest candidate that
/// still adds coverage when the target is unmet, otherwise the heaviest left.
/// Coverage is not guaranteed.
pub fn greedy_select(ilp: &IlpInstance) -> Selection {
    let required = ilp.required();
    let mut chosen = vec![false; ilp.len()];
    let mut hit = vec![false; ilp.m];
    let mut covered = 0;
    let mut sel = Vec::new();
    while sel.len() < ilp.k {
        let heaviest = |need_gain: bool| {
            (0..ilp.len())
                .filter(|&j| !chosen[j])
                .filter(|&j| !need_gain || ilp.coverage[j].iter().any(|&i| !hit[i]))
                .fold(None, |best: Option<usize>, j| match best {
                    Some(b) if ilp.weights[b] >= ilp.weights[j] => Some(b),
                    _ => Some(j),
                })
        };
        let next = if covered < required {
            heaviest(true).or_else(|| heaviest(false))
        } else {
            heaviest(false)
        };
        let Some(j) = next else { break };
        chosen[j] = true;
        sel.push(j);
        for &i in &ilp.coverage[j] {
            if !hit[i] {
                hit[i] = true;
                covered += 1;
            }
        }
    }
    ilp.selection(sel)
}

/// Exhaustive optimum over all subsets of size at most `k`; `None` when no
/// subset reaches the coverage target. Ties keep the lexicographically first
/// subset.
pub fn solve_ilp_exact(ilp: &IlpInstance) -> Result<Option<Selection>> {
    let l = ilp.len();
    let k = ilp.k.min(l);
    if l > EXACT_MAX_CANDIDATES || k > EXACT_MAX_K {
        return Err(Error::Size(format!(
            "exact selection supports at most {EXACT_MAX_CANDIDATES} candidates and k <= {EXACT_MAX_K}, got {l} and {k}"
        )));
    }
    // work on covering classes as bitsets over classes with their sizes
    let classes = ilp.classes();
    let words = classes.len().div_ceil(64).max(1);
    let sizes: Vec<usize> = classes.iter().map(|(_, g)| g.len()).collect();
    let mut masks = vec![vec![0u64; words]; l];
    for (c, (members_of, _)) in classes.iter().enumerate() {
        for &j in members_of {
            masks[j][c / 64] |= 1 << (c % 64);
        }
    }
    let count = |mask: &[u64]| -> usize {
        let mut n = 0;
        for (w, &bits) in mask.iter().enumerate() {
            let mut b = bits;
            while b != 0 {
                let t = b.trailing_zeros() as usize;
                n += sizes[w * 64 + t];
                b &= b - 1;
            }
        }
        n
    };

    struct Search<'s> {
        weights: &'s [f64],
        masks: &'s [Vec<u64>],
        k: usize,
        required: usize,
        best: Option<(f64, Vec<usize>)>,
    }
    fn dfs(s: &mut Search, count: &dyn Fn(&[u64]) -> usize, start: usize, cur: &mut Vec<usize>, mask: &[u64], w: f64) {
        if count(mask) >= s.required && s.best.as_ref().is_none_or(|(bw, _)| w > *bw) {
            s.best = Some((w, cur.clone()));
        }
        if cur.len() == s.k {
            return;
        }
        for j in start..s.weights.len() {
            let next: Vec<u64> = mask.iter().zip(&s.masks[j]).map(|(a, b)| a | b).collect();
            cur.push(j);
            dfs(s, count, j + 1, cur, &next, w + s.weights[j]);
            cur.pop();
        }
    }
    let mut s = Search {
        weights: &ilp.weights,
        masks: &masks,
        k,
        required: ilp.required(),
        best: None,
    };
    dfs(&mut s, &count, 0, &mut Vec::new(), &vec![0u64; words], 0.0);
    Ok(s.best.map(|(_, idx)| ilp.selection(idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(weights: &[f64], coverage: &[&[usize]], m: usize, k: usize, theta: f64) -> IlpInstance {
        IlpInstance {
            weights: weights.to_vec(),
            coverage: coverage.iter().map(|c| c.to_vec()).collect(),
            m,
            k,
            theta,
        }
    }

    #[test]
    fn coverage_forces_lighter_pick() {
        // heaviest alone covers 2 of 4; the pair of lighter ones covers all
        let ilp = instance(&[10.0, 4.0, 4.0], &[&[0, 1], &[0, 1], &[2, 3]], 4, 2, 1.0);
        let best = solve_ilp_exact(&ilp).unwrap().unwrap();
        assert_eq!(best.indices, [0, 2]);
        assert_eq!(best.covered, 4);
        let frac = solve_lp_relaxation(&ilp).unwrap().unwrap();
        assert!(frac.objective >= best.weight - 1e-9);
        assert!((frac.objective - 14.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_instances() {
        let ilp = instance(&[1.0], &[&[0]], 3, 1, 0.9);
        assert!(solve_ilp_exact(&ilp).unwrap().is_none());
        assert!(solve_lp_relaxation(&ilp).unwrap().is_none());
        let empty = instance(&[], &[], 3, 2, 0.5);
        assert!(solve_lp_relaxation(&empty).unwrap().is_none());
        assert!(solve_ilp_exact(&empty).unwrap().is_none());
    }

    #[test]
    fn theta_zero_is_pure_weight() {
        let ilp = instance(&[1.0, 3.0, 2.0], &[&[0], &[0], &[1]], 2, 2, 0.0);
        assert_eq!(solve_ilp_exact(&ilp).unwrap().unwrap().indices, [1, 2]);
        assert_eq!(greedy_select(&ilp).indices, [1, 2]);
    }

    #[test]
    fn greedy_prefers_gain_until_covered() {
        let ilp = instance(&[10.0, 9.0, 1.0], &[&[0], &[0], &[1]], 2, 2, 1.0);
        let g = greedy_select(&ilp);
        assert_eq!(g.indices, [0, 2]);
        assert!(ilp.is_feasible(&g.indices));
    }

    #[test]
    fn rounding_is_deterministic_and_respects_support() {
        let frac = FractionalSolution {
            g: vec![0.0, 1.0, 0.5, 0.0],
            t: vec![],
            objective: 0.0,
        };
        let a = randomized_rounding(&frac, 2, 7);
        assert_eq!(a, randomized_rounding(&frac, 2, 7));
        assert!(a.iter().all(|&j| j == 1 || j == 2));
        assert!(a.len() <= 2);
        let mut counts = [0usize; 4];
        for seed in 0..2000 {
            for j in randomized_rounding(&frac, 2, seed) {
                counts[j] += 1;
            }
        }
        // P(j picked) = 1 - (1 - g_j / k)^k
        assert!((counts[1] as f64 / 2000.0 - 0.75).abs() < 0.05);
        assert!((counts[2] as f64 / 2000.0 - 0.4375).abs() < 0.05);
    }

    #[test]
    fn exact_rejects_large_instances() {
        let ilp = instance(&vec![1.0; 30], &vec![&[0usize][..]; 30], 1, 3, 0.0);
        assert!(matches!(solve_ilp_exact(&ilp), Err(Error::Size(_))));
    }

    #[test]
    fn class_aggregation_matches_per_group_values() {
        let ilp = instance(&[2.0, 1.0], &[&[0, 1, 2], &[3]], 5, 1, 0.6);
        let frac = solve_lp_relaxation(&ilp).unwrap().unwrap();
        assert_eq!(frac.t.len(), 5);
        assert_eq!(frac.t[4], 0.0);
        // groups in one class share a value
        assert_eq!(frac.t[0], frac.t[1]);
        let covered: f64 = frac.t.iter().sum();
        assert!(covered >= 3.0 - 1e-7);
        for (i, &t) in frac.t.iter().enumerate() {
            let cap: f64 = (0..2).filter(|&j| ilp.coverage[j].contains(&i)).map(|j| frac.g[j]).sum();
            assert!(t <= cap.min(1.0) + 1e-7);
        }
    }

    #[test]
    fn documented_examples() {
        let ilp = instance(&[5.0, 3.0, 2.0], &[&[0, 1], &[1, 2], &[2]], 3, 2, 1.0);
        let exact = solve_ilp_exact(&ilp).unwrap().unwrap();
        assert_eq!(exact.indices, [0, 1]);
        assert_eq!(exact.weight, 8.0);
        assert_eq!(greedy_select(&ilp).indices, [0, 1]);

        let single = instance(&[7.0], &[&[0, 1, 2]], 3, 1, 1.0);
        let frac = solve_lp_relaxation(&single).unwrap().unwrap();
        assert!((frac.g[0] - 1.0).abs() < 1e-9);
        assert!((frac.objective - 7.0).abs() < 1e-9);

        let zero_k = instance(&[7.0], &[&[0, 1, 2]], 3, 0, 0.5);
        assert!(solve_lp_relaxation(&zero_k).unwrap().is_none());

        let all = instance(&[1.0, 2.0, 3.0], &[&[0], &[1], &[2]], 3, 5, 0.0);
        assert_eq!(greedy_select(&all).indices, [0, 1, 2]);
    }

    #[test]
    fn concentrated_mass_is_always_picked() {
        let frac = FractionalSolution {
            g: vec![1.0, 0.0, 0.0],
            t: vec![],
            objective: 0.0,
        };
        for seed in 0..100 {
            assert_eq!(randomized_rounding(&frac, 1, seed), [0]);
        }
    }
}
