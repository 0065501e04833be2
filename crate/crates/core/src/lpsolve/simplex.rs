//! Dense two-phase primal simplex for small LPs with bounded variables.
//!
//! Maximizes `c·x` subject to row constraints and `0 <= x_j <= upper_j`.
//! Nonbasic variables sit at either bound; Bland's smallest-index rule picks
//! entering and leaving variables, which rules out cycling.

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coefs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Per-variable upper bound; `f64::INFINITY` for none.
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, upper: Vec<f64>) -> LinearProgram {
        assert_eq!(objective.len(), upper.len());
        LinearProgram {
            objective,
            upper,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coefs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coefs, relation, rhs });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    /// Values of the basic variables, by row.
    values: Vec<f64>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    enterable: Vec<bool>,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn run(&mut self, cost: &[f64]) -> Result<Phase> {
        let ncols = self.upper.len();
        let max_iter = 50_000 + 100 * ncols * self.rows.len().max(1);
        for _ in 0..max_iter {
            // reduced costs
            let mut entering = None;
            for j in 0..ncols {
                if self.is_basic[j] || !self.enterable[j] {
                    continue;
                }
                let mut d = cost[j];
                for (r, row) in self.rows.iter().enumerate() {
                    d -= cost[self.basis[r]] * row[j];
                }
                if (!self.at_upper[j] && d > TOL && self.upper[j] > 0.0) || (self.at_upper[j] && d < -TOL) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(Phase::Optimal) };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            let mut step = self.upper[j];
            let mut leaving: Option<(usize, bool)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let alpha = row[j] * dir;
                let b = self.basis[r];
                let (limit, to_upper) = if alpha > TOL {
                    (self.values[r].max(0.0) / alpha, false)
                } else if alpha < -TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.values[r]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = match leaving {
                    None => limit < step || (limit == step && step.is_finite()),
                    Some((lr, _)) => limit < step || (limit == step && b < self.basis[lr]),
                };
                if better {
                    step = limit;
                    leaving = Some((r, to_upper));
                }
            }
            if step.is_infinite() {
                return Ok(Phase::Unbounded);
            }
            for (r, row) in self.rows.iter().enumerate() {
                self.values[r] -= step * row[j] * dir;
            }
            match leaving {
                None => {
                    // bound flip, basis unchanged
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let entering_value = if dir > 0.0 { step } else { self.upper[j] - step };
                    let out = self.basis[r];
                    self.is_basic[out] = false;
                    self.at_upper[out] = to_upper;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.basis[r] = j;
                    self.values[r] = entering_value;
                    self.pivot(r, j);
                }
            }
        }
        Err(Error::Solver("simplex iteration limit reached".into()))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
    }

    fn value_of(&self, j: usize) -> f64 {
        if self.is_basic[j] {
            let r = self.basis.iter().position(|&b| b == j).unwrap();
            self.values[r]
        } else if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.objective.len();
    for (j, &u) in lp.upper.iter().enumerate() {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Solver(format!("variable {j} has invalid upper bound {u}")));
        }
    }
    let m = lp.constraints.len();
    let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();

    // rows over structural + slack columns; artificials appended below
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut slack_col = Vec::with_capacity(m);
    let mut next_slack = n;
    for c in &lp.constraints {
        let mut row = vec![0.0; n + n_slack];
        for &(j, a) in &c.coefs {
            if j >= n {
                return Err(Error::Solver(format!("constraint references variable {j} of {n}")));
            }
            row[j] += a;
        }
        let slack = match c.relation {
            Relation::Le => Some((next_slack, 1.0)),
            Relation::Ge => Some((next_slack, -1.0)),
            Relation::Eq => None,
        };
        if let Some((s, sign)) = slack {
            row[s] = sign;
            next_slack += 1;
        }
        let mut b = c.rhs;
        if b < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
            b = -b;
        }
        slack_col.push(slack.map(|(s, _)| s));
        rows.push(row);
        rhs.push(b);
    }

    let mut basis = Vec::with_capacity(m);
    let mut artificials = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        match slack_col[r] {
            Some(s) if row[s] > 0.0 => basis.push(s),
            _ => {
                basis.push(n + n_slack + artificials.len());
                artificials.push(r);
            }
        }
    }
    let total = n + n_slack + artificials.len();
    for row in &mut rows {
        row.resize(total, 0.0);
    }
    for (k, &r) in artificials.iter().enumerate() {
        rows[r][n + n_slack + k] = 1.0;
    }

    let mut upper = lp.upper.clone();
    upper.resize(total, f64::INFINITY);
    let mut is_basic = vec![false; total];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut t = Tableau {
        rows,
        upper,
        basis,
        values: rhs,
        at_upper: vec![false; total],
        is_basic,
        enterable: vec![true; total],
    };

    if !artificials.is_empty() {
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(n + n_slack) {
            *c = -1.0;
        }
        t.run(&cost)?;
        let infeasibility: f64 = (n + n_slack..total).map(|j| t.value_of(j)).sum();
        if infeasibility > FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        for j in n + n_slack..total {
            t.upper[j] = 0.0;
            t.enterable[j] = false;
        }
    }

    let mut cost = lp.objective.clone();
    cost.resize(total, 0.0);
    match t.run(&cost)? {
        Phase::Unbounded => Ok(LpOutcome::Unbounded),
        Phase::Optimal => {
            let x: Vec<f64> = (0..n)
                .map(|j| t.value_of(j).clamp(0.0, lp.upper[j]))
                .collect();
            let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
            Ok(LpOutcome::Optimal { x, objective })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimum(lp: &LinearProgram) -> (Vec<f64>, f64) {
        match solve(lp).unwrap() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![3.0, 5.0], vec![f64::INFINITY; 2]);
        lp.add(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let (x, obj) = optimum(&lp);
        assert!((obj - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_and_ge_rows() {
        // max x + y, x,y in [0,1], x + y >= 1.5 -> 2
        let mut lp = LinearProgram::new(vec![1.0, 1.0], vec![1.0, 1.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 1.5);
        assert!((optimum(&lp).1 - 2.0).abs() < 1e-9);
        // min x (max -x) subject to x + y >= 1.5 -> x = 0.5
        let mut lp = LinearProgram::new(vec![-1.0, 0.0], vec![1.0, 1.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 1.5);
        let (x, _) = optimum(&lp);
        assert!((x[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0], vec![1.0]);
        lp.add(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(vec![1.0, 0.0], vec![f64::INFINITY; 2]);
        lp.add(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_rows() {
        // max x + 2y, x + y = 1, bounds [0, 1]
        let mut lp = LinearProgram::new(vec![1.0, 2.0], vec![1.0, 1.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        let (x, obj) = optimum(&lp);
        assert!((obj - 2.0).abs() < 1e-9);
        assert!(x[0].abs() < 1e-9);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic cycling example under the largest-coefficient rule (Beale)
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0], vec![f64::INFINITY; 4]);
        lp.add(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        lp.add(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        lp.add(vec![(2, 1.0)], Relation::Le, 1.0);
        let (_, obj) = optimum(&lp);
        assert!((obj - 0.05).abs() < 1e-9);
    }
}
