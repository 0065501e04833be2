//! Least squares by Householder QR, processing columns in the given order and
//! dropping any column that is (numerically) a combination of earlier ones.

/// Relative residual norm below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Coefficient per input column; `None` for dropped columns.
    pub beta: Vec<Option<f64>>,
    /// Residual sum of squares.
    pub rss: f64,
    /// Number of kept columns.
    pub rank: usize,
    /// Absolute value of the last diagonal entry of R, when the last input
    /// column was kept. `(XᵀX)⁻¹` at that coefficient is `1 / r_last²`.
    pub r_last: Option<f64>,
}

struct Reflector {
    /// Row offset the reflector acts from.
    offset: usize,
    /// Unit vector over rows `offset..`.
    v: Vec<f64>,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.offset..];
        let dot: f64 = self.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
        let s = 2.0 * dot;
        for (xi, vi) in tail.iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large magnitudes
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

/// Fits `y ~ columns` (no implicit intercept). Columns are column-major,
/// each of length `y.len()`.
pub fn fit(columns: &[Vec<f64>], y: &[f64]) -> OlsFit {
    let n = y.len();
    let mut reflectors: Vec<Reflector> = Vec::new();
    // R stored by kept column: entries 0..=rank
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();

    for (j, col) in columns.iter().enumerate() {
        debug_assert_eq!(col.len(), n);
        let orig = norm(col);
        let rank = kept.len();
        if orig == 0.0 || rank >= n {
            continue;
        }
        let mut a = col.clone();
        for h in &reflectors {
            h.apply(&mut a);
        }
        let resid = norm(&a[rank..]);
        if resid <= RANK_TOL * orig {
            continue;
        }
        let alpha = if a[rank] > 0.0 { -resid } else { resid };
        let mut v = a[rank..].to_vec();
        v[0] -= alpha;
        let vn = norm(&v);
        for vi in &mut v {
            *vi /= vn;
        }
        let mut r = a[..rank].to_vec();
        r.push(alpha);
        r_cols.push(r);
        reflectors.push(Reflector { offset: rank, v });
        kept.push(j);
    }

    let mut qty = y.to_vec();
    for h in &reflectors {
        h.apply(&mut qty);
    }
    let rank = kept.len();
    let rss = qty[rank..].iter().map(|v| v * v).sum();

    // back substitution on the upper-triangular R
    let mut coef = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = qty[i];
        for (k, c) in coef.iter().enumerate().skip(i + 1) {
            s -= r_cols[k][i] * c;
        }
        coef[i] = s / r_cols[i][i];
    }

    let mut beta = vec![None; columns.len()];
    for (pos, &j) in kept.iter().enumerate() {
        beta[j] = Some(coef[pos]);
    }
    let last_kept = kept.last().is_some_and(|&j| j + 1 == columns.len());
    OlsFit {
        beta,
        rss,
        rank,
        r_last: last_kept.then(|| r_cols[rank - 1][rank - 1].abs()),
    }
}
