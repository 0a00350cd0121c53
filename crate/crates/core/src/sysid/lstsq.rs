//! Dense least squares by Householder QR on column-scaled regressors.

/// Solution of `min ‖X·β − y‖²` (optionally with a ridge penalty).
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub coef: Vec<f64>,
    /// Standard error of each coefficient.
    pub std_errors: Vec<f64>,
    /// `sqrt(RSS / N)` on the unaugmented data.
    pub residual_rms: f64,
    /// `|R_jj| / sqrt(N)` of the scaled problem, one per column.
    pub column_strength: Vec<f64>,
}

/// Failure of the rank test: indices of columns with no independent content.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDeficient(pub Vec<usize>);

/// Solves the least-squares problem for `columns` (each of length N) against `targets`.
///
/// Columns are scaled to unit RMS before the decomposition and the
/// coefficients are unscaled on output. A column whose scaled diagonal
/// `|R_jj|/sqrt(N)` falls below `rank_tol` is reported as deficient.
pub fn least_squares(
    columns: &[Vec<f64>],
    targets: &[f64],
    ridge: f64,
    rank_tol: f64,
) -> Result<LstsqSolution, RankDeficient> {
    let p = columns.len();
    let n = targets.len();
    assert!(columns.iter().all(|c| c.len() == n), "column length mismatch");

    let scales: Vec<f64> = columns.iter().map(|c| (c.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()).collect();
    let zero: Vec<usize> = (0..p).filter(|&j| !(scales[j] > 0.0 && scales[j].is_finite())).collect();
    if !zero.is_empty() || n < p {
        return Err(RankDeficient(if zero.is_empty() { (0..p).collect() } else { zero }));
    }

    let extra = if ridge > 0.0 { p } else { 0 };
    let rows = n + extra;
    let mut a: Vec<Vec<f64>> = columns
        .iter()
        .zip(&scales)
        .enumerate()
        .map(|(j, (c, s))| {
            let mut col: Vec<f64> = c.iter().map(|v| v / s).collect();
            if extra > 0 {
                col.extend((0..p).map(|i| if i == j { ridge.sqrt() } else { 0.0 }));
            }
            col
        })
        .collect();
    let mut b: Vec<f64> = targets.to_vec();
    b.resize(rows, 0.0);

    // in-place Householder; R ends up in the upper triangle of `a`
    for j in 0..p {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(j) {
            let dot: f64 = v.iter().zip(&col[j..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, x) in col[j..].iter_mut().zip(&v) {
                *c -= f * x;
            }
        }
        let dot: f64 = v.iter().zip(&b[j..]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, x) in b[j..].iter_mut().zip(&v) {
            *c -= f * x;
        }
    }

    let sqrt_n = (n as f64).sqrt();
    let column_strength: Vec<f64> = (0..p).map(|j| a[j][j].abs() / sqrt_n).collect();
    let deficient: Vec<usize> = (0..p).filter(|&j| !(column_strength[j] >= rank_tol)).collect();
    if !deficient.is_empty() {
        return Err(RankDeficient(deficient));
    }

    // back substitution R·β = Qᵀy, and R⁻¹ for the covariance
    let r = |i: usize, j: usize| a[j][i];
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| r(i, k) * beta[k]).sum();
        beta[i] = (b[i] - s) / r(i, i);
    }
    let mut rinv = vec![vec![0.0; p]; p];
    for c in 0..p {
        for i in (0..=c).rev() {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=c).map(|k| r(i, k) * rinv[k][c]).sum();
            rinv[i][c] = (rhs - s) / r(i, i);
        }
    }

    let coef: Vec<f64> = beta.iter().zip(&scales).map(|(b, s)| b / s).collect();
    let rss: f64 = (0..n)
        .map(|i| {
            let pred: f64 = columns.iter().zip(&coef).map(|(c, k)| c[i] * k).sum();
            (targets[i] - pred).powi(2)
        })
        .sum();
    let sigma2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let std_errors = (0..p).map(|j| (sigma2 * rinv[j].iter().map(|v| v * v).sum::<f64>()).sqrt() / scales[j]).collect();

    Ok(LstsqSolution { coef, std_errors, residual_rms: (rss / n as f64).sqrt(), column_strength })
}
