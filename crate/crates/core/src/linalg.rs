//! Thin wrappers over the factorizations used by the TT sweeps. Storage is
//! nalgebra; SVDs are delegated to faer, whose bidiagonal solver stays
//! accurate on exactly rank-deficient input where nalgebra's loses the
//! dominant singular triple.

use nalgebra::DMatrix;

/// How many singular vectors to keep.
#[derive(Debug, Clone, Copy)]
pub enum Truncation {
    /// Keep every singular vector, including numerically zero ones.
    Full,
    /// Keep the fewest vectors whose discarded tail has Frobenius norm at most the bound.
    Tail(f64),
    /// Keep vectors with `sigma > rel * sigma_max`.
    Relative(f64),
}

pub struct SvdSplit {
    /// Left factor with orthonormal columns.
    pub u: DMatrix<f64>,
    /// `S V^T` for the kept vectors.
    pub sv: DMatrix<f64>,
    /// All singular values in decreasing order.
    pub sigma: Vec<f64>,
    /// Number of singular values above the rule, before clamping to at least one.
    pub kept: usize,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Truncated SVD `m ~ u * sv`. At least one vector is always kept so shapes stay valid.
pub fn svd_split(m: &DMatrix<f64>, rule: Truncation) -> SvdSplit {
    let (rows, cols) = m.shape();
    let svd = to_faer(m).thin_svd().expect("SVD converges");
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| s[k]).collect();
    let kept = match rule {
        Truncation::Full => sigma.len(),
        Truncation::Tail(bound) => {
            let mut tail = 0.0;
            let mut k = sigma.len();
            while k > 0 && tail + sigma[k - 1] * sigma[k - 1] <= bound * bound {
                tail += sigma[k - 1] * sigma[k - 1];
                k -= 1;
            }
            k
        }
        Truncation::Relative(rel) => {
            let smax = sigma.first().copied().unwrap_or(0.0);
            sigma.iter().filter(|&&s| s > rel * smax && s > 0.0).count()
        }
    };
    let k = kept.max(1).min(sigma.len().max(1));
    let mut uk = DMatrix::zeros(rows, k);
    let mut svk = DMatrix::zeros(k, cols);
    for (c, &idx) in order.iter().take(k).enumerate() {
        for i in 0..rows {
            uk[(i, c)] = u[(i, idx)];
        }
        for j in 0..cols {
            svk[(c, j)] = s[idx] * v[(j, idx)];
        }
    }
    SvdSplit {
        u: uk,
        sv: svk,
        sigma,
        kept,
    }
}

/// Thin QR: `m = q r` with `q` having orthonormal columns.
pub fn qr_thin(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Thin LQ: `m = l q` with `q` having orthonormal rows.
pub fn lq_thin(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (q, r) = qr_thin(&m.transpose());
    (r.transpose(), q.transpose())
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(m)
        .singular_values()
        .expect("SVD converges")
        .into_iter()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Count of singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * smax).count()
}
