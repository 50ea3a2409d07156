//! Polynomial bases on `[0,1)` and small monomial helpers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Monomial,
    ChebyshevShifted,
    #[default]
    LegendreShifted,
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::Monomial => "monomial",
            BasisKind::ChebyshevShifted => "chebyshev-shifted",
            BasisKind::LegendreShifted => "legendre-shifted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "monomial" => Ok(BasisKind::Monomial),
            "chebyshev-shifted" => Ok(BasisKind::ChebyshevShifted),
            "legendre-shifted" => Ok(BasisKind::LegendreShifted),
            _ => Err(Error::Format(format!("unknown basis kind `{s}`"))),
        }
    }
}

/// A basis `phi_0, ..., phi_m` of polynomials of degree at most `m` on `[0,1)`.
///
/// The shifted families are `T_k(2y-1)` and `P_k(2y-1)` without normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolyBasis {
    pub kind: BasisKind,
    pub degree: usize,
}

impl PolyBasis {
    pub fn new(kind: BasisKind, degree: usize) -> Self {
        PolyBasis { kind, degree }
    }

    pub fn legendre(degree: usize) -> Self {
        Self::new(BasisKind::LegendreShifted, degree)
    }

    pub fn monomial(degree: usize) -> Self {
        Self::new(BasisKind::Monomial, degree)
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        Self::new(self.kind, degree)
    }

    /// Writes `phi_k(y)` for all `k` into `out`.
    pub fn eval_into(&self, y: f64, out: &mut [f64]) {
        let m = self.degree;
        debug_assert_eq!(out.len(), m + 1);
        out[0] = 1.0;
        if m == 0 {
            return;
        }
        match self.kind {
            BasisKind::Monomial => {
                for k in 1..=m {
                    out[k] = out[k - 1] * y;
                }
            }
            BasisKind::ChebyshevShifted => {
                let t = 2.0 * y - 1.0;
                out[1] = t;
                for k in 2..=m {
                    out[k] = 2.0 * t * out[k - 1] - out[k - 2];
                }
            }
            BasisKind::LegendreShifted => {
                let t = 2.0 * y - 1.0;
                out[1] = t;
                for k in 2..=m {
                    let kf = k as f64;
                    out[k] = ((2.0 * kf - 1.0) * t * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
                }
            }
        }
    }

    pub fn eval(&self, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(y, &mut out);
        out
    }

    /// `sum_k c_k phi_k(y)`.
    pub fn eval_poly(&self, coeffs: &[f64], y: f64) -> f64 {
        let v = self.eval(y);
        coeffs.iter().zip(&v).map(|(c, v)| c * v).sum()
    }

    /// Exact Gram matrix `int_0^1 phi_i phi_j`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.dim();
        match self.kind {
            BasisKind::Monomial => DMatrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64),
            BasisKind::LegendreShifted => {
                DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / (2 * i + 1) as f64 } else { 0.0 })
            }
            BasisKind::ChebyshevShifted => {
                // T_i T_j = (T_{i+j} + T_{|i-j|}) / 2 and int_{-1}^{1} T_n = 2/(1-n^2), n even
                let integral = |n: usize| {
                    if n % 2 == 1 {
                        0.0
                    } else {
                        2.0 / (1.0 - (n * n) as f64)
                    }
                };
                DMatrix::from_fn(n, n, |i, j| {
                    0.25 * (integral(i + j) + integral(i.abs_diff(j)))
                })
            }
        }
    }

    /// Column `k` holds the monomial coefficients of `phi_k`.
    pub fn to_monomial(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let col = match (self.kind, k) {
                (BasisKind::Monomial, _) => {
                    let mut c = vec![0.0; n];
                    c[k] = 1.0;
                    c
                }
                (_, 0) => {
                    let mut c = vec![0.0; n];
                    c[0] = 1.0;
                    c
                }
                (_, 1) => {
                    let mut c = vec![0.0; n];
                    c[0] = -1.0;
                    c[1] = 2.0;
                    c
                }
                (kind, k) => {
                    // (2y-1) * phi_{k-1}
                    let prev = &cols[k - 1];
                    let mut tp = vec![0.0; n];
                    for s in 0..n {
                        tp[s] -= prev[s];
                        if s + 1 < n {
                            tp[s + 1] += 2.0 * prev[s];
                        }
                    }
                    let kf = k as f64;
                    let (a, c) = match kind {
                        BasisKind::ChebyshevShifted => (2.0, 1.0),
                        _ => ((2.0 * kf - 1.0) / kf, (kf - 1.0) / kf),
                    };
                    (0..n).map(|s| a * tp[s] - c * cols[k - 2][s]).collect()
                }
            };
            cols.push(col);
        }
        DMatrix::from_fn(n, n, |i, j| cols[j][i])
    }

    /// Maps monomial coefficients to coefficients in this basis.
    pub fn from_monomial(&self) -> DMatrix<f64> {
        if self.kind == BasisKind::Monomial {
            return DMatrix::identity(self.dim(), self.dim());
        }
        // upper triangular with nonzero diagonal
        self.to_monomial()
            .try_inverse()
            .expect("basis change matrix is triangular and invertible")
    }

    /// Coefficients in this basis of a polynomial given by monomial coefficients.
    pub fn coeffs_from_monomial(&self, mono: &[f64]) -> Result<Vec<f64>> {
        if mono.len() > self.dim() {
            return Err(Error::Shape(format!(
                "{} monomial coefficients exceed basis dimension {}",
                mono.len(),
                self.dim()
            )));
        }
        let mut padded = vec![0.0; self.dim()];
        padded[..mono.len()].copy_from_slice(mono);
        if self.kind == BasisKind::Monomial {
            return Ok(padded);
        }
        let t = self.from_monomial();
        Ok((0..self.dim())
            .map(|i| (0..self.dim()).map(|j| t[(i, j)] * padded[j]).sum())
            .collect())
    }

    /// Monomial coefficients of `sum_k c_k phi_k`.
    pub fn coeffs_to_monomial(&self, coeffs: &[f64]) -> Vec<f64> {
        let t = self.to_monomial();
        (0..self.dim())
            .map(|i| (0..coeffs.len()).map(|j| t[(i, j)] * coeffs[j]).sum())
            .collect()
    }

    /// Matrix `A` with `phi_q(alpha + beta y) = sum_s A[q,s] phi_s(y)`.
    pub fn affine(&self, alpha: f64, beta: f64) -> DMatrix<f64> {
        let n = self.dim();
        if self.kind == BasisKind::Monomial {
            // (alpha + beta y)^q = sum_s C(q,s) alpha^{q-s} beta^s y^s
            return DMatrix::from_fn(n, n, |q, s| {
                if s > q {
                    0.0
                } else {
                    binomial(q, s) * alpha.powi((q - s) as i32) * beta.powi(s as i32)
                }
            });
        }
        let nodes = cgl_nodes(self.degree);
        let v = DMatrix::from_fn(n, n, |r, k| self.eval(nodes[r])[k]);
        let w = DMatrix::from_fn(n, n, |r, q| self.eval(alpha + beta * nodes[r])[q]);
        let lu = v.lu();
        let sol = lu.solve(&w).expect("collocation matrix at distinct nodes is invertible");
        sol.transpose()
    }

    /// Dilation `M(i)` with `phi(b^{-1}(i + y)) = M(i) phi(y)`.
    pub fn dilation(&self, base: usize, i: usize) -> DMatrix<f64> {
        let b = base as f64;
        self.affine(i as f64 / b, 1.0 / b)
    }
}

/// Chebyshev–Gauss–Lobatto points `(1 - cos(k pi / m)) / 2` on `[0,1]`; the midpoint for `m = 0`.
pub fn cgl_nodes(m: usize) -> Vec<f64> {
    if m == 0 {
        return vec![0.5];
    }
    (0..=m)
        .map(|k| {
            let v = (1.0 - (std::f64::consts::PI * k as f64 / m as f64).cos()) / 2.0;
            // clean up the symmetric rounding so endpoints are exact
            if k == 0 {
                0.0
            } else if k == m {
                1.0
            } else {
                v
            }
        })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for j in 0..k {
        r = r * (n - j) as f64 / (j + 1) as f64;
    }
    r.round()
}

/// Horner evaluation of monomial coefficients.
pub fn mono_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

pub fn mono_derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a)
        .collect()
}

/// Coefficients of `x -> p(alpha + beta x)`.
pub fn mono_affine(c: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // Horner in polynomial arithmetic: acc = acc * (alpha + beta x) + c_k
    for &a in c.iter().rev() {
        let mut next = vec![0.0; n];
        for s in 0..n {
            next[s] += alpha * out[s];
            if s + 1 < n {
                next[s + 1] += beta * out[s];
            }
        }
        next[0] += a;
        out = next;
    }
    out
}

/// Real roots of the polynomial in `[a, b]`, sorted, found by recursive
/// isolation between the roots of the derivative.
pub fn real_roots_in(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last() == Some(&0.0) {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    let crit = real_roots_in(&mono_derivative(&c), a, b);
    let mut pts = vec![a];
    pts.extend(crit);
    pts.push(b);
    let scale: f64 = c.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut roots: Vec<f64> = Vec::new();
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (mono_eval(&c, lo), mono_eval(&c, hi));
        let push = |r: f64, roots: &mut Vec<f64>| {
            if roots.last().is_none_or(|&l| (r - l).abs() > 1e-14) {
                roots.push(r);
            }
        };
        if flo.abs() <= 1e-15 * scale {
            push(lo, &mut roots);
        }
        if flo * fhi < 0.0 {
            // monotone between consecutive critical points
            let (mut x0, mut x1) = (lo, hi);
            let mut f0 = flo;
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                if mid <= x0 || mid >= x1 {
                    break;
                }
                let fm = mono_eval(&c, mid);
                if (fm < 0.0) == (f0 < 0.0) {
                    x0 = mid;
                    f0 = fm;
                } else {
                    x1 = mid;
                }
            }
            push(0.5 * (x0 + x1), &mut roots);
        }
        if fhi.abs() <= 1e-15 * scale && w[1] == b {
            push(hi, &mut roots);
        }
    }
    roots
}

/// `||q||_{L^p(a,b)}` for monomial coefficients `q`. The interval is split at
/// the real roots so `|q|^p` is smooth on every part, and each part gets a
/// Gauss–Legendre rule exact for integer `p`. `p = inf` compares the
/// endpoints and critical points.
pub fn mono_lp_norm(c: &[f64], a: f64, b: f64, p: f64) -> f64 {
    if p.is_infinite() {
        let mut pts = real_roots_in(&mono_derivative(c), a, b);
        pts.extend([a, b]);
        return pts.iter().map(|&x| mono_eval(c, x).abs()).fold(0.0, f64::max);
    }
    let deg = c.len().saturating_sub(1) as f64;
    let order = ((p.ceil() * deg + 1.0) / 2.0).ceil().max(1.0) as usize + 2;
    let (gx, gw) = crate::quadrature::gauss_legendre(order);
    let mut cuts = vec![a];
    cuts.extend(real_roots_in(c, a, b).into_iter().filter(|&r| r > a && r < b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let h = w[1] - w[0];
        for (x, wt) in gx.iter().zip(&gw) {
            total += h * wt * mono_eval(c, w[0] + h * x).abs().powf(p);
        }
    }
    total.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [BasisKind; 3] = [
        BasisKind::Monomial,
        BasisKind::ChebyshevShifted,
        BasisKind::LegendreShifted,
    ];

    #[test]
    fn lp_norms_of_monomials() {
        // ||x - 1/2||_1 = 1/4, ||x||_2 = 1/sqrt(3), ||x^2 - 1/4||_inf = 3/4
        assert!((mono_lp_norm(&[-0.5, 1.0], 0.0, 1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((mono_lp_norm(&[0.0, 1.0], 0.0, 1.0, 2.0) - 3f64.sqrt().recip()).abs() < 1e-15);
        assert!((mono_lp_norm(&[-0.25, 0.0, 1.0], 0.0, 1.0, f64::INFINITY) - 0.75).abs() < 1e-15);
        // ||x^3||_3 on [0,2] = (2^10/10)^(1/3)
        let v = mono_lp_norm(&[0.0, 0.0, 0.0, 1.0], 0.0, 2.0, 3.0);
        assert!((v - (102.4f64).cbrt()).abs() < 1e-12);
    }

    #[test]
    fn known_values() {
        let c = PolyBasis::new(BasisKind::ChebyshevShifted, 3);
        // T_3(t) = 4t^3 - 3t at t = 2y - 1
        let y: f64 = 0.3;
        let t = 2.0 * y - 1.0;
        assert!((c.eval(y)[3] - (4.0 * t * t * t - 3.0 * t)).abs() < 1e-15);
        let l = PolyBasis::legendre(2);
        assert!((l.eval(y)[2] - 0.5 * (3.0 * t * t - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn gram_matches_quadrature() {
        for kind in KINDS {
            let basis = PolyBasis::new(kind, 6);
            let g = basis.gram();
            let (x, w) = crate::quadrature::gauss_legendre(12);
            for i in 0..7 {
                for j in 0..7 {
                    let q: f64 = x
                        .iter()
                        .zip(&w)
                        .map(|(x, w)| w * basis.eval(*x)[i] * basis.eval(*x)[j])
                        .sum();
                    assert!((q - g[(i, j)]).abs() < 1e-14, "{kind:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn monomial_conversion_round_trip() {
        for kind in KINDS {
            let basis = PolyBasis::new(kind, 7);
            let t = basis.to_monomial();
            for &y in &[0.0, 0.17, 0.5, 0.93] {
                let vals = basis.eval(y);
                for k in 0..8 {
                    let col: Vec<f64> = (0..8).map(|i| t[(i, k)]).collect();
                    // monomial coefficients of degree 7 reach ~1e5, so cancellation costs digits
                    assert!((mono_eval(&col, y) - vals[k]).abs() < 1e-10);
                }
            }
            let back = basis.from_monomial() * &t;
            assert!((back - DMatrix::identity(8, 8)).amax() < 1e-10);
        }
    }

    #[test]
    fn dilation_identity() {
        for kind in KINDS {
            let basis = PolyBasis::new(kind, 4);
            for b in [2usize, 3] {
                for i in 0..b {
                    let m = basis.dilation(b, i);
                    for &y in &[0.0, 0.31, 0.77] {
                        let lhs = basis.eval((i as f64 + y) / b as f64);
                        let rhs = &m * nalgebra::DVector::from_vec(basis.eval(y));
                        for q in 0..5 {
                            assert!((lhs[q] - rhs[q]).abs() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn affine_composition() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let d = mono_affine(&c, 0.25, 0.5);
        for &x in &[0.0, 0.4, 1.0] {
            assert!((mono_eval(&d, x) - mono_eval(&c, 0.25 + 0.5 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn roots() {
        // (x - 0.2)(x - 0.5)(x - 0.9)
        let c = [-0.09, 0.73, -1.6, 1.0];
        let r = real_roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(real_roots_in(&[1.0, 0.0, 1.0], 0.0, 1.0).is_empty());
        assert_eq!(real_roots_in(&[0.0, 1.0], 0.0, 1.0), vec![0.0]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(20, 10), 184756.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
