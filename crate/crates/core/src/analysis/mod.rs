//! Error norms, the rank-span oracle, greedy b-adic refinement, slope fits
//! and the convergence-study drivers.

pub mod catalog;
pub mod studies;
pub mod targets;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::interpolation::{interpolate_unit, Interpolator};
use crate::linalg::numerical_rank;
use crate::poly::{mono_eval, BasisKind};
use crate::quadrature::gauss_legendre;
use crate::spline::{BadicKnot, Cell, PiecewisePolynomial};
use crate::tensor_train::TensorTrain;
use crate::tensorization::{lp_norm_from_leaves, Grid};

/// Sample count per leaf for `p = inf`.
pub const SUP_SAMPLES_PER_LEAF: usize = 64;

/// Largest number of leaves [`lp_error`] enumerates.
pub const MAX_ERROR_LEAVES: u64 = 1 << 24;

/// Geometric panels used next to `x = 0` by [`lp_error_on_partition`].
const GRADED_PANELS: i32 = 40;

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidArgument(format!("p = {p} must be positive")));
    }
    Ok(())
}

/// `||f - tt||_p`. Every depth-`d` leaf is integrated with `quad_order`
/// Gauss–Legendre points and the leaf norms are combined by the isometry;
/// `p = inf` samples each leaf at [`SUP_SAMPLES_PER_LEAF`] points.
pub fn lp_error<F: Fn(f64) -> f64>(f: F, tt: &TensorTrain, p: f64, quad_order: usize) -> Result<f64> {
    check_p(p)?;
    let grid = tt.grid();
    if grid.leaves() > MAX_ERROR_LEAVES {
        return Err(Error::InvalidGrid(format!(
            "{} leaves exceed the enumeration limit {MAX_ERROR_LEAVES}",
            grid.leaves()
        )));
    }
    let basis = tt.basis();
    let width = grid.width();
    let points: Vec<(f64, f64)> = if p.is_infinite() {
        (0..SUP_SAMPLES_PER_LEAF)
            .map(|s| (s as f64 / SUP_SAMPLES_PER_LEAF as f64, 1.0))
            .collect()
    } else {
        let (x, w) = gauss_legendre(quad_order.max(1));
        x.into_iter().zip(w).collect()
    };
    let phi: Vec<Vec<f64>> = points.iter().map(|&(y, _)| basis.eval(y)).collect();
    let mut norms = vec![0.0; grid.leaves() as usize];
    tt.for_each_leaf(|j, coeffs| {
        let left = j as f64 * width;
        let mut acc = 0.0f64;
        for ((y, w), ph) in points.iter().zip(&phi) {
            let v: f64 = coeffs.iter().zip(ph).map(|(c, e)| c * e).sum();
            let e = (f(left + width * y) - v).abs();
            if p.is_infinite() {
                acc = acc.max(e);
            } else {
                acc += w * e.powf(p);
            }
        }
        norms[j as usize] = if p.is_infinite() { acc } else { acc.powf(1.0 / p) };
    });
    lp_norm_from_leaves(&norms, grid, p)
}

/// `||f - g||_p` over `[0,1]` with `quad_order` Gauss–Legendre points per
/// interval of `breakpoints`. The interval starting at 0 is split into
/// geometric panels so that endpoint singularities `x^alpha` integrate
/// accurately. For `p = inf` every interval is sampled at 256 points.
pub fn lp_error_on_partition<F, G>(f: F, g: G, breakpoints: &[f64], p: f64, quad_order: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    check_p(p)?;
    if breakpoints.len() < 2 {
        return Err(Error::InvalidArgument("need at least two breakpoints".into()));
    }
    let (gx, gw) = gauss_legendre(quad_order.max(1));
    let mut total = 0.0f64;
    for w in breakpoints.windows(2) {
        let (a, c) = (w[0], w[1]);
        if p.is_infinite() {
            for s in 0..256 {
                let x = a + (c - a) * s as f64 / 256.0;
                total = total.max((f(x) - g(x)).abs());
            }
            continue;
        }
        let mut panels = Vec::new();
        if a == 0.0 {
            let mut hi = c;
            for _ in 0..GRADED_PANELS {
                panels.push((hi / 2.0, hi));
                hi /= 2.0;
            }
            panels.push((0.0, hi));
        } else {
            panels.push((a, c));
        }
        for (lo, hi) in panels {
            let h = hi - lo;
            for (x, wt) in gx.iter().zip(&gw) {
                let t = lo + h * x;
                total += h * wt * (f(t) - g(t)).abs().powf(p);
            }
        }
    }
    Ok(if p.is_infinite() { total } else { total.powf(1.0 / p) })
}

/// Numerical rank of the `b^nu x (b^{d-nu} S)` matrix of samples
/// `f(b^{-nu}(j + y))`, with `S = samples_per_leaf` jittered points in every
/// depth-`d` sub-leaf. Singular values below `tol * sigma_max` are dropped.
pub fn rank_span_oracle<F: Fn(f64) -> f64>(
    f: F,
    grid: Grid,
    nu: usize,
    samples_per_leaf: usize,
    tol: f64,
) -> Result<usize> {
    if nu == 0 || nu > grid.depth {
        return Err(Error::InvalidArgument(format!(
            "level {nu} outside 1..={}",
            grid.depth
        )));
    }
    let b = grid.base;
    let rows = b.pow(nu as u32);
    let sub = b.pow((grid.depth - nu) as u32);
    let s = samples_per_leaf.max(1);
    let mut r = catalog::rng(0x5eed_0f_5a3_91e5);
    let ys: Vec<f64> = (0..sub)
        .flat_map(|k| (0..s).map(move |t| (k, t)))
        .map(|(k, t)| (k as f64 + (t as f64 + r.random_range(0.1..0.9)) / s as f64) / sub as f64)
        .collect();
    let scale = (b as f64).powi(-(nu as i32));
    let m = DMatrix::from_fn(rows, ys.len(), |j, c| f(scale * (j as f64 + ys[c])));
    Ok(numerical_rank(&m, tol))
}

/// Interpolates `f` on `[a, c)` at Lobatto nodes: monomial coefficients in the
/// local variable. The node at `c` is sampled just below `c`.
fn local_fit<F: Fn(f64) -> f64>(f: &F, a: f64, c: f64, interp: &Interpolator) -> Result<Vec<f64>> {
    let right = c.next_down();
    interpolate_unit(|u| f((a + (c - a) * u).min(right)), interp)
}

fn local_error<F: Fn(f64) -> f64>(f: &F, a: f64, c: f64, coeffs: &[f64], p: f64, quad: usize) -> Result<f64> {
    lp_error_on_partition(f, |x| mono_eval(coeffs, (x - a) / (c - a)), &[a, c], p, quad)
}

/// Result of [`greedy_badic_knots`].
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub spline: PiecewisePolynomial,
    /// Local `L^p` errors of the pieces, in order.
    pub local_errors: Vec<f64>,
    /// Largest level among the final cells.
    pub max_level: u32,
    /// True when the piece budget was not reached because every remaining
    /// candidate sits at `max_depth` or is already exact.
    pub exhausted: bool,
}

impl GreedyOutcome {
    /// `||f - s||_p` assembled from the local errors.
    pub fn error(&self, p: f64) -> f64 {
        if p.is_infinite() {
            self.local_errors.iter().copied().fold(0.0, f64::max)
        } else {
            self.local_errors.iter().map(|e| e.powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

struct Candidate {
    error: f64,
    /// Left endpoint in units of `b^{-max_depth}`.
    key: u64,
    cell: Cell,
    coeffs: Vec<f64>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties go to the leftmost cell
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.key.cmp(&self.key))
    }
}

/// Local errors at or below this value are treated as exact and never split.
pub const GREEDY_EXACT: f64 = 1e-14;

/// Greedy b-adic refinement: starting from `[0,1)`, repeatedly split the cell
/// with the largest local `L^p` interpolation error (degree `mbar`) into its
/// `b` children, while the piece count stays `<= n` and the cell is above `max_depth`.
pub fn greedy_badic_knots<F: Fn(f64) -> f64>(
    f: F,
    base: usize,
    n: usize,
    mbar: usize,
    p: f64,
    max_depth: u32,
    quad_order: usize,
) -> Result<GreedyOutcome> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::InvalidArgument("piece budget must be positive".into()));
    }
    if base < 2 || (base as f64).powi(max_depth as i32) > 2f64.powi(53) {
        return Err(Error::InvalidArgument(format!("depth {max_depth} too deep for base {base}")));
    }
    let interp = Interpolator::new(mbar, BasisKind::Monomial);
    let b = base as u64;
    let width = |c: &Cell| (base as f64).powi(-(c.level as i32));
    let make = |cell: Cell| -> Result<Candidate> {
        let a = cell.left(base);
        let c = a + width(&cell);
        let coeffs = local_fit(&f, a, c, &interp)?;
        let error = local_error(&f, a, c, &coeffs, p, quad_order)?;
        let key = cell.index * b.pow(max_depth - cell.level.min(max_depth));
        Ok(Candidate { error, key, cell, coeffs })
    };
    let mut heap = BinaryHeap::new();
    heap.push(make(Cell { level: 0, index: 0 })?);
    let mut settled = Vec::new();
    let mut exhausted = false;
    while heap.len() + settled.len() + base - 1 <= n {
        let Some(top) = heap.pop() else {
            exhausted = true;
            break;
        };
        if top.error <= GREEDY_EXACT {
            heap.push(top);
            exhausted = true;
            break;
        }
        if top.cell.level >= max_depth {
            settled.push(top);
            continue;
        }
        for i in 0..b {
            heap.push(make(Cell {
                level: top.cell.level + 1,
                index: top.cell.index * b + i,
            })?);
        }
    }
    let mut cells: Vec<Candidate> = heap.into_vec();
    cells.extend(settled);
    cells.sort_by_key(|c| c.key);
    let max_level = cells.iter().map(|c| c.cell.level).max().unwrap_or(0);
    let mut knots = vec![BadicKnot::new(base, 0, 0)];
    for c in &cells {
        knots.push(BadicKnot::new(base, c.cell.index + 1, c.cell.level));
    }
    let local_errors = cells.iter().map(|c| c.error).collect();
    let pieces = cells.into_iter().map(|c| c.coeffs).collect();
    Ok(GreedyOutcome {
        spline: PiecewisePolynomial::new(base, knots, pieces)?,
        local_errors,
        max_level,
        exhausted,
    })
}

/// Uniform spline with `b^depth` pieces, each the degree-`mbar` Lobatto interpolant of `f`.
pub fn uniform_badic_spline<F: Fn(f64) -> f64>(f: F, base: usize, depth: u32, mbar: usize) -> Result<PiecewisePolynomial> {
    let grid = Grid::new(base, depth as usize)?;
    let interp = Interpolator::new(mbar, BasisKind::Monomial);
    let h = grid.width();
    let pieces = (0..grid.leaves())
        .map(|j| local_fit(&f, j as f64 * h, (j + 1) as f64 * h, &interp))
        .collect::<Result<Vec<_>>>()?;
    PiecewisePolynomial::uniform(base, depth, pieces)
}

/// `||f - s||_p` on the knot partition of `s`.
pub fn spline_lp_error<F: Fn(f64) -> f64>(f: F, s: &PiecewisePolynomial, p: f64, quad_order: usize) -> Result<f64> {
    let bp = s.breakpoints();
    check_p(p)?;
    if p.is_infinite() {
        return lp_error_on_partition(&f, |x| s.evaluate(x), &bp, p, quad_order);
    }
    // piecewise sum avoids the piece lookup per quadrature node
    let mut total = 0.0;
    for (k, w) in bp.windows(2).enumerate() {
        let (a, c) = (w[0], w[1]);
        let e = local_error(&f, a, c, &s.pieces()[k], p, quad_order)?;
        total += e.powf(p);
    }
    Ok(total.powf(1.0 / p))
}

/// Least-squares line `y = slope x + intercept` with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept,
        r2,
        points: n,
    })
}

/// [`fit_line`] over the upper half of the points (the later budgets).
pub fn fit_upper_half(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let start = xs.len() / 2;
    fit_line(&xs[start..], &ys[start..])
}

/// One `(d, dbar)` pair of a re-interpolation experiment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ReinterpolationPoint {
    pub depth: usize,
    pub target_depth: usize,
    /// `||s - I_{b,dbar,m} s||_p` with `s = I_{b,d,mbar} f`.
    pub error: f64,
    /// `b^{-dbar(m+1)} |f|_{m+1,p} + b^{-(dbar-d)(m+1) - d(mbar+1)} |f|_{mbar+1,p}`.
    pub shape: f64,
}

/// Measures the re-interpolation error against the two-term bound shape for
/// every `(d, dbar)` pair. Seminorms come from the target's analytic derivatives.
pub fn reinterpolation_errors(
    target: &targets::Target,
    base: usize,
    mbar: usize,
    m: usize,
    pairs: &[(usize, usize)],
    p: f64,
    quad_order: usize,
) -> Result<Vec<ReinterpolationPoint>> {
    let seminorm = |k: usize| {
        sobolev_seminorm(target, k as u32, p)
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no derivative of order {k}", target.name())))
    };
    let (low, high) = (seminorm(m + 1)?, seminorm(mbar + 1)?);
    let kind = BasisKind::LegendreShifted;
    let fine = Interpolator::new(mbar, kind);
    let coarse = Interpolator::new(m, kind);
    let b = base as f64;
    pairs
        .iter()
        .map(|&(d, dbar)| {
            let s = crate::interpolation::tensor_interpolate(|x| target.eval(x), Grid::new(base, d)?, &fine)?;
            let t = crate::interpolation::reinterpolate(&s, dbar, &coarse)?;
            let error = lp_error(|x| s.evaluate(x).unwrap_or(f64::NAN), &t, p, quad_order)?;
            let (m1, n1) = ((m + 1) as f64, (mbar + 1) as f64);
            let shape = b.powf(-(dbar as f64) * m1) * low + b.powf(-((dbar - d) as f64) * m1 - d as f64 * n1) * high;
            Ok(ReinterpolationPoint {
                depth: d,
                target_depth: dbar,
                error,
                shape,
            })
        })
        .collect()
}

/// `|f|_{W^{k,p}} = ||f^{(k)}||_p` by quadrature of the analytic derivative.
pub fn sobolev_seminorm(target: &targets::Target, k: u32, p: f64) -> Option<f64> {
    target.derivative(k, 0.5)?;
    let d = |x: f64| target.derivative(k, x).unwrap_or(f64::NAN);
    let panels = 256;
    if p.is_infinite() {
        let n = 1 << 14;
        return Some((0..=n).map(|i| d(i as f64 / n as f64).abs()).fold(0.0, f64::max));
    }
    let (gx, gw) = gauss_legendre(16);
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        for (x, w) in gx.iter().zip(&gw) {
            total += h * w * d((i as f64 + x) * h).abs().powf(p);
        }
    }
    Some(total.powf(1.0 / p))
}
