//! Exact tensor-train encodings of polynomials, splines, wavelets and sawtooth functions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::poly::{binomial, BasisKind, PolyBasis};
use crate::spline::{subpartition, Cell, PiecewisePolynomial};
use crate::tensor_train::{tt_svd, TTCore, TensorTrain};
use crate::tensorization::Grid;

/// Relative tail tolerance for the SVD inside exact encoders.
const EXACT_SVD_TOL: f64 = 1e-14;

/// Encodes `p(x) = sum_q c_q x^q` on `grid`.
///
/// Core `nu` carries the prefix powers `(1, s, ..., s^mbar)` of
/// `s_nu = sum_{k <= nu} i_k b^{-k}`; the leaf expands `p(s + b^{-d} y)`.
pub fn encode_polynomial(coeffs: &[f64], grid: Grid, kind: BasisKind) -> Result<TensorTrain> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    let n = coeffs.len();
    let basis = PolyBasis::new(kind, n - 1);
    let b = grid.base as f64;
    let mut cores = Vec::with_capacity(grid.depth);
    for nu in 1..=grid.depth {
        let h = b.powi(-(nu as i32));
        let slices = (0..grid.base)
            .map(|i| {
                let step = i as f64 * h;
                if nu == 1 {
                    DMatrix::from_fn(1, n, |_, k| step.powi(k as i32))
                } else {
                    // s_nu^k = sum_t C(k,t) s_{nu-1}^t step^{k-t}
                    DMatrix::from_fn(n, n, |t, k| {
                        if t > k {
                            0.0
                        } else {
                            binomial(k, t) * step.powi((k - t) as i32)
                        }
                    })
                }
            })
            .collect();
        cores.push(TTCore::new(slices)?);
    }
    // p(s + h y) = sum_k s^k sum_t c_{k+t} C(k+t, k) h^t y^t
    let h = grid.width();
    let rows = if grid.depth == 0 { 1 } else { n };
    let mut leaf = DMatrix::zeros(rows, n);
    for k in 0..rows {
        let mono: Vec<f64> = (0..n)
            .map(|t| {
                if k + t < n {
                    coeffs[k + t] * binomial(k + t, k) * h.powi(t as i32)
                } else {
                    0.0
                }
            })
            .collect();
        let c = basis.coeffs_from_monomial(&mono)?;
        for (j, v) in c.into_iter().enumerate() {
            leaf[(k, j)] = v;
        }
    }
    TensorTrain::new(grid, basis, cores, leaf)
}

/// Encodes a polynomial already expressed in `basis` by appending dilation cores.
pub fn encode_polynomial_in_basis(coeffs: &[f64], basis: PolyBasis, grid: Grid) -> Result<TensorTrain> {
    if coeffs.len() != basis.dim() {
        return Err(Error::Shape(format!(
            "{} coefficients for basis dimension {}",
            coeffs.len(),
            basis.dim()
        )));
    }
    let root = TensorTrain::new(
        Grid::new(grid.base, 0)?,
        basis,
        Vec::new(),
        DMatrix::from_row_slice(1, basis.dim(), coeffs),
    )?;
    root.extend(grid.depth)
}

/// Encodes a spline on the uniform grid `N = b^d` with `c` continuous derivatives.
pub fn encode_fixed_knot_spline(
    s: &PiecewisePolynomial,
    continuity: i64,
    kind: BasisKind,
) -> Result<TensorTrain> {
    let b = s.base();
    let n = s.num_pieces() as u64;
    let depth = (0..=53u32)
        .find(|&d| (b as u64).checked_pow(d) == Some(n))
        .ok_or_else(|| Error::InvalidSpline(format!("{n} pieces is not a power of {b}")))?;
    if !s.is_uniform(depth) {
        return Err(Error::InvalidSpline("knots are not uniform".into()));
    }
    let m = s.degree() as i64;
    if continuity < -1 || continuity > m {
        return Err(Error::InvalidArgument(format!(
            "continuity {continuity} outside [-1, {m}]"
        )));
    }
    if s.continuity(1e-9) < continuity {
        return Err(Error::InvalidSpline(format!(
            "spline is not C^{continuity} at its knots"
        )));
    }
    let grid = Grid::new(b, depth as usize)?;
    let basis = PolyBasis::new(kind, s.degree());
    let mut dense = DMatrix::zeros(n as usize, basis.dim());
    for (j, piece) in s.pieces().iter().enumerate() {
        let c = basis.coeffs_from_monomial(piece)?;
        for (k, v) in c.into_iter().enumerate() {
            dense[(j, k)] = v;
        }
    }
    tt_svd(grid, basis, &dense, Some(EXACT_SVD_TOL))
}

/// Depth-`level` train that is `p` on `cell` and zero elsewhere, at total depth `depth`.
fn cell_term(
    base: usize,
    cell: Cell,
    depth: usize,
    coeffs: &[f64],
    basis: PolyBasis,
) -> Result<TensorTrain> {
    let below = depth - cell.level as usize;
    let local = encode_polynomial_in_basis(coeffs, basis, Grid::new(base, below)?)?;
    local.prepend_selectors(&cell.digits(base), 1.0)
}

/// Sparse free-knot encoding: every piece is split into its minimal b-adic
/// cells and the train is the block sum of one selector-times-polynomial term per cell.
pub fn encode_free_knot_spline(s: &PiecewisePolynomial, kind: BasisKind) -> Result<TensorTrain> {
    let b = s.base();
    let depth = s.max_level() as usize;
    let basis = PolyBasis::new(kind, s.degree());
    let mut terms = Vec::new();
    for w in s.knots().windows(2) {
        for cell in subpartition(b, w[0], w[1])? {
            let mono = s.cell_polynomial(cell)?;
            let coeffs = basis.coeffs_from_monomial(&mono)?;
            terms.push(cell_term(b, cell, depth, &coeffs, basis)?);
        }
    }
    let refs: Vec<&TensorTrain> = terms.iter().collect();
    TensorTrain::sum(&refs)
}

/// Cell counts `n_k` of the minimal b-adic sub-partition of every piece.
pub fn subpartition_counts(s: &PiecewisePolynomial) -> Result<Vec<usize>> {
    s.knots()
        .windows(2)
        .map(|w| subpartition(s.base(), w[0], w[1]).map(|c| c.len()))
        .collect()
}

/// Compact free-knot encoding. The state after `nu` digits is either the local
/// polynomial on a cell inside one piece (`mbar+1` coordinates) or the
/// identity of a cell that still contains a knot, so `r_nu <= mbar + N`.
pub fn encode_free_knot_spline_compact(
    s: &PiecewisePolynomial,
    kind: BasisKind,
) -> Result<TensorTrain> {
    let b = s.base();
    let depth = s.max_level();
    let basis = PolyBasis::new(kind, s.degree());
    let n = basis.dim();
    let grid = Grid::new(b, depth as usize)?;
    let bu = b as u64;

    // mixed[nu]: sorted indices of level-nu cells with a knot in their interior
    let mut mixed: Vec<Vec<u64>> = vec![Vec::new(); depth as usize + 1];
    for knot in &s.knots()[1..s.knots().len() - 1] {
        for nu in 0..knot.level {
            mixed[nu as usize].push(knot.index / bu.pow(knot.level - nu));
        }
    }
    for m in &mut mixed {
        m.sort_unstable();
        m.dedup();
    }
    let local = |cell: Cell| -> Result<Vec<f64>> {
        basis.coeffs_from_monomial(&s.cell_polynomial(cell)?)
    };

    // state row vector at level 0
    let k0 = mixed[0].len();
    let mut root = DMatrix::zeros(1, n + k0);
    if k0 == 1 {
        root[(0, n)] = 1.0;
    } else {
        let c = local(Cell { level: 0, index: 0 })?;
        for (j, v) in c.into_iter().enumerate() {
            root[(0, j)] = v;
        }
    }
    let dil: Vec<DMatrix<f64>> = (0..b).map(|i| basis.dilation(b, i)).collect();
    let mut cores = Vec::with_capacity(depth as usize);
    for nu in 1..=depth as usize {
        let (prev, next) = (&mixed[nu - 1], &mixed[nu]);
        let (rows, cols) = (n + prev.len(), n + next.len());
        let mut slices = vec![DMatrix::zeros(rows, cols); b];
        for (i, slice) in slices.iter_mut().enumerate() {
            slice.view_mut((0, 0), (n, n)).copy_from(&dil[i]);
            for (r, &parent) in prev.iter().enumerate() {
                let child = parent * bu + i as u64;
                match next.binary_search(&child) {
                    Ok(col) => slice[(n + r, n + col)] = 1.0,
                    Err(_) => {
                        let c = local(Cell {
                            level: nu as u32,
                            index: child,
                        })?;
                        for (j, v) in c.into_iter().enumerate() {
                            slice[(n + r, j)] = v;
                        }
                    }
                }
            }
        }
        if nu == 1 {
            for slice in slices.iter_mut() {
                *slice = &root * &*slice;
            }
        }
        cores.push(TTCore::new(slices)?);
    }
    let leaf = if depth == 0 {
        root.columns(0, n).into_owned()
    } else {
        DMatrix::identity(n, n)
    };
    TensorTrain::new(grid, basis, cores, leaf)
}

/// A dilated and shifted copy `b^{l/p} psi(b^l x - j)` of a mother function given as a train.
#[derive(Debug, Clone)]
pub struct WaveletSpec {
    pub mother: TensorTrain,
    pub level: usize,
    pub shift: u64,
    /// Normalization exponent; `f64::INFINITY` disables the amplitude factor.
    pub p: f64,
}

impl WaveletSpec {
    pub fn new(mother: TensorTrain, level: usize, shift: u64) -> Self {
        WaveletSpec {
            mother,
            level,
            shift,
            p: 2.0,
        }
    }
}

/// Encodes the dilated wavelet at `target_depth >= level + depth(mother)`.
pub fn encode_dilated(spec: &WaveletSpec, target_depth: usize) -> Result<TensorTrain> {
    let b = spec.mother.base();
    let l = spec.level;
    if spec.shift >= (b as u64).pow(l as u32) {
        return Err(Error::InvalidArgument(format!(
            "shift {} >= {b}^{l}",
            spec.shift
        )));
    }
    let d0 = spec.mother.depth();
    if target_depth < l + d0 {
        return Err(Error::InvalidArgument(format!(
            "target depth {target_depth} < level {l} + mother depth {d0}"
        )));
    }
    if !(spec.p > 0.0) {
        return Err(Error::InvalidArgument(format!("p = {}", spec.p)));
    }
    let factor = if spec.p.is_infinite() {
        1.0
    } else {
        (b as f64).powf(1.0 / spec.p)
    };
    let body = spec.mother.extend(target_depth - l - d0)?;
    let digits = Cell {
        level: l as u32,
        index: spec.shift,
    }
    .digits(b);
    body.prepend_selectors(&digits, factor)
}

/// `sum_k c_k psi_k` for dilated wavelets sharing base and basis.
pub fn n_term_wavelet(terms: &[(f64, WaveletSpec)], target_depth: usize) -> Result<TensorTrain> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("no wavelet terms".into()));
    }
    let encoded = terms
        .iter()
        .map(|(c, spec)| encode_dilated(spec, target_depth).map(|t| t.scale(*c)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&TensorTrain> = encoded.iter().collect();
    TensorTrain::sum(&refs)
}

/// Haar mother `-delta_0 + delta_1`, depth 1, degree 0.
pub fn haar_mother(kind: BasisKind) -> TensorTrain {
    let grid = Grid { base: 2, depth: 1 };
    let basis = PolyBasis::new(kind, 0);
    let core = TTCore::new(vec![
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
    ])
    .expect("valid core");
    TensorTrain::new(grid, basis, vec![core], DMatrix::from_element(1, 1, 1.0)).expect("valid train")
}

/// Hat mother `delta_1 + (delta_0 - delta_1) y`, depth 1, degree 1.
pub fn hat_mother(kind: BasisKind) -> TensorTrain {
    let grid = Grid { base: 2, depth: 1 };
    let basis = PolyBasis::new(kind, 1);
    let core = TTCore::new(vec![
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
    ])
    .expect("valid core");
    // rows: the functions 1 and y
    let leaf = DMatrix::from_fn(2, 2, |r, k| {
        let mono = if r == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
        basis.coeffs_from_monomial(&mono).expect("degree 1")[k]
    });
    TensorTrain::new(grid, basis, vec![core], leaf).expect("valid train")
}

/// The sawtooth `phi_d(i_1..i_d, y) = delta_0(i_d) y + delta_1(i_d) (1 - y)`.
pub fn encode_sawtooth(grid: Grid, degree: usize, kind: BasisKind) -> Result<TensorTrain> {
    if grid.base != 2 {
        return Err(Error::InvalidArgument("sawtooth requires base 2".into()));
    }
    if grid.depth == 0 {
        return Err(Error::InvalidArgument("sawtooth requires depth >= 1".into()));
    }
    if degree < 1 {
        return Err(Error::InvalidArgument("sawtooth requires degree >= 1".into()));
    }
    let basis = PolyBasis::new(kind, degree);
    let mut cores: Vec<TTCore> = (1..grid.depth)
        .map(|_| TTCore::new(vec![DMatrix::from_element(1, 1, 1.0); 2]).expect("valid core"))
        .collect();
    cores.push(TTCore::new(vec![
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    ])?);
    let up = basis.coeffs_from_monomial(&[0.0, 1.0])?;
    let down = basis.coeffs_from_monomial(&[1.0, -1.0])?;
    let leaf = DMatrix::from_fn(2, basis.dim(), |r, k| if r == 0 { up[k] } else { down[k] });
    TensorTrain::new(grid, basis, cores, leaf)
}

/// Closed form of the sawtooth: `2^d x` rising on even cells, falling on odd ones.
pub fn sawtooth_value(depth: usize, x: f64) -> f64 {
    let t = x * (2.0f64).powi(depth as i32);
    let cell = t.floor();
    let y = t - cell;
    if (cell as u64) % 2 == 0 {
        y
    } else {
        1.0 - y
    }
}
