//! Tensor trains with discrete base-`b` cores and a polynomial leaf core.
//!
//! A train on grid `(b, d)` with leaf basis `phi_0..phi_m` represents
//!
//! ```text
//! f(t_{b,d}(i_1, ..., i_d, y)) = A_1(i_1) A_2(i_2) ... A_d(i_d) L phi(y)
//! ```
//!
//! where `A_nu(i)` is `r_{nu-1} x r_nu` with `r_0 = 1` and `L` is `r_d x (m+1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lq_thin, qr_thin, svd_split, Truncation};
use crate::poly::{mono_lp_norm, BasisKind, PolyBasis};
use crate::tensorization::{encode_point, lp_norm_from_leaves, Grid, MultiIndexPoint};

/// Default relative tolerance for numerical ranks.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// One discrete core: `b` slices of shape `r_left x r_right`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTCore {
    slices: Vec<DMatrix<f64>>,
}

impl TTCore {
    pub fn new(slices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Shape("core without slices".into()))?;
        let shape = first.shape();
        if slices.iter().any(|s| s.shape() != shape) {
            return Err(Error::Shape("core slices differ in shape".into()));
        }
        Ok(TTCore { slices })
    }

    pub fn base(&self) -> usize {
        self.slices.len()
    }

    pub fn left_rank(&self) -> usize {
        self.slices[0].nrows()
    }

    pub fn right_rank(&self) -> usize {
        self.slices[0].ncols()
    }

    pub fn slice(&self, i: usize) -> &DMatrix<f64> {
        &self.slices[i]
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    /// `[A(0); A(1); ...]`, shape `b r_left x r_right`.
    fn vertical(&self) -> DMatrix<f64> {
        let (rl, rr) = (self.left_rank(), self.right_rank());
        let mut out = DMatrix::zeros(self.base() * rl, rr);
        for (i, s) in self.slices.iter().enumerate() {
            out.view_mut((i * rl, 0), (rl, rr)).copy_from(s);
        }
        out
    }

    fn from_vertical(m: &DMatrix<f64>, base: usize) -> Self {
        let rl = m.nrows() / base;
        let slices = (0..base)
            .map(|i| m.view((i * rl, 0), (rl, m.ncols())).into_owned())
            .collect();
        TTCore { slices }
    }

    /// `[A(0) A(1) ...]`, shape `r_left x b r_right`.
    fn horizontal(&self) -> DMatrix<f64> {
        let (rl, rr) = (self.left_rank(), self.right_rank());
        let mut out = DMatrix::zeros(rl, self.base() * rr);
        for (i, s) in self.slices.iter().enumerate() {
            out.view_mut((0, i * rr), (rl, rr)).copy_from(s);
        }
        out
    }

    fn from_horizontal(m: &DMatrix<f64>, base: usize) -> Self {
        let rr = m.ncols() / base;
        let slices = (0..base)
            .map(|i| m.view((0, i * rr), (m.nrows(), rr)).into_owned())
            .collect();
        TTCore { slices }
    }

    fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        TTCore {
            slices: self.slices.iter().map(f).collect(),
        }
    }
}

/// Ranks `r_1..r_d` with the tolerance used to obtain them (0 for stored ranks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub ranks: Vec<usize>,
    pub tolerance: f64,
}

impl RankProfile {
    pub fn new(ranks: Vec<usize>, tolerance: f64) -> Self {
        RankProfile { ranks, tolerance }
    }

    pub fn max(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    grid: Grid,
    basis: PolyBasis,
    cores: Vec<TTCore>,
    leaf: DMatrix<f64>,
}

impl TensorTrain {
    pub fn new(grid: Grid, basis: PolyBasis, cores: Vec<TTCore>, leaf: DMatrix<f64>) -> Result<Self> {
        if cores.len() != grid.depth {
            return Err(Error::Shape(format!(
                "{} cores for depth {}",
                cores.len(),
                grid.depth
            )));
        }
        let mut r = 1;
        for (nu, c) in cores.iter().enumerate() {
            if c.base() != grid.base {
                return Err(Error::Shape(format!(
                    "core {} has {} slices, base is {}",
                    nu + 1,
                    c.base(),
                    grid.base
                )));
            }
            if c.left_rank() != r {
                return Err(Error::Shape(format!(
                    "core {} left rank {} != {}",
                    nu + 1,
                    c.left_rank(),
                    r
                )));
            }
            r = c.right_rank();
        }
        if leaf.nrows() != r || leaf.ncols() != basis.dim() {
            return Err(Error::Shape(format!(
                "leaf is {}x{}, expected {}x{}",
                leaf.nrows(),
                leaf.ncols(),
                r,
                basis.dim()
            )));
        }
        Ok(TensorTrain {
            grid,
            basis,
            cores,
            leaf,
        })
    }

    /// Rank-1 train with every entry zero.
    pub fn zero(grid: Grid, basis: PolyBasis) -> Self {
        let cores = (0..grid.depth)
            .map(|_| TTCore {
                slices: vec![DMatrix::zeros(1, 1); grid.base],
            })
            .collect();
        TensorTrain {
            grid,
            basis,
            cores,
            leaf: DMatrix::zeros(1, basis.dim()),
        }
    }

    /// Rank-1 train of the constant function `c`.
    pub fn constant(grid: Grid, basis: PolyBasis, c: f64) -> Self {
        let cores = (0..grid.depth)
            .map(|_| TTCore {
                slices: vec![DMatrix::from_element(1, 1, 1.0); grid.base],
            })
            .collect();
        let mono = basis
            .coeffs_from_monomial(&[c])
            .expect("constant fits every basis");
        TensorTrain {
            grid,
            basis,
            cores,
            leaf: DMatrix::from_row_slice(1, basis.dim(), &mono),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn depth(&self) -> usize {
        self.grid.depth
    }

    pub fn base(&self) -> usize {
        self.grid.base
    }

    pub fn basis(&self) -> PolyBasis {
        self.basis
    }

    pub fn cores(&self) -> &[TTCore] {
        &self.cores
    }

    pub fn leaf(&self) -> &DMatrix<f64> {
        &self.leaf
    }

    /// Stored ranks `r_1..r_d`.
    pub fn stored_ranks(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.right_rank()).collect()
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.evaluate_point(&encode_point(x, self.grid)?))
    }

    pub fn evaluate_point(&self, p: &MultiIndexPoint) -> f64 {
        let coeffs = self.leaf_coefficients(&p.digits);
        self.basis.eval_poly(coeffs.as_slice(), p.remainder)
    }

    /// Leaf polynomial coefficients for the digit sequence `(i_1..i_d)`.
    pub fn leaf_coefficients(&self, digits: &[usize]) -> DVector<f64> {
        let mut v = DVector::from_element(1, 1.0);
        for (core, &i) in self.cores.iter().zip(digits) {
            v = core.slice(i).tr_mul(&v);
        }
        self.leaf.tr_mul(&v)
    }

    /// Calls `visit(flat, coeffs)` for every leaf in increasing order.
    pub fn for_each_leaf(&self, mut visit: impl FnMut(u64, &[f64])) {
        let mut stack: Vec<DVector<f64>> = vec![DVector::from_element(1, 1.0)];
        self.leaf_dfs(0, 0, &mut stack, &mut visit);
    }

    /// `||f||_p` from the leaf polynomials: each `||g_j||_{L^p(0,1)}` is
    /// computed exactly and combined by [`lp_norm_from_leaves`].
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let leaves = self.grid().leaves();
        if leaves > 1 << 24 {
            return Err(Error::InvalidGrid(format!("{leaves} leaves")));
        }
        let to_mono = self.basis.to_monomial();
        let mut norms = Vec::with_capacity(leaves as usize);
        self.for_each_leaf(|_, c| {
            let mono = &to_mono * DVector::from_column_slice(c);
            norms.push(mono_lp_norm(mono.as_slice(), 0.0, 1.0, p));
        });
        lp_norm_from_leaves(&norms, self.grid(), p)
    }

    fn leaf_dfs(
        &self,
        level: usize,
        flat: u64,
        stack: &mut Vec<DVector<f64>>,
        visit: &mut impl FnMut(u64, &[f64]),
    ) {
        let v = stack.last().expect("nonempty stack");
        if level == self.depth() {
            let c = self.leaf.tr_mul(v);
            visit(flat, c.as_slice());
            return;
        }
        let core = &self.cores[level];
        for i in 0..self.base() {
            let next = core.slice(i).tr_mul(stack.last().expect("nonempty stack"));
            stack.push(next);
            self.leaf_dfs(level + 1, flat * self.base() as u64 + i as u64, stack, visit);
            stack.pop();
        }
    }

    /// Dense `b^d x (m+1)` matrix of leaf coefficients.
    pub fn leaf_matrix(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.grid.leaves() as usize, self.basis.dim());
        self.for_each_leaf(|j, c| {
            for (k, v) in c.iter().enumerate() {
                out[(j as usize, k)] = *v;
            }
        });
        out
    }

    fn check_compatible(&self, other: &TensorTrain) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Incompatible(format!(
                "grids {:?} and {:?}",
                self.grid, other.grid
            )));
        }
        if self.basis != other.basis {
            return Err(Error::Incompatible(format!(
                "bases {:?} and {:?}",
                self.basis, other.basis
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TensorTrain) -> Result<TensorTrain> {
        TensorTrain::sum(&[self, other])
    }

    /// Block-diagonal sum of several trains in one pass.
    pub fn sum(terms: &[&TensorTrain]) -> Result<TensorTrain> {
        let first = *terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
        for t in terms {
            first.check_compatible(t)?;
        }
        let d = first.depth();
        let b = first.base();
        if d == 0 {
            let mut leaf = DMatrix::zeros(1, first.basis.dim());
            for t in terms {
                leaf += &t.leaf;
            }
            return TensorTrain::new(first.grid, first.basis, Vec::new(), leaf);
        }
        let mut cores = Vec::with_capacity(d);
        for nu in 0..d {
            let lefts: Vec<usize> = terms.iter().map(|t| t.cores[nu].left_rank()).collect();
            let rights: Vec<usize> = terms.iter().map(|t| t.cores[nu].right_rank()).collect();
            let rr: usize = rights.iter().sum();
            let rl: usize = if nu == 0 { 1 } else { lefts.iter().sum() };
            let mut slices = vec![DMatrix::zeros(rl, rr); b];
            let (mut ro, mut co) = (0, 0);
            for (t, term) in terms.iter().enumerate() {
                for (i, slice) in slices.iter_mut().enumerate() {
                    let s = term.cores[nu].slice(i);
                    slice.view_mut((ro, co), s.shape()).copy_from(s);
                }
                if nu > 0 {
                    ro += lefts[t];
                }
                co += rights[t];
            }
            cores.push(TTCore { slices });
        }
        let rows: usize = terms.iter().map(|t| t.leaf.nrows()).sum();
        let mut leaf = DMatrix::zeros(rows, first.basis.dim());
        let mut ro = 0;
        for t in terms {
            leaf.view_mut((ro, 0), t.leaf.shape()).copy_from(&t.leaf);
            ro += t.leaf.nrows();
        }
        TensorTrain::new(first.grid, first.basis, cores, leaf)
    }

    pub fn scale(&self, c: f64) -> TensorTrain {
        let mut out = self.clone();
        out.leaf *= c;
        out
    }

    /// `<a, b>_{L^2(0,1)}`.
    pub fn inner(&self, other: &TensorTrain) -> Result<f64> {
        self.check_compatible(other)?;
        let mut env = DMatrix::from_element(1, 1, 1.0);
        for (ca, cb) in self.cores.iter().zip(&other.cores) {
            let mut next = DMatrix::zeros(ca.right_rank(), cb.right_rank());
            for i in 0..self.base() {
                next += ca.slice(i).transpose() * &env * cb.slice(i);
            }
            env = next;
        }
        let g = self.basis.gram();
        let m = &self.leaf * g * other.leaf.transpose();
        Ok(env.component_mul(&m).sum() * self.grid.width())
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).expect("self compatible").max(0.0).sqrt()
    }

    /// Lower-triangular `C` with `G = C C^T` for the leaf Gram matrix.
    fn gram_factor(&self) -> DMatrix<f64> {
        self.basis
            .gram()
            .cholesky()
            .expect("leaf Gram matrix is positive definite")
            .l()
    }

    /// QR sweep. `Left`: every core satisfies `sum_i A(i)^T A(i) = I`.
    /// `Right`: the leaf is orthonormal in `L^2(0,1)` and every core satisfies
    /// `sum_i A(i) A(i)^T = I` except the first, which carries the norm.
    pub fn orthogonalize(&self, direction: Direction) -> TensorTrain {
        let mut out = self.clone();
        match direction {
            Direction::Left => {
                for nu in 0..out.depth() {
                    let (q, r) = qr_thin(&out.cores[nu].vertical());
                    out.cores[nu] = TTCore::from_vertical(&q, out.base());
                    if nu + 1 < out.depth() {
                        out.cores[nu + 1] = out.cores[nu + 1].map(|s| &r * s);
                    } else {
                        out.leaf = &r * &out.leaf;
                    }
                }
            }
            Direction::Right => {
                let c = out.gram_factor();
                let scaled = out.right_sweep(&out.leaf * &c);
                let cinv = c.try_inverse().expect("Cholesky factor invertible");
                out.leaf = scaled * cinv;
            }
        }
        out
    }

    /// Right-orthogonalizes the cores given the leaf in orthonormal coordinates;
    /// returns the new leaf (still in orthonormal coordinates).
    fn right_sweep(&mut self, leaf: DMatrix<f64>) -> DMatrix<f64> {
        let d = self.depth();
        if d == 0 {
            return leaf;
        }
        let (l, q) = lq_thin(&leaf);
        let new_leaf = q;
        self.cores[d - 1] = self.cores[d - 1].map(|s| s * &l);
        for nu in (1..d).rev() {
            let (l, q) = lq_thin(&self.cores[nu].horizontal());
            self.cores[nu] = TTCore::from_horizontal(&q, self.base());
            self.cores[nu - 1] = self.cores[nu - 1].map(|s| s * &l);
        }
        new_leaf
    }

    /// Right-orthogonalize then a left-to-right truncated SVD sweep. The
    /// discarded part has L^2 norm at most `tol * ||tt||_2`.
    pub fn round(&self, tol: f64) -> TensorTrain {
        if self.depth() == 0 {
            return self.clone();
        }
        let d = self.depth();
        let mut out = self.clone();
        let c = out.gram_factor();
        let mut leaf = out.right_sweep(&out.leaf * &c);
        let norm = out.cores[0].vertical().norm();
        let delta = tol * norm / (d as f64).sqrt();
        for nu in 0..d {
            let split = svd_split(&out.cores[nu].vertical(), Truncation::Tail(delta));
            out.cores[nu] = TTCore::from_vertical(&split.u, out.base());
            if nu + 1 < d {
                out.cores[nu + 1] = out.cores[nu + 1].map(|s| &split.sv * s);
            } else {
                leaf = &split.sv * leaf;
            }
        }
        out.leaf = leaf * c.try_inverse().expect("Cholesky factor invertible");
        out
    }

    /// Numerical ranks: singular values of each unfolding above `tol * sigma_max`.
    pub fn ranks(&self, tol: f64) -> RankProfile {
        RankProfile::new(self.rank_sweep(tol).0, tol)
    }

    /// Singular values of every unfolding divided by the largest, from the
    /// same sweep as [`TensorTrain::ranks`] at tolerance `tol`.
    pub fn unfolding_spectra(&self, tol: f64) -> Vec<Vec<f64>> {
        self.rank_sweep(tol).1
    }

    fn rank_sweep(&self, tol: f64) -> (Vec<usize>, Vec<Vec<f64>>) {
        let d = self.depth();
        let mut out = self.clone();
        let c = out.gram_factor();
        if d == 0 {
            return (Vec::new(), Vec::new());
        }
        let mut leaf = out.right_sweep(&out.leaf * &c);
        let mut ranks = Vec::with_capacity(d);
        let mut spectra = Vec::with_capacity(d);
        let mut dead = false;
        for nu in 0..d {
            let split = svd_split(&out.cores[nu].vertical(), Truncation::Relative(tol));
            dead |= split.kept == 0;
            ranks.push(if dead { 0 } else { split.kept });
            let top = split.sigma.first().copied().filter(|&s| s > 0.0).unwrap_or(1.0);
            spectra.push(split.sigma.iter().map(|s| s / top).collect());
            out.cores[nu] = TTCore::from_vertical(&split.u, out.base());
            if nu + 1 < d {
                out.cores[nu + 1] = out.cores[nu + 1].map(|s| &split.sv * s);
            } else {
                leaf = &split.sv * leaf;
            }
        }
        let _ = leaf;
        (ranks, spectra)
    }

    /// Appends `levels` dilation cores so the train lives on a deeper grid
    /// without changing the represented function; `final_leaf` maps the
    /// current basis into the output basis (identity keeps the basis).
    pub fn append_levels(
        &self,
        levels: usize,
        final_leaf: &DMatrix<f64>,
        out_basis: PolyBasis,
    ) -> Result<TensorTrain> {
        if final_leaf.nrows() != self.basis.dim() || final_leaf.ncols() != out_basis.dim() {
            return Err(Error::Shape(format!(
                "leaf map is {}x{}, expected {}x{}",
                final_leaf.nrows(),
                final_leaf.ncols(),
                self.basis.dim(),
                out_basis.dim()
            )));
        }
        let grid = self.grid.with_depth(self.depth() + levels)?;
        let mut cores = self.cores.clone();
        if levels == 0 {
            let leaf = &self.leaf * final_leaf;
            return TensorTrain::new(grid, out_basis, cores, leaf);
        }
        let dil: Vec<DMatrix<f64>> = (0..self.base())
            .map(|i| self.basis.dilation(self.base(), i))
            .collect();
        cores.push(TTCore {
            slices: dil.iter().map(|m| &self.leaf * m).collect(),
        });
        for _ in 1..levels {
            cores.push(TTCore { slices: dil.clone() });
        }
        TensorTrain::new(grid, out_basis, cores, final_leaf.clone())
    }

    /// Same function on a grid `levels` deeper, same basis.
    pub fn extend(&self, levels: usize) -> Result<TensorTrain> {
        let id = DMatrix::identity(self.basis.dim(), self.basis.dim());
        self.append_levels(levels, &id, self.basis)
    }

    /// Same function with the leaf expressed in another basis of equal or higher degree.
    pub fn change_basis(&self, target: PolyBasis) -> Result<TensorTrain> {
        if target.degree < self.basis.degree {
            return Err(Error::InvalidArgument(format!(
                "cannot change basis degree {} to lower degree {}",
                self.basis.degree, target.degree
            )));
        }
        let to_mono = self.basis.to_monomial();
        let from_mono = target.from_monomial();
        let n = self.basis.dim();
        // rows: source basis functions, columns: target coefficients
        let mut map = DMatrix::zeros(n, target.dim());
        for q in 0..n {
            let mono: Vec<f64> = (0..n).map(|s| to_mono[(s, q)]).collect();
            let mut padded = vec![0.0; target.dim()];
            padded[..n].copy_from_slice(&mono);
            for k in 0..target.dim() {
                map[(q, k)] = (0..target.dim()).map(|s| from_mono[(k, s)] * padded[s]).sum();
            }
        }
        TensorTrain::new(self.grid, target, self.cores.clone(), &self.leaf * map)
    }

    /// Prepends rank-1 cores selecting the digits `digits`, each scaled by `factor`.
    pub fn prepend_selectors(&self, digits: &[usize], factor: f64) -> Result<TensorTrain> {
        let grid = self.grid.with_depth(self.depth() + digits.len())?;
        let mut cores = Vec::with_capacity(grid.depth);
        for &j in digits {
            if j >= self.base() {
                return Err(Error::InvalidArgument(format!("digit {j} >= base")));
            }
            let slices = (0..self.base())
                .map(|i| DMatrix::from_element(1, 1, if i == j { factor } else { 0.0 }))
                .collect();
            cores.push(TTCore { slices });
        }
        cores.extend(self.cores.iter().cloned());
        TensorTrain::new(grid, self.basis, cores, self.leaf.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TtDocument::from(self)).expect("serializable document")
    }

    pub fn from_json(text: &str) -> Result<TensorTrain> {
        let doc: TtDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.into_train()
    }
}

#[derive(Serialize, Deserialize)]
struct BasisDoc {
    kind: String,
    degree: usize,
}

#[derive(Serialize, Deserialize)]
struct ArrayDoc {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Self-describing JSON layout. Core data is row-major over `(i, alpha, beta)`.
#[derive(Serialize, Deserialize)]
struct TtDocument {
    format: String,
    grid: Grid,
    basis: BasisDoc,
    cores: Vec<ArrayDoc>,
    leaf: ArrayDoc,
}

const FORMAT_TAG: &str = "qtt-tensor-train/1";

impl From<&TensorTrain> for TtDocument {
    fn from(tt: &TensorTrain) -> Self {
        let cores = tt
            .cores
            .iter()
            .map(|c| {
                let mut data = Vec::with_capacity(c.base() * c.left_rank() * c.right_rank());
                for s in c.slices() {
                    for a in 0..s.nrows() {
                        for b in 0..s.ncols() {
                            data.push(s[(a, b)]);
                        }
                    }
                }
                ArrayDoc {
                    shape: vec![c.base(), c.left_rank(), c.right_rank()],
                    data,
                }
            })
            .collect();
        let mut leaf = Vec::with_capacity(tt.leaf.len());
        for a in 0..tt.leaf.nrows() {
            for k in 0..tt.leaf.ncols() {
                leaf.push(tt.leaf[(a, k)]);
            }
        }
        TtDocument {
            format: FORMAT_TAG.into(),
            grid: tt.grid,
            basis: BasisDoc {
                kind: tt.basis.kind.name().into(),
                degree: tt.basis.degree,
            },
            cores,
            leaf: ArrayDoc {
                shape: vec![tt.leaf.nrows(), tt.leaf.ncols()],
                data: leaf,
            },
        }
    }
}

impl TtDocument {
    fn into_train(self) -> Result<TensorTrain> {
        if self.format != FORMAT_TAG {
            return Err(Error::Format(format!("unexpected format tag `{}`", self.format)));
        }
        let grid = Grid::new(self.grid.base, self.grid.depth)?;
        let basis = PolyBasis::new(BasisKind::parse(&self.basis.kind)?, self.basis.degree);
        let mut cores = Vec::with_capacity(self.cores.len());
        for c in self.cores {
            let [b, rl, rr] = c.shape[..] else {
                return Err(Error::Format("core shape must have three entries".into()));
            };
            if c.data.len() != b * rl * rr || b == 0 {
                return Err(Error::Format("core data length mismatch".into()));
            }
            let slices = (0..b)
                .map(|i| DMatrix::from_row_slice(rl, rr, &c.data[i * rl * rr..(i + 1) * rl * rr]))
                .collect();
            cores.push(TTCore::new(slices)?);
        }
        let [r, n] = self.leaf.shape[..] else {
            return Err(Error::Format("leaf shape must have two entries".into()));
        };
        if self.leaf.data.len() != r * n {
            return Err(Error::Format("leaf data length mismatch".into()));
        }
        let leaf = DMatrix::from_row_slice(r, n, &self.leaf.data);
        TensorTrain::new(grid, basis, cores, leaf)
    }
}

/// Builds a train from the dense `b^d x (m+1)` leaf-coefficient matrix by a
/// left-to-right sequential SVD. `tol = None` keeps every singular vector.
pub fn tt_svd(
    grid: Grid,
    basis: PolyBasis,
    leaf_coeffs: &DMatrix<f64>,
    tol: Option<f64>,
) -> Result<TensorTrain> {
    let n = basis.dim();
    if leaf_coeffs.nrows() as u64 != grid.leaves() || leaf_coeffs.ncols() != n {
        return Err(Error::Shape(format!(
            "dense tensor is {}x{}, expected {}x{}",
            leaf_coeffs.nrows(),
            leaf_coeffs.ncols(),
            grid.leaves(),
            n
        )));
    }
    let d = grid.depth;
    let b = grid.base;
    let c = basis
        .gram()
        .cholesky()
        .expect("leaf Gram matrix is positive definite")
        .l();
    let scaled = leaf_coeffs * &c;
    // row-major buffer over (i_1, ..., i_d, k)
    let mut buf: Vec<f64> = Vec::with_capacity(scaled.len());
    for j in 0..scaled.nrows() {
        for k in 0..n {
            buf.push(scaled[(j, k)]);
        }
    }
    let frob = scaled.norm();
    let rule = match tol {
        None => Truncation::Full,
        Some(t) => Truncation::Tail(t * frob / (d.max(1) as f64).sqrt()),
    };
    let mut r = 1usize;
    let mut cores = Vec::with_capacity(d);
    for _ in 0..d {
        let rows = r * b;
        let cols = buf.len() / rows;
        let m = DMatrix::from_row_slice(rows, cols, &buf);
        let split = svd_split(&m, rule);
        let k = split.u.ncols();
        let slices = (0..b)
            .map(|i| DMatrix::from_fn(r, k, |a, beta| split.u[(a * b + i, beta)]))
            .collect();
        cores.push(TTCore { slices });
        buf.clear();
        for a in 0..k {
            for j in 0..cols {
                buf.push(split.sv[(a, j)]);
            }
        }
        r = k;
    }
    let leaf_scaled = DMatrix::from_row_slice(r, n, &buf);
    let leaf = leaf_scaled * c.try_inverse().expect("Cholesky factor invertible");
    TensorTrain::new(grid, basis, cores, leaf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tt(grid: Grid, basis: PolyBasis, rank: usize, seed: u64) -> TensorTrain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cores = Vec::new();
        let mut r = 1;
        for _ in 0..grid.depth {
            let slices = (0..grid.base)
                .map(|_| DMatrix::from_fn(r, rank, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            cores.push(TTCore::new(slices).unwrap());
            r = rank;
        }
        let leaf = DMatrix::from_fn(r, basis.dim(), |_, _| rng.random_range(-1.0..1.0));
        TensorTrain::new(grid, basis, cores, leaf).unwrap()
    }

    fn sample_points(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    fn max_diff(a: &TensorTrain, b: &TensorTrain, pts: &[f64]) -> f64 {
        pts.iter()
            .map(|&x| (a.evaluate(x).unwrap() - b.evaluate(x).unwrap()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_inconsistent_chain() {
        let grid = Grid::new(2, 2).unwrap();
        let basis = PolyBasis::legendre(1);
        let c1 = TTCore::new(vec![DMatrix::zeros(1, 2); 2]).unwrap();
        let c2 = TTCore::new(vec![DMatrix::zeros(3, 1); 2]).unwrap();
        assert!(TensorTrain::new(grid, basis, vec![c1, c2], DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn add_is_linear() {
        let grid = Grid::new(3, 4).unwrap();
        let basis = PolyBasis::legendre(2);
        let a = random_tt(grid, basis, 3, 1);
        let b = random_tt(grid, basis, 2, 2);
        let s = a.add(&b).unwrap();
        assert_eq!(s.stored_ranks(), vec![5; 4]);
        for x in sample_points(100, 3) {
            let lhs = s.evaluate(x).unwrap();
            let rhs = a.evaluate(x).unwrap() + b.evaluate(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let z = a.add(&TensorTrain::zero(grid, basis)).unwrap();
        assert!(max_diff(&z, &a, &sample_points(100, 4)) < 1e-14);
    }

    #[test]
    fn add_rejects_mismatch() {
        let a = TensorTrain::zero(Grid::new(2, 3).unwrap(), PolyBasis::legendre(1));
        let b = TensorTrain::zero(Grid::new(3, 3).unwrap(), PolyBasis::legendre(1));
        let c = TensorTrain::zero(Grid::new(2, 3).unwrap(), PolyBasis::legendre(2));
        assert!(a.add(&b).is_err());
        assert!(a.add(&c).is_err());
    }

    #[test]
    fn scaling() {
        let grid = Grid::new(2, 5).unwrap();
        let a = random_tt(grid, PolyBasis::legendre(1), 2, 7);
        for x in sample_points(20, 8) {
            assert_eq!(a.scale(0.0).evaluate(x).unwrap(), 0.0);
            assert_eq!(a.scale(1.0).evaluate(x).unwrap(), a.evaluate(x).unwrap());
        }
    }

    #[test]
    fn orthogonalization_preserves_values() {
        let grid = Grid::new(2, 6).unwrap();
        for kind in [BasisKind::LegendreShifted, BasisKind::ChebyshevShifted, BasisKind::Monomial] {
            let a = random_tt(grid, PolyBasis::new(kind, 3), 4, 11);
            let pts = sample_points(200, 12);
            for dir in [Direction::Left, Direction::Right] {
                let o = a.orthogonalize(dir);
                for &x in &pts {
                    let (u, v) = (a.evaluate(x).unwrap(), o.evaluate(x).unwrap());
                    assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
                }
            }
            // left-orthogonal cores
            let o = a.orthogonalize(Direction::Left);
            for c in o.cores() {
                let mut g = DMatrix::zeros(c.right_rank(), c.right_rank());
                for s in c.slices() {
                    g += s.transpose() * s;
                }
                assert!((g - DMatrix::identity(c.right_rank(), c.right_rank())).amax() < 1e-12);
            }
        }
        let z = TensorTrain::zero(grid, PolyBasis::legendre(1));
        let oz = z.orthogonalize(Direction::Right);
        assert!(sample_points(10, 1).iter().all(|&x| oz.evaluate(x).unwrap() == 0.0));
    }

    #[test]
    fn right_orthogonal_norm_is_first_core() {
        let grid = Grid::new(3, 3).unwrap();
        let a = random_tt(grid, PolyBasis::legendre(2), 3, 5);
        let o = a.orthogonalize(Direction::Right);
        let first: f64 = o.cores()[0].slices().iter().map(|s| s.norm_squared()).sum();
        let via_core = (first * grid.width()).sqrt();
        // direct quadrature over leaves
        let (x, w) = crate::quadrature::gauss_legendre(6);
        let mut sum = 0.0;
        a.for_each_leaf(|_, c| {
            for (x, w) in x.iter().zip(&w) {
                let v = a.basis().eval_poly(c, *x);
                sum += w * v * v;
            }
        });
        let direct = (sum * grid.width()).sqrt();
        assert!((via_core - direct).abs() <= 1e-10 * direct);
        assert!((a.l2_norm() - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn round_zero_tol_is_lossless() {
        let grid = Grid::new(2, 7).unwrap();
        let a = random_tt(grid, PolyBasis::legendre(2), 5, 21);
        let r = a.round(0.0);
        let diff = r.add(&a.scale(-1.0)).unwrap().l2_norm();
        assert!(diff <= 1e-12 * a.l2_norm());
        // redundant sum collapses
        let s = a.add(&a).unwrap().round(1e-12);
        assert_eq!(s.stored_ranks(), a.ranks(1e-10).ranks);
    }

    #[test]
    fn round_respects_tolerance() {
        let grid = Grid::new(2, 8).unwrap();
        let a = random_tt(grid, PolyBasis::legendre(1), 6, 33);
        for tol in [1e-1, 1e-2, 0.3] {
            let r = a.round(tol);
            let err = r.add(&a.scale(-1.0)).unwrap().l2_norm();
            assert!(err <= tol * a.l2_norm() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn ranks_respect_dimension_bound() {
        let grid = Grid::new(2, 6).unwrap();
        let a = random_tt(grid, PolyBasis::legendre(1), 8, 3);
        let r = a.ranks(1e-10);
        for (nu, &rv) in r.ranks.iter().enumerate() {
            let nu = nu + 1;
            let bound = 2usize.pow(nu as u32).min(2 * 2usize.pow((6 - nu) as u32));
            assert_eq!(rv, bound.min(8));
        }
        let z = TensorTrain::zero(grid, PolyBasis::legendre(1));
        assert_eq!(z.ranks(1e-10).ranks, vec![0; 6]);
    }

    #[test]
    fn extend_and_change_basis_preserve_values() {
        let grid = Grid::new(3, 2).unwrap();
        let a = random_tt(grid, PolyBasis::legendre(2), 2, 9);
        let e = a.extend(3).unwrap();
        assert_eq!(e.depth(), 5);
        let pts = sample_points(100, 10);
        assert!(max_diff(&a, &e, &pts) < 1e-12);
        let c = a.change_basis(PolyBasis::new(BasisKind::ChebyshevShifted, 4)).unwrap();
        assert!(max_diff(&a, &c, &pts) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let grid = Grid::new(2, 3).unwrap();
        let a = random_tt(grid, PolyBasis::new(BasisKind::ChebyshevShifted, 2), 3, 4);
        let back = TensorTrain::from_json(&a.to_json()).unwrap();
        assert_eq!(a, back);
        assert!(TensorTrain::from_json("{}").is_err());
    }

    #[test]
    fn tt_svd_reproduces_dense_tensor() {
        let grid = Grid::new(2, 5).unwrap();
        let basis = PolyBasis::legendre(2);
        let a = random_tt(grid, basis, 3, 17);
        let dense = a.leaf_matrix();
        for tol in [None, Some(1e-12)] {
            let t = tt_svd(grid, basis, &dense, tol).unwrap();
            assert!((t.leaf_matrix() - &dense).amax() < 1e-12);
        }
        let t = tt_svd(grid, basis, &dense, Some(1e-12)).unwrap();
        assert!(t.stored_ranks().iter().all(|&r| r <= 3));
        let full = tt_svd(grid, basis, &dense, None).unwrap();
        assert_eq!(full.stored_ranks(), vec![2, 4, 8, 6, 3]);
    }

    #[test]
    fn inner_matches_leaf_quadrature() {
        let grid = Grid::new(2, 4).unwrap();
        let basis = PolyBasis::new(BasisKind::ChebyshevShifted, 3);
        let a = random_tt(grid, basis, 2, 1);
        let b = random_tt(grid, basis, 3, 2);
        let (ma, mb) = (a.leaf_matrix(), b.leaf_matrix());
        let (x, w) = crate::quadrature::gauss_legendre(8);
        let mut sum = 0.0;
        for j in 0..16 {
            let ca: Vec<f64> = ma.row(j).iter().copied().collect();
            let cb: Vec<f64> = mb.row(j).iter().copied().collect();
            for (x, w) in x.iter().zip(&w) {
                sum += w * basis.eval_poly(&ca, *x) * basis.eval_poly(&cb, *x);
            }
        }
        let direct = sum / 16.0;
        assert!((a.inner(&b).unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }
}
