//! Local polynomial interpolation, TT construction from samplers and re-interpolation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly::{cgl_nodes, BasisKind, PolyBasis};
use crate::tensor_train::{tt_svd, TensorTrain};
use crate::tensorization::{leaf_restriction, Grid, LeafIndex};

/// Relative tolerance of the TT-SVD in [`tensor_interpolate`].
pub const INTERPOLATION_SVD_TOL: f64 = 1e-12;

/// Largest number of leaves [`tensor_interpolate`] will form densely.
pub const MAX_DENSE_LEAVES: u64 = 1 << 16;

/// Polynomial interpolation of degree `m` at fixed nodes in `[0,1]`.
#[derive(Debug, Clone)]
pub struct Interpolator {
    basis: PolyBasis,
    nodes: Vec<f64>,
    /// Inverse of the collocation matrix `V[n][k] = phi_k(node_n)`.
    solve: DMatrix<f64>,
}

impl Interpolator {
    /// Chebyshev–Gauss–Lobatto nodes, coefficients in the given basis kind.
    pub fn new(degree: usize, kind: BasisKind) -> Self {
        Self::with_nodes(PolyBasis::new(kind, degree), cgl_nodes(degree))
            .expect("Lobatto nodes are distinct")
    }

    pub fn with_nodes(basis: PolyBasis, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() != basis.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} nodes for degree {}",
                nodes.len(),
                basis.degree
            )));
        }
        if nodes.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("nodes must lie in [0,1]".into()));
        }
        let n = basis.dim();
        let v = DMatrix::from_fn(n, n, |r, k| basis.eval(nodes[r])[k]);
        let solve = v
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("nodes are not distinct".into()))?;
        Ok(Interpolator {
            basis,
            nodes,
            solve,
        })
    }

    pub fn basis(&self) -> PolyBasis {
        self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Coefficients of `I_m g` from the values of `g` at the nodes.
    pub fn from_values(&self, values: &[f64]) -> Vec<f64> {
        (&self.solve * DVector::from_column_slice(values))
            .iter()
            .copied()
            .collect()
    }

    /// Matrix whose row `q` holds the coefficients of `I_m phi_q` for `phi` in `source`.
    pub fn leaf_map(&self, source: PolyBasis) -> DMatrix<f64> {
        let n = self.basis.dim();
        let w = DMatrix::from_fn(n, source.dim(), |r, q| source.eval(self.nodes[r])[q]);
        (&self.solve * w).transpose()
    }
}

/// `I_m f` on `[0,1]`: coefficients in the interpolator's basis.
pub fn interpolate_unit<F: Fn(f64) -> f64>(f: F, interp: &Interpolator) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(interp.nodes.len());
    for &y in &interp.nodes {
        let v = f(y);
        if !v.is_finite() {
            return Err(Error::NonFinite(y));
        }
        values.push(v);
    }
    Ok(interp.from_values(&values))
}

/// `I_{b,d,m} f` compressed with the default TT-SVD tolerance.
pub fn tensor_interpolate<F: Fn(f64) -> f64>(
    f: F,
    grid: Grid,
    interp: &Interpolator,
) -> Result<TensorTrain> {
    tensor_interpolate_with(f, grid, interp, Some(INTERPOLATION_SVD_TOL))
}

/// `I_{b,d,m} f`; `tol = None` keeps the full structural ranks.
pub fn tensor_interpolate_with<F: Fn(f64) -> f64>(
    f: F,
    grid: Grid,
    interp: &Interpolator,
    tol: Option<f64>,
) -> Result<TensorTrain> {
    if grid.leaves() > MAX_DENSE_LEAVES {
        return Err(Error::InvalidGrid(format!(
            "{} leaves exceed the dense limit {MAX_DENSE_LEAVES}",
            grid.leaves()
        )));
    }
    let n = interp.basis.dim();
    let mut dense = DMatrix::zeros(grid.leaves() as usize, n);
    for j in 0..grid.leaves() {
        let g = leaf_restriction(&f, LeafIndex::new(grid, j)?);
        let c = interpolate_unit(g, interp)?;
        for (k, v) in c.into_iter().enumerate() {
            dense[(j as usize, k)] = v;
        }
    }
    tt_svd(grid, interp.basis, &dense, tol)
}

/// `I_{b,dbar,m}` applied to a train at `(d, mbar)` with `dbar >= d`, `m <= mbar`.
/// Ranks up to level `d` are kept; deeper levels get rank `mbar + 1`.
pub fn reinterpolate(tt: &TensorTrain, target_depth: usize, interp: &Interpolator) -> Result<TensorTrain> {
    if target_depth < tt.depth() {
        return Err(Error::InvalidArgument(format!(
            "target depth {target_depth} below current depth {}",
            tt.depth()
        )));
    }
    if interp.degree() > tt.basis().degree {
        return Err(Error::InvalidArgument(format!(
            "target degree {} above current degree {}",
            interp.degree(),
            tt.basis().degree
        )));
    }
    let map = interp.leaf_map(tt.basis());
    tt.append_levels(target_depth - tt.depth(), &map, interp.basis)
}

/// Coefficients `a_0..a_mbar` of `f(x) ~ a_0/2 + sum_k a_k T_k(2x - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    pub a: Vec<f64>,
}

impl ChebyshevSeries {
    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Coefficients in the shifted Chebyshev basis (halved constant term).
    pub fn basis_coeffs(&self) -> Vec<f64> {
        let mut c = self.a.clone();
        c[0] *= 0.5;
        c
    }

    pub fn basis(&self) -> PolyBasis {
        PolyBasis::new(BasisKind::ChebyshevShifted, self.degree())
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.basis().eval_poly(&self.basis_coeffs(), x)
    }
}

/// Truncated Chebyshev expansion from a discrete cosine transform on
/// `4 (mbar + 1)` Chebyshev–Gauss points.
pub fn chebyshev_truncate<F: Fn(f64) -> f64>(f: F, degree: usize) -> Result<ChebyshevSeries> {
    let k = 4 * (degree + 1);
    let mut values = Vec::with_capacity(k);
    let mut thetas = Vec::with_capacity(k);
    for n in 0..k {
        let theta = std::f64::consts::PI * (n as f64 + 0.5) / k as f64;
        let x = (1.0 + theta.cos()) / 2.0;
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite(x));
        }
        values.push(v);
        thetas.push(theta);
    }
    let a = (0..=degree)
        .map(|j| {
            2.0 / k as f64
                * values
                    .iter()
                    .zip(&thetas)
                    .map(|(v, t)| v * (j as f64 * t).cos())
                    .sum::<f64>()
        })
        .collect();
    Ok(ChebyshevSeries { a })
}
