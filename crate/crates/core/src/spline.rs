//! Piecewise polynomials with b-adic breakpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{mono_affine, mono_derivative, mono_eval, mono_lp_norm};

/// The b-adic number `index * b^{-level}`, stored in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BadicKnot {
    pub index: u64,
    pub level: u32,
}

impl BadicKnot {
    pub fn new(base: usize, index: u64, level: u32) -> Self {
        let b = base as u64;
        let (mut index, mut level) = (index, level);
        while level > 0 && index % b == 0 {
            index /= b;
            level -= 1;
        }
        BadicKnot { index, level }
    }

    pub fn value(&self, base: usize) -> f64 {
        self.index as f64 / (base as f64).powi(self.level as i32)
    }

    /// Numerator at a finer level `at >= self.level`.
    pub fn scaled(&self, base: usize, at: u32) -> u64 {
        self.index * (base as u64).pow(at - self.level)
    }

    /// Recovers the knot from a float, if it is `i b^{-k}` for some `k <= max_level`.
    pub fn from_f64(base: usize, x: f64, max_level: u32) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        let b = base as f64;
        // powers of two scale exactly; other bases carry one rounding of x
        let slack = if base.is_power_of_two() { 0.0 } else { 4.0 * f64::EPSILON };
        let mut scale = 1.0;
        for level in 0..=max_level {
            let v = x * scale;
            if v > (1u64 << 53) as f64 {
                break;
            }
            let r = v.round();
            if (v - r).abs() <= slack * v.max(1.0) {
                return Some(BadicKnot::new(base, r as u64, level));
            }
            scale *= b;
        }
        None
    }
}

/// Cell `[index b^{-level}, (index+1) b^{-level})` of the b-adic tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub level: u32,
    pub index: u64,
}

impl Cell {
    pub fn digits(&self, base: usize) -> Vec<usize> {
        let b = base as u64;
        let mut out = vec![0; self.level as usize];
        let mut j = self.index;
        for k in (0..self.level as usize).rev() {
            out[k] = (j % b) as usize;
            j /= b;
        }
        out
    }

    pub fn left(&self, base: usize) -> f64 {
        self.index as f64 / (base as f64).powi(self.level as i32)
    }
}

/// Splits `[a, c)` into the fewest b-adic cells: at each position take the
/// largest aligned cell that fits, left to right.
pub fn subpartition(base: usize, a: BadicKnot, c: BadicKnot) -> Result<Vec<Cell>> {
    let top = a.level.max(c.level);
    let (mut pos, end) = (a.scaled(base, top), c.scaled(base, top));
    if pos >= end {
        return Err(Error::InvalidSpline("empty interval".into()));
    }
    let b = base as u64;
    let mut cells = Vec::new();
    while pos < end {
        let mut level = top;
        let mut size = 1u64;
        while level > 0 && pos % (size * b) == 0 && pos + size * b <= end {
            size *= b;
            level -= 1;
        }
        cells.push(Cell {
            level,
            index: pos / size,
        });
        pos += size;
    }
    Ok(cells)
}

/// A spline on `[0,1)`: knots `0 = x_0 < ... < x_N = 1` and one polynomial per
/// piece, given by monomial coefficients in the local variable
/// `u = (x - x_{k-1}) / (x_k - x_{k-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    base: usize,
    knots: Vec<BadicKnot>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePolynomial {
    pub fn new(base: usize, knots: Vec<BadicKnot>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidSpline(format!("base {base}")));
        }
        if pieces.is_empty() {
            return Err(Error::InvalidSpline("no pieces".into()));
        }
        if knots.len() != pieces.len() + 1 {
            return Err(Error::InvalidSpline(format!(
                "{} knots for {} pieces",
                knots.len(),
                pieces.len()
            )));
        }
        let knots: Vec<BadicKnot> = knots
            .into_iter()
            .map(|k| BadicKnot::new(base, k.index, k.level))
            .collect();
        let top = knots.iter().map(|k| k.level).max().unwrap_or(0);
        if (base as u64).checked_pow(top).is_none_or(|n| n > 1 << 53) {
            return Err(Error::InvalidSpline(format!("knot level {top} too deep")));
        }
        if knots[0] != BadicKnot::new(base, 0, 0) || knots[knots.len() - 1] != BadicKnot::new(base, 1, 0) {
            return Err(Error::InvalidSpline("knots must start at 0 and end at 1".into()));
        }
        for w in knots.windows(2) {
            if w[0].scaled(base, top) >= w[1].scaled(base, top) {
                return Err(Error::InvalidSpline("knots not strictly increasing".into()));
            }
        }
        if pieces.iter().any(|p| p.is_empty() || p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidSpline("empty or non-finite piece".into()));
        }
        Ok(PiecewisePolynomial {
            base,
            knots,
            pieces,
        })
    }

    /// Builds a spline from float breakpoints, rejecting any that is not b-adic.
    pub fn from_breakpoints(base: usize, breakpoints: &[f64], pieces: Vec<Vec<f64>>) -> Result<Self> {
        let max_level = (53.0 / (base as f64).log2()).floor() as u32;
        let knots = breakpoints
            .iter()
            .map(|&x| {
                BadicKnot::from_f64(base, x, max_level)
                    .ok_or_else(|| Error::NonBadicKnot(format!("{x}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, knots, pieces)
    }

    /// `N = b^d` equal pieces.
    pub fn uniform(base: usize, depth: u32, pieces: Vec<Vec<f64>>) -> Result<Self> {
        let n = (base as u64).pow(depth);
        if pieces.len() as u64 != n {
            return Err(Error::InvalidSpline(format!(
                "{} pieces for {n} uniform cells",
                pieces.len()
            )));
        }
        let knots = (0..=n).map(|k| BadicKnot::new(base, k, depth)).collect();
        Self::new(base, knots, pieces)
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn knots(&self) -> &[BadicKnot] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Largest polynomial degree among the pieces.
    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    /// Largest knot level `d = max d_k`.
    pub fn max_level(&self) -> u32 {
        self.knots.iter().map(|k| k.level).max().unwrap_or(0)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.value(self.base)).collect()
    }

    /// Whether the knots are exactly `k b^{-d}` for `k = 0..b^d`.
    pub fn is_uniform(&self, depth: u32) -> bool {
        let n = (self.base as u64).pow(depth);
        self.knots.len() as u64 == n + 1
            && self
                .knots
                .iter()
                .enumerate()
                .all(|(k, knot)| *knot == BadicKnot::new(self.base, k as u64, depth))
    }

    /// Index of the piece containing `x`.
    pub fn piece_index(&self, x: f64) -> usize {
        let bp = self.breakpoints();
        match bp.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(self.pieces.len() - 1),
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let k = self.piece_index(x);
        let (a, c) = (self.knots[k].value(self.base), self.knots[k + 1].value(self.base));
        mono_eval(&self.pieces[k], (x - a) / (c - a))
    }

    /// `j`-th derivative of piece `k` at local coordinate `u`, in x-units.
    pub fn piece_derivative(&self, k: usize, j: usize, u: f64) -> f64 {
        let h = self.knots[k + 1].value(self.base) - self.knots[k].value(self.base);
        let mut c = self.pieces[k].clone();
        for _ in 0..j {
            c = mono_derivative(&c);
        }
        mono_eval(&c, u) / h.powi(j as i32)
    }

    /// Largest `c` (up to `degree`) such that derivatives `0..=c` match at all
    /// interior knots within `tol` relative; `-1` if the values already jump.
    pub fn continuity(&self, tol: f64) -> i64 {
        let m = self.degree();
        let mut c = -1i64;
        'order: for j in 0..=m {
            for k in 1..self.pieces.len() {
                let l = self.piece_derivative(k - 1, j, 1.0);
                let r = self.piece_derivative(k, j, 0.0);
                if (l - r).abs() > tol * l.abs().max(r.abs()).max(1.0) {
                    break 'order;
                }
            }
            c = j as i64;
        }
        c
    }

    /// `||s||_p` integrated in `x` piece by piece.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (k, piece) in self.pieces.iter().enumerate() {
            let (a, c) = (self.knots[k].value(self.base), self.knots[k + 1].value(self.base));
            let h = c - a;
            let v = mono_lp_norm(&mono_affine(piece, -a / h, 1.0 / h), a, c, p);
            acc = if p.is_infinite() { f64::max(acc, v) } else { acc + v.powf(p) };
        }
        if p.is_infinite() {
            acc
        } else {
            acc.powf(1.0 / p)
        }
    }

    /// Monomial coefficients of the spline on `cell`, in the cell-local variable.
    /// The cell must lie inside a single piece.
    pub fn cell_polynomial(&self, cell: Cell) -> Result<Vec<f64>> {
        let top = self.max_level().max(cell.level);
        let b = self.base as u64;
        let start = cell.index * b.pow(top - cell.level);
        let size = b.pow(top - cell.level);
        let pos: Vec<u64> = self.knots.iter().map(|k| k.scaled(self.base, top)).collect();
        let k = pos.partition_point(|&p| p <= start) - 1;
        if k >= self.pieces.len() || start + size > pos[k + 1] {
            return Err(Error::InvalidSpline(format!(
                "cell ({}, {}) straddles a knot",
                cell.level, cell.index
            )));
        }
        let h = (pos[k + 1] - pos[k]) as f64;
        let alpha = (start - pos[k]) as f64 / h;
        let beta = size as f64 / h;
        Ok(mono_affine(&self.pieces[k], alpha, beta))
    }

    pub fn to_json(&self) -> String {
        let doc = SplineDoc {
            base: self.base,
            knots: self.knots.iter().map(|k| KnotDoc::Pair([k.index, k.level as u64])).collect(),
            pieces: self.pieces.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable spline")
    }

    /// Parses `{base, knots, pieces}`. Knots are `[i, d]` pairs or numbers;
    /// either the full sequence `0..1` or only the interior knots.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SplineDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let base = doc.base;
        if base < 2 {
            return Err(Error::InvalidSpline(format!("base {base}")));
        }
        let max_level = (53.0 / (base as f64).log2()).floor() as u32;
        let mut knots = Vec::with_capacity(doc.knots.len() + 2);
        for k in &doc.knots {
            knots.push(match *k {
                KnotDoc::Pair([i, d]) => {
                    if d > max_level as u64 {
                        return Err(Error::InvalidSpline(format!("knot level {d} too deep")));
                    }
                    BadicKnot::new(base, i, d as u32)
                }
                KnotDoc::Value(x) => BadicKnot::from_f64(base, x, max_level)
                    .ok_or_else(|| Error::NonBadicKnot(format!("{x}")))?,
            });
        }
        let n = doc.pieces.len();
        if knots.len() + 1 == n {
            knots.insert(0, BadicKnot::new(base, 0, 0));
            knots.push(BadicKnot::new(base, 1, 0));
        } else if knots.len() != n + 1 {
            return Err(Error::InvalidSpline(format!(
                "{} knots for {} pieces",
                knots.len(),
                n
            )));
        }
        Self::new(base, knots, doc.pieces)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KnotDoc {
    Pair([u64; 2]),
    Value(f64),
}

#[derive(Serialize, Deserialize)]
struct SplineDoc {
    base: usize,
    knots: Vec<KnotDoc>,
    pieces: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knot_reduction() {
        let k = BadicKnot::new(2, 4, 3);
        assert_eq!(k, BadicKnot { index: 1, level: 1 });
        assert_eq!(k.value(2), 0.5);
        assert_eq!(BadicKnot::from_f64(2, 0.375, 10), Some(BadicKnot { index: 3, level: 3 }));
        assert_eq!(BadicKnot::from_f64(3, 7.0 / 9.0, 10), Some(BadicKnot { index: 7, level: 2 }));
        assert_eq!(BadicKnot::from_f64(2, 0.3, 52), None);
    }

    #[test]
    fn subpartition_examples() {
        let zero = BadicKnot::new(2, 0, 0);
        let cells = subpartition(2, zero, BadicKnot::new(2, 3, 3)).unwrap();
        assert_eq!(
            cells,
            vec![Cell { level: 2, index: 0 }, Cell { level: 3, index: 2 }]
        );
        let cells = subpartition(3, BadicKnot::new(3, 1, 2), BadicKnot::new(3, 8, 2)).unwrap();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[2], Cell { level: 1, index: 1 });
        let whole = subpartition(2, zero, BadicKnot::new(2, 1, 0)).unwrap();
        assert_eq!(whole, vec![Cell { level: 0, index: 0 }]);
    }

    #[test]
    fn evaluation_and_json() {
        let s = PiecewisePolynomial::from_breakpoints(
            2,
            &[0.0, 0.625, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap();
        assert!((s.evaluate(0.3125) - 0.5).abs() < 1e-15);
        assert!((s.evaluate(0.625) - 1.0).abs() < 1e-15);
        let back = PiecewisePolynomial::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let interior = r#"{"base":2,"knots":[[5,3]],"pieces":[[0,1],[1,-1]]}"#;
        assert_eq!(PiecewisePolynomial::from_json(interior).unwrap(), s);
        let bad = r#"{"base":2,"knots":[0.3],"pieces":[[0],[1]]}"#;
        assert!(matches!(PiecewisePolynomial::from_json(bad), Err(Error::NonBadicKnot(_))));
        let unsorted = r#"{"base":2,"knots":[[3,2],[1,2]],"pieces":[[0],[1],[2]]}"#;
        assert!(matches!(
            PiecewisePolynomial::from_json(unsorted),
            Err(Error::InvalidSpline(_))
        ));
        assert!(PiecewisePolynomial::new(2, vec![], vec![]).is_err());
    }

    #[test]
    fn continuity_detection() {
        // hat: continuous, kink at 1/2
        let hat = PiecewisePolynomial::uniform(2, 1, vec![vec![0.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(hat.continuity(1e-12), 0);
        let haar = PiecewisePolynomial::uniform(2, 1, vec![vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(haar.continuity(1e-12), -1);
        // x^2 split at 1/2: (u/2)^2 and ((1+u)/2)^2
        let sq = PiecewisePolynomial::uniform(2, 1, vec![vec![0.0, 0.0, 0.25], vec![0.25, 0.5, 0.25]])
            .unwrap();
        assert_eq!(sq.continuity(1e-12), 2);
    }

    #[test]
    fn cell_polynomial_matches_evaluation() {
        let s = PiecewisePolynomial::new(
            3,
            vec![
                BadicKnot::new(3, 0, 0),
                BadicKnot::new(3, 4, 2),
                BadicKnot::new(3, 1, 0),
            ],
            vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 3.0]],
        )
        .unwrap();
        let cell = Cell { level: 2, index: 2 };
        let c = s.cell_polynomial(cell).unwrap();
        for &y in &[0.0, 0.3, 0.9] {
            let x = (2.0 + y) / 9.0;
            assert!((mono_eval(&c, y) - s.evaluate(x)).abs() < 1e-14);
        }
        assert!(s.cell_polynomial(Cell { level: 1, index: 1 }).is_err());
    }

    proptest! {
        #[test]
        fn subpartition_is_small_and_exact(base in 2usize..5, level in 1u32..9, a in 0u64..10_000, c in 0u64..10_000) {
            let n = (base as u64).pow(level);
            let (a, c) = (a % n, c % (n + 1));
            prop_assume!(a < c);
            let cells = subpartition(base, BadicKnot::new(base, a, level), BadicKnot::new(base, c, level)).unwrap();
            prop_assert!(cells.len() as u32 <= 2 * level * (base as u32 - 1));
            let mut pos = a;
            for cell in &cells {
                let size = (base as u64).pow(level - cell.level);
                prop_assert_eq!(cell.index * size, pos);
                pos += size;
            }
            prop_assert_eq!(pos, c);
        }
    }
}
