//! The conversion map `t_{b,d}` between points of `[0,1)` and multi-indices
//! `(i_1, ..., i_d, y)`, leaf restriction, and the leaf-sum form of the L^p norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of leaves a grid may have; keeps flat indices exact in `f64`.
const MAX_LEAVES: u64 = 1 << 53;

/// A base `b` and depth `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub base: usize,
    pub depth: usize,
}

impl Grid {
    pub fn new(base: usize, depth: usize) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidGrid(format!("base {base} < 2")));
        }
        match (base as u64).checked_pow(depth as u32) {
            Some(n) if n <= MAX_LEAVES => Ok(Grid { base, depth }),
            _ => Err(Error::InvalidGrid(format!(
                "{base}^{depth} leaves exceed 2^53"
            ))),
        }
    }

    /// Number of leaves `b^d`.
    pub fn leaves(&self) -> u64 {
        (self.base as u64).pow(self.depth as u32)
    }

    /// Leaf width `b^{-d}`.
    pub fn width(&self) -> f64 {
        (self.base as f64).powi(-(self.depth as i32))
    }

    pub fn with_depth(&self, depth: usize) -> Result<Grid> {
        Grid::new(self.base, depth)
    }
}

/// A point in factored form `(i_1, ..., i_d, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexPoint {
    pub grid: Grid,
    pub digits: Vec<usize>,
    pub remainder: f64,
}

/// Index of one depth-`d` leaf interval `[j b^{-d}, (j+1) b^{-d})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafIndex {
    pub grid: Grid,
    pub flat: u64,
}

impl LeafIndex {
    pub fn new(grid: Grid, flat: u64) -> Result<Self> {
        if flat >= grid.leaves() {
            return Err(Error::LeafOutOfRange {
                index: flat,
                count: grid.leaves(),
            });
        }
        Ok(LeafIndex { grid, flat })
    }

    pub fn from_digits(grid: Grid, digits: &[usize]) -> Result<Self> {
        if digits.len() != grid.depth {
            return Err(Error::Shape(format!(
                "{} digits for depth {}",
                digits.len(),
                grid.depth
            )));
        }
        let mut flat = 0u64;
        for &i in digits {
            if i >= grid.base {
                return Err(Error::InvalidArgument(format!(
                    "digit {i} >= base {}",
                    grid.base
                )));
            }
            flat = flat * grid.base as u64 + i as u64;
        }
        Ok(LeafIndex { grid, flat })
    }

    /// Digits `(i_1, ..., i_d)`, most significant first.
    pub fn digits(&self) -> Vec<usize> {
        let b = self.grid.base as u64;
        let mut out = vec![0; self.grid.depth];
        let mut j = self.flat;
        for k in (0..self.grid.depth).rev() {
            out[k] = (j % b) as usize;
            j /= b;
        }
        out
    }

    /// Left endpoint `j b^{-d}` of the leaf interval.
    pub fn left(&self) -> f64 {
        self.flat as f64 * self.grid.width()
    }
}

/// Expands `x` into `d` base-`b` digits and a remainder `y`.
pub fn encode_point(x: f64, grid: Grid) -> Result<MultiIndexPoint> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::OutOfDomain(x));
    }
    let b = grid.base as f64;
    let mut t = x;
    let mut digits = Vec::with_capacity(grid.depth);
    for _ in 0..grid.depth {
        let mut digit = (t * b).floor().min(b - 1.0);
        // fused remainder; the rounded product may land on the next integer
        let mut rest = t.mul_add(b, -digit);
        if rest < 0.0 {
            digit -= 1.0;
            rest = t.mul_add(b, -digit);
        }
        if rest >= 1.0 {
            rest = prev_below_one();
        }
        digits.push(digit as usize);
        t = rest;
    }
    Ok(MultiIndexPoint {
        grid,
        digits,
        remainder: t,
    })
}

/// Evaluates `t_{b,d}(i_1, ..., i_d, y)`.
pub fn decode_point(p: &MultiIndexPoint) -> f64 {
    let b = p.grid.base as f64;
    let mut v = p.remainder;
    for &i in p.digits.iter().rev() {
        v = (i as f64 + v) / b;
    }
    if v >= 1.0 {
        prev_below_one()
    } else {
        v
    }
}

fn prev_below_one() -> f64 {
    1.0 - f64::EPSILON / 2.0
}

/// The rescaled restriction `y -> f(b^{-d}(j + y))` of `f` to leaf `j`.
/// At `y = 1` the point is pulled to the largest float below the leaf's right
/// end, so endpoint nodes see the leaf's own piece of a discontinuous `f`.
pub fn leaf_restriction<F>(f: F, leaf: LeafIndex) -> impl Fn(f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let h = leaf.grid.width();
    let j = leaf.flat as f64;
    let right = (h * (j + 1.0)).next_down();
    move |y| f((h * (j + y)).min(right))
}

/// Combines per-leaf norms `||g_j||_p` into `||f||_p`; `p = inf` takes the max.
pub fn lp_norm_from_leaves(leaf_norms: &[f64], grid: Grid, p: f64) -> Result<f64> {
    if leaf_norms.len() as u64 != grid.leaves() {
        return Err(Error::Shape(format!(
            "{} leaf norms for {} leaves",
            leaf_norms.len(),
            grid.leaves()
        )));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p = {p}")));
    }
    if let Some(bad) = leaf_norms.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("leaf norm {bad}")));
    }
    if p.is_infinite() {
        return Ok(leaf_norms.iter().cloned().fold(0.0, f64::max));
    }
    let sum: f64 = leaf_norms.iter().map(|v| v.powf(p)).sum();
    Ok((grid.width() * sum).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(b: usize, d: usize) -> Grid {
        Grid::new(b, d).unwrap()
    }

    #[test]
    fn encode_examples() {
        let p = encode_point(0.625, g(2, 2)).unwrap();
        assert_eq!(p.digits, vec![1, 0]);
        assert_eq!(p.remainder, 0.5);

        let p = encode_point(0.0, g(3, 4)).unwrap();
        assert_eq!(p.digits, vec![0; 4]);
        assert_eq!(p.remainder, 0.0);

        let p = encode_point(7.0 / 9.0, g(3, 2)).unwrap();
        assert_eq!(p.digits, vec![2, 1]);
        assert!(p.remainder < 1e-14);
        assert!((decode_point(&p) - 7.0 / 9.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn decode_examples() {
        let mk = |digits: Vec<usize>, y, d| MultiIndexPoint {
            grid: g(2, d),
            digits,
            remainder: y,
        };
        assert_eq!(decode_point(&mk(vec![1, 0], 0.5, 2)), 0.625);
        assert_eq!(decode_point(&mk(vec![0, 0], 0.0, 2)), 0.0);
        assert_eq!(decode_point(&mk(vec![1, 1], 0.25, 2)), 0.8125);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid::new(1, 3).is_err());
        assert!(Grid::new(2, 60).is_err());
        assert!(Grid::new(2, 40).is_ok());
        assert!(encode_point(1.0, g(2, 3)).is_err());
        assert!(encode_point(-0.1, g(2, 3)).is_err());
        assert!(LeafIndex::new(g(2, 2), 4).is_err());
    }

    #[test]
    fn leaf_restriction_examples() {
        let r = leaf_restriction(|x| x, LeafIndex::new(g(2, 1), 1).unwrap());
        assert_eq!(r(0.0), 0.5);
        assert_eq!(r(0.5), 0.75);
        for j in 0..8 {
            let r = leaf_restriction(|_| 3.5, LeafIndex::new(g(2, 3), j).unwrap());
            assert_eq!(r(0.3), 3.5);
        }
    }

    #[test]
    fn leaf_norm_examples() {
        let grid = g(2, 3);
        assert_eq!(lp_norm_from_leaves(&[1.0; 8], grid, 2.0).unwrap(), 1.0);
        assert_eq!(lp_norm_from_leaves(&[1.0; 8], grid, f64::INFINITY).unwrap(), 1.0);
        assert!(lp_norm_from_leaves(&[1.0; 7], grid, 2.0).is_err());
        assert!(lp_norm_from_leaves(&[-1.0; 8], grid, 2.0).is_err());
    }

    #[test]
    fn leaf_digits_round_trip() {
        let grid = g(3, 4);
        for flat in 0..grid.leaves() {
            let leaf = LeafIndex::new(grid, flat).unwrap();
            assert_eq!(LeafIndex::from_digits(grid, &leaf.digits()).unwrap(), leaf);
        }
    }

    proptest! {
        #[test]
        fn dyadic_round_trip_is_exact(k in 0u64..(1 << 40), d in 0usize..30) {
            let x = k as f64 / (1u64 << 40) as f64;
            let p = encode_point(x, g(2, d)).unwrap();
            prop_assert_eq!(decode_point(&p), x);
            prop_assert!(p.remainder >= 0.0 && p.remainder < 1.0);
        }

        #[test]
        fn ternary_round_trip(x in 0.0f64..1.0, d in 0usize..20) {
            let p = encode_point(x, g(3, d)).unwrap();
            prop_assert!(p.digits.iter().all(|&i| i < 3));
            prop_assert!(p.remainder >= 0.0 && p.remainder < 1.0);
            let back = decode_point(&p);
            prop_assert!((back - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn leaf_consistency(flat in 0u64..243, y in 0.0f64..1.0) {
            let grid = g(3, 5);
            let f = |x: f64| (3.0 * x).sin() + x * x;
            let leaf = LeafIndex::new(grid, flat).unwrap();
            let r = leaf_restriction(f, leaf);
            let p = MultiIndexPoint { grid, digits: leaf.digits(), remainder: y };
            prop_assert!((r(y) - f(decode_point(&p))).abs() < 1e-14);
        }
    }
}
