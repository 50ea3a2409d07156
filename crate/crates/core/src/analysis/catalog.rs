//! Random test inputs and the encoder catalog used by the rank oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoders::{
    encode_dilated, encode_fixed_knot_spline, encode_free_knot_spline_compact, encode_polynomial,
    encode_sawtooth, haar_mother, hat_mother, n_term_wavelet, sawtooth_value, WaveletSpec,
};
use crate::error::{Error, Result};
use crate::interpolation::{tensor_interpolate, Interpolator};
use crate::poly::{mono_affine, mono_eval, BasisKind};
use crate::spline::{BadicKnot, PiecewisePolynomial};
use crate::tensor_train::TensorTrain;
use crate::tensorization::Grid;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signed_unit(r: &mut ChaCha8Rng) -> f64 {
    let mag = r.random_range(0.5..1.0);
    if r.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Monomial coefficients of a degree-`degree` polynomial whose coefficients
/// have magnitude in `[0.5, 1)`, so the degree is exact.
pub fn random_polynomial(degree: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..=degree).map(|_| signed_unit(&mut r)).collect()
}

/// Random element of `S_{N,m,c}` with `N = b^d`: a global polynomial plus
/// truncated powers `(x - x_k)_+^j`, `c < j <= m`, at every interior knot.
pub fn random_fixed_knot_spline(b: usize, d: u32, m: usize, c: i64, seed: u64) -> Result<PiecewisePolynomial> {
    if c < -1 || c > m as i64 {
        return Err(Error::InvalidArgument(format!("continuity {c} outside [-1, {m}]")));
    }
    let n = (b as u64)
        .checked_pow(d)
        .filter(|&n| n <= 1 << 20)
        .ok_or_else(|| Error::InvalidGrid(format!("{b}^{d} pieces")))? as usize;
    let mut r = rng(seed);
    let global: Vec<f64> = (0..=m).map(|_| signed_unit(&mut r)).collect();
    let first = (c + 1) as usize;
    let jumps: Vec<Vec<f64>> = (1..n)
        .map(|_| (first..=m).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let h = 1.0 / n as f64;
    let mut pieces = Vec::with_capacity(n);
    for i in 0..n {
        let x = i as f64 * h;
        let mut p = mono_affine(&global, x, h);
        for (k, beta) in jumps.iter().enumerate().take(i) {
            let xk = (k + 1) as f64 * h;
            for (t, &bj) in beta.iter().enumerate() {
                let mut e = vec![0.0; first + t + 1];
                e[first + t] = bj;
                for (acc, v) in p.iter_mut().zip(mono_affine(&e, x - xk, h)) {
                    *acc += v;
                }
            }
        }
        pieces.push(p);
    }
    PiecewisePolynomial::uniform(b, d, pieces)
}

/// Random spline with `n` pieces, distinct knots on the level-`d` grid and
/// at least one knot of level exactly `d`; local coefficients uniform in `[-1,1]`.
pub fn random_free_knot_spline(b: usize, d: u32, m: usize, n: usize, seed: u64) -> Result<PiecewisePolynomial> {
    let cells = (b as u64)
        .checked_pow(d)
        .filter(|&c| c <= 1 << 53)
        .ok_or_else(|| Error::InvalidGrid(format!("{b}^{d} cells")))?;
    if n == 0 || n as u64 > cells {
        return Err(Error::InvalidArgument(format!("{n} pieces on {cells} cells")));
    }
    let mut r = rng(seed);
    let mut interior: Vec<u64> = Vec::with_capacity(n - 1);
    while interior.len() + 1 < n {
        let k = r.random_range(1..cells);
        if !interior.contains(&k) {
            interior.push(k);
        }
    }
    if n > 1 && d > 0 && interior.iter().all(|k| k % b as u64 == 0) {
        loop {
            let k = r.random_range(1..cells);
            if k % b as u64 != 0 {
                interior[0] = k;
                break;
            }
        }
    }
    interior.sort_unstable();
    let mut knots = vec![BadicKnot::new(b, 0, 0)];
    knots.extend(interior.iter().map(|&k| BadicKnot::new(b, k, d)));
    knots.push(BadicKnot::new(b, 1, 0));
    let pieces = (0..n)
        .map(|_| (0..=m).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    PiecewisePolynomial::new(b, knots, pieces)
}

type Sampler = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// An encoded train together with an independent sampler of the source function.
pub struct CatalogEntry {
    pub label: String,
    pub tt: TensorTrain,
    pub source: Sampler,
    /// Degree of the leaf space, used to size the oracle sampling.
    pub degree: usize,
}

/// Relative singular values in `(GAP_LOW, GAP_HIGH]` make the numerical rank
/// depend on the threshold; catalog instances must have none.
pub const GAP_LOW: f64 = 1e-12;
pub const GAP_HIGH: f64 = 1e-7;

/// Whether every unfolding of `tt` has a clear gap around the rank
/// thresholds, so `ranks` and the sampling oracle decide the same rank.
pub fn well_separated(tt: &TensorTrain) -> bool {
    tt.unfolding_spectra(GAP_LOW)
        .iter()
        .flatten()
        .all(|&s| s <= GAP_LOW || s > GAP_HIGH)
}

/// Encoder catalog over `b in {2,3}`, `d <= 6`, `mbar <= 4`. Instances that
/// are not [`well_separated`] are dropped; [`encoder_catalog_all`] keeps them.
pub fn encoder_catalog(seed: u64) -> Result<Vec<CatalogEntry>> {
    Ok(encoder_catalog_all(seed)?.into_iter().filter(|e| well_separated(&e.tt)).collect())
}

/// Every generated catalog instance, including rank-ambiguous ones.
pub fn encoder_catalog_all(seed: u64) -> Result<Vec<CatalogEntry>> {
    let kind = BasisKind::LegendreShifted;
    let mut out = Vec::new();
    let mut s = seed;
    let mut next_seed = || {
        s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
        s
    };
    for b in [2usize, 3] {
        for mbar in 0..=4 {
            for d in 1..=6 {
                let c = random_polynomial(mbar, next_seed());
                let tt = encode_polynomial(&c, Grid::new(b, d)?, kind)?;
                out.push(CatalogEntry {
                    label: format!("polynomial b={b} d={d} mbar={mbar}"),
                    tt,
                    source: Box::new(move |x| mono_eval(&c, x)),
                    degree: mbar,
                });
            }
        }
        for m in 0..=3usize {
            for d in 1..=6u32 {
                if (b as u64).pow(d) > 729 {
                    continue;
                }
                let mut cs = vec![-1i64];
                if m > 0 {
                    cs.extend([0, m as i64 - 1]);
                }
                cs.dedup();
                for c in cs {
                    let s = random_fixed_knot_spline(b, d, m, c, next_seed())?;
                    let tt = encode_fixed_knot_spline(&s, c, kind)?;
                    out.push(CatalogEntry {
                        label: format!("fixed_knot b={b} d={d} m={m} c={c}"),
                        tt,
                        source: Box::new(move |x| s.evaluate(x)),
                        degree: m,
                    });
                }
            }
        }
        for m in [0usize, 2, 4] {
            for d in [2u32, 4, 6] {
                for n in [2usize, 5] {
                    if n as u64 > (b as u64).pow(d) {
                        continue;
                    }
                    let s = random_free_knot_spline(b, d, m, n, next_seed())?;
                    let tt = encode_free_knot_spline_compact(&s, kind)?;
                    out.push(CatalogEntry {
                        label: format!("free_knot b={b} d={d} m={m} N={n}"),
                        tt,
                        source: Box::new(move |x| s.evaluate(x)),
                        degree: m,
                    });
                }
            }
        }
        for d in [2usize, 4] {
            let grid = Grid::new(b, d)?;
            let tt = tensor_interpolate(|x: f64| x.exp(), grid, &Interpolator::new(2, kind))?;
            let t2 = tt.clone();
            out.push(CatalogEntry {
                label: format!("interpolant exp b={b} d={d} m=2"),
                tt,
                source: Box::new(move |x| t2.evaluate(x).expect("x in [0,1)")),
                degree: 2,
            });
        }
    }
    for (name, mother) in [("haar", haar_mother(kind)), ("hat", hat_mother(kind))] {
        for level in 0..=3usize {
            for shift in [0u64, (1u64 << level) - 1] {
                let depth = level + mother.depth() + 1;
                let spec = WaveletSpec::new(mother.clone(), level, shift);
                let tt = encode_dilated(&spec, depth)?;
                let mth = mother.clone();
                let factor = 2f64.powf(level as f64 / spec.p);
                let scale = (1u64 << level) as f64;
                out.push(CatalogEntry {
                    label: format!("{name} l={level} j={shift} d={depth}"),
                    tt,
                    source: Box::new(move |x| {
                        let t = scale * x - shift as f64;
                        if (0.0..1.0).contains(&t) {
                            factor * mth.evaluate(t).expect("t in [0,1)")
                        } else {
                            0.0
                        }
                    }),
                    degree: mother.basis().degree,
                });
            }
        }
    }
    {
        let mut r = rng(next_seed());
        let terms: Vec<(f64, WaveletSpec)> = (0..4)
            .map(|k| {
                let level = 1 + k % 3;
                let shift = r.random_range(0..(1u64 << level));
                (r.random_range(-1.0..1.0), WaveletSpec::new(hat_mother(kind), level, shift))
            })
            .collect();
        let tt = n_term_wavelet(&terms, 5)?;
        let t2 = tt.clone();
        out.push(CatalogEntry {
            label: "n_term hat d=5".into(),
            tt,
            source: Box::new(move |x| t2.evaluate(x).expect("x in [0,1)")),
            degree: 1,
        });
    }
    for d in 1..=6 {
        for m in [1usize, 3] {
            let tt = encode_sawtooth(Grid::new(2, d)?, m, kind)?;
            out.push(CatalogEntry {
                label: format!("sawtooth d={d} m={m}"),
                tt,
                source: Box::new(move |x| sawtooth_value(d, x)),
                degree: m,
            });
        }
    }
    Ok(out)
}
