//! Complexity measures of a tensor train and audits of the encoding bounds.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::analysis::catalog::{random_fixed_knot_spline, random_free_knot_spline, random_polynomial};
use crate::encoders::{
    encode_fixed_knot_spline, encode_free_knot_spline, encode_free_knot_spline_compact,
    encode_polynomial_in_basis, encode_sawtooth,
};
use crate::error::{Error, Result};
use crate::interpolation::{reinterpolate, Interpolator};
use crate::poly::{BasisKind, PolyBasis};
use crate::tensor_train::{RankProfile, TensorTrain};
use crate::tensorization::Grid;

/// Tolerance of the rounding applied before measuring rank-based costs.
pub const AUDIT_ROUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub cost_n: u64,
    pub cost_c: u64,
    pub cost_s: u64,
    pub ranks: RankProfile,
}

/// Number of neurons, parameters and nonzero parameters of the stored cores.
pub fn complexity(tt: &TensorTrain, zero_tol: f64) -> ComplexityReport {
    let ranks = tt.stored_ranks();
    let b = tt.base() as u64;
    let m1 = tt.basis().dim() as u64;
    let cost_n: u64 = ranks.iter().map(|&r| r as u64).sum();
    let cost_c = if ranks.is_empty() {
        m1
    } else {
        let mut c = b * ranks[0] as u64;
        for w in ranks.windows(2) {
            c += b * (w[0] * w[1]) as u64;
        }
        c + ranks[ranks.len() - 1] as u64 * m1
    };
    let nonzero = |v: &f64| v.abs() > zero_tol;
    let mut cost_s: u64 = tt
        .cores()
        .iter()
        .flat_map(|c| c.slices().iter())
        .map(|s| s.iter().filter(|v| nonzero(v)).count() as u64)
        .sum();
    cost_s += tt.leaf().iter().filter(|v| nonzero(v)).count() as u64;
    ComplexityReport {
        cost_n,
        cost_c,
        cost_s,
        ranks: RankProfile::new(ranks, 0.0),
    }
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub instance: String,
    pub params: Map<String, Value>,
    pub quantity: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Named constructions with audited complexity bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuditInstance {
    PolynomialInterpolant { b: usize, d: usize, mbar: usize, m: usize },
    FixedKnot { b: usize, d: usize, m: usize, c: i64 },
    FixedKnotInterpolant { b: usize, d: usize, mbar: usize, c: i64, m: usize, dbar: usize },
    FreeKnot { b: usize, d: usize, m: usize, n: usize },
    FreeKnotInterpolant { b: usize, d: usize, mbar: usize, n: usize, m: usize, dbar: usize },
    Sawtooth { d: usize, m: usize },
}

pub const INSTANCE_NAMES: [&str; 6] = [
    "polynomial_interpolant",
    "fixed_knot",
    "fixed_knot_interpolant",
    "free_knot",
    "free_knot_interpolant",
    "sawtooth",
];

/// Overrides for [`AuditInstance::from_name`]; unset fields take defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct InstanceParams {
    pub b: Option<usize>,
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub mbar: Option<usize>,
    pub c: Option<i64>,
    pub n: Option<usize>,
    pub dbar: Option<usize>,
}

impl AuditInstance {
    pub fn name(&self) -> &'static str {
        match self {
            AuditInstance::PolynomialInterpolant { .. } => "polynomial_interpolant",
            AuditInstance::FixedKnot { .. } => "fixed_knot",
            AuditInstance::FixedKnotInterpolant { .. } => "fixed_knot_interpolant",
            AuditInstance::FreeKnot { .. } => "free_knot",
            AuditInstance::FreeKnotInterpolant { .. } => "free_knot_interpolant",
            AuditInstance::Sawtooth { .. } => "sawtooth",
        }
    }

    pub fn from_name(name: &str, p: InstanceParams) -> Result<Self> {
        let b = p.b.unwrap_or(2);
        let d = p.d.unwrap_or(4);
        let m = p.m.unwrap_or(0);
        let mbar = p.mbar.unwrap_or(m.max(1));
        Ok(match name {
            "polynomial_interpolant" => AuditInstance::PolynomialInterpolant { b, d, mbar, m },
            "fixed_knot" => AuditInstance::FixedKnot {
                b,
                d,
                m,
                c: p.c.unwrap_or(-1),
            },
            "fixed_knot_interpolant" => AuditInstance::FixedKnotInterpolant {
                b,
                d,
                mbar,
                c: p.c.unwrap_or(-1),
                m,
                dbar: p.dbar.unwrap_or(d + 2),
            },
            "free_knot" => AuditInstance::FreeKnot {
                b,
                d,
                m,
                n: p.n.unwrap_or(4),
            },
            "free_knot_interpolant" => AuditInstance::FreeKnotInterpolant {
                b,
                d,
                mbar,
                n: p.n.unwrap_or(4),
                m,
                dbar: p.dbar.unwrap_or(d + 2),
            },
            "sawtooth" => AuditInstance::Sawtooth { d, m: m.max(1) },
            other => return Err(Error::UnknownInstance(other.into())),
        })
    }

    fn params(&self) -> Map<String, Value> {
        let v = match *self {
            AuditInstance::PolynomialInterpolant { b, d, mbar, m } => {
                json!({"b": b, "d": d, "mbar": mbar, "m": m})
            }
            AuditInstance::FixedKnot { b, d, m, c } => json!({"b": b, "d": d, "m": m, "c": c}),
            AuditInstance::FixedKnotInterpolant { b, d, mbar, c, m, dbar } => {
                json!({"b": b, "d": d, "mbar": mbar, "c": c, "m": m, "dbar": dbar})
            }
            AuditInstance::FreeKnot { b, d, m, n } => json!({"b": b, "d": d, "m": m, "N": n}),
            AuditInstance::FreeKnotInterpolant { b, d, mbar, n, m, dbar } => {
                json!({"b": b, "d": d, "mbar": mbar, "N": n, "m": m, "dbar": dbar})
            }
            AuditInstance::Sawtooth { d, m } => json!({"b": 2, "d": d, "m": m}),
        };
        match v {
            Value::Object(map) => map,
            _ => unreachable!("params are objects"),
        }
    }
}

struct Recorder<'a> {
    instance: &'a AuditInstance,
    out: Vec<AuditRecord>,
}

impl Recorder<'_> {
    fn check(&mut self, quantity: impl Into<String>, measured: f64, bound: f64) {
        self.out.push(AuditRecord {
            instance: self.instance.name().into(),
            params: self.instance.params(),
            quantity: quantity.into(),
            measured,
            bound,
            pass: measured <= bound * (1.0 + 1e-12),
        });
    }

    fn ranks(&mut self, measured: &[usize], bound: impl Fn(usize) -> usize) {
        for (k, &r) in measured.iter().enumerate() {
            let nu = k + 1;
            self.check(format!("r_{nu}"), r as f64, bound(nu) as f64);
        }
    }
}

fn pow(b: usize, e: usize) -> usize {
    b.saturating_pow(e as u32)
}

fn fixed_rank(b: usize, d: usize, m: usize, c: i64, nu: usize) -> usize {
    let dim = if c >= m as i64 {
        m + 1
    } else {
        (m as i64 - c) as usize * pow(b, d - nu) + (c + 1) as usize
    };
    dim.min(pow(b, nu))
}

/// Measures one instance against the bounds stated for it. Random inputs
/// are drawn from `seed`.
pub fn audit_bounds(instance: &AuditInstance, seed: u64) -> Result<Vec<AuditRecord>> {
    let kind = BasisKind::LegendreShifted;
    let mut rec = Recorder {
        instance,
        out: Vec::new(),
    };
    match *instance {
        AuditInstance::PolynomialInterpolant { b, d, mbar, m } => {
            check_degrees(mbar, m)?;
            let coeffs = random_polynomial(mbar, seed);
            let basis = PolyBasis::new(kind, mbar);
            let phi = encode_polynomial_in_basis(&basis.coeffs_from_monomial(&coeffs)?, basis, Grid::new(b, 0)?)?;
            let s = reinterpolate(&phi, d, &Interpolator::new(m, kind))?;
            let r = complexity(&s.round(AUDIT_ROUND_TOL), 0.0);
            let (bf, n1, m1) = (b as f64, (mbar + 1) as f64, (m + 1) as f64);
            rec.check("cost_N", r.cost_n as f64, n1 * d as f64);
            rec.check("cost_C", r.cost_c as f64, bf * n1 * n1 * d as f64 + bf * m1);
            rec.check("cost_S", r.cost_s as f64, bf * n1 * n1 * d as f64 + bf * m1);
            rec.ranks(&s.ranks(crate::tensor_train::DEFAULT_RANK_TOL).ranks, |nu| {
                (mbar + 1).min(pow(b, nu))
            });
        }
        AuditInstance::FixedKnot { b, d, m, c } => {
            check_continuity(m, c)?;
            let s = random_fixed_knot_spline(b, d as u32, m, c, seed)?;
            let tt = encode_fixed_knot_spline(&s, c, kind)?;
            let r = complexity(&tt.round(AUDIT_ROUND_TOL), 0.0);
            let (bf, nf) = (b as f64, pow(b, d) as f64);
            rec.check("cost_N", r.cost_n as f64, 2.0 * bf / (bf - 1.0) * nf.sqrt());
            let cc = (2.0 * bf * bf / (bf * bf - 1.0)).max((m + 1) as f64) * nf;
            rec.check("cost_C", r.cost_c as f64, cc);
            rec.check("cost_S", r.cost_s as f64, cc);
            rec.ranks(&tt.ranks(crate::tensor_train::DEFAULT_RANK_TOL).ranks, |nu| {
                fixed_rank(b, d, m, c, nu)
            });
        }
        AuditInstance::FixedKnotInterpolant { b, d, mbar, c, m, dbar } => {
            check_degrees(mbar, m)?;
            check_continuity(mbar, c)?;
            check_depths(d, dbar)?;
            let s = random_fixed_knot_spline(b, d as u32, mbar, c, seed)?;
            let phi = encode_fixed_knot_spline(&s, c, kind)?;
            let tt = reinterpolate(&phi, dbar, &Interpolator::new(m, kind))?;
            let r = complexity(&tt.round(AUDIT_ROUND_TOL), 0.0);
            let (bf, nf, n1) = (b as f64, pow(b, d) as f64, (mbar + 1) as f64);
            let extra = (dbar - d) as f64;
            rec.check(
                "cost_N",
                r.cost_n as f64,
                2.0 * bf / (bf - 1.0) * nf.sqrt() + extra * n1,
            );
            let cc = (2.0 * bf * bf / (bf * bf - 1.0)).max((m + 1) as f64) * nf + extra * bf * n1 * n1;
            rec.check("cost_C", r.cost_c as f64, cc);
            rec.check("cost_S", r.cost_s as f64, cc);
            rec.ranks(&tt.ranks(crate::tensor_train::DEFAULT_RANK_TOL).ranks, |nu| {
                if nu <= d {
                    fixed_rank(b, d, mbar, c, nu)
                } else {
                    ((m + 1) * pow(b, dbar - nu)).min(mbar + 1)
                }
            });
        }
        AuditInstance::FreeKnot { b, d, m, n } => {
            let s = random_free_knot_spline(b, d as u32, m, n, seed)?;
            let sparse = encode_free_knot_spline(&s, kind)?;
            let compact = encode_free_knot_spline_compact(&s, kind)?;
            let r = complexity(&compact.round(AUDIT_ROUND_TOL), 0.0);
            let (bf, df, nf, m1) = (b as f64, d as f64, n as f64, (m + 1) as f64);
            rec.check("cost_N", r.cost_n as f64, m1 * df * nf);
            rec.check("cost_C", r.cost_c as f64, 2.0 * bf * df * df * m1 * m1 * nf * nf);
            let sparse_cost = complexity(&sparse, 0.0).cost_s;
            rec.check("cost_S", sparse_cost as f64, 4.0 * bf.powi(3) * m1.powi(3) * df * df * nf);
            rec.check(
                "max n_k",
                crate::encoders::subpartition_counts(&s)?.into_iter().max().unwrap_or(0) as f64,
                2.0 * df * (bf - 1.0),
            );
            rec.ranks(&compact.ranks(crate::tensor_train::DEFAULT_RANK_TOL).ranks, |nu| {
                pow(b, nu).min((m + 1) * pow(b, d - nu)).min(m + n)
            });
        }
        AuditInstance::FreeKnotInterpolant { b, d, mbar, n, m, dbar } => {
            check_degrees(mbar, m)?;
            check_depths(d, dbar)?;
            let s = random_free_knot_spline(b, d as u32, mbar, n, seed)?;
            let it = Interpolator::new(m, kind);
            let compact = reinterpolate(&encode_free_knot_spline_compact(&s, kind)?, dbar, &it)?;
            let sparse = reinterpolate(&encode_free_knot_spline(&s, kind)?, dbar, &it)?;
            let r = complexity(&compact.round(AUDIT_ROUND_TOL), 0.0);
            let (bf, df, nf, n1) = (b as f64, d as f64, n as f64, (mbar + 1) as f64);
            let extra = (dbar - d) as f64;
            rec.check("cost_N", r.cost_n as f64, n1 * df * nf + extra * (mbar + n) as f64);
            rec.check(
                "cost_C",
                r.cost_c as f64,
                2.0 * bf * df * n1 * n1 * df * nf * nf + extra * bf * n1 * n1,
            );
            let phi_s = 4.0 * bf.powi(3) * n1.powi(3) * df * df * nf;
            rec.check(
                "cost_S",
                complexity(&sparse, 0.0).cost_s as f64,
                bf.max((m + 1) as f64) * (phi_s + bf * n1.powi(4) * extra),
            );
            rec.ranks(&compact.ranks(crate::tensor_train::DEFAULT_RANK_TOL).ranks, |nu| {
                if nu <= d {
                    pow(b, nu).min((mbar + 1) * pow(b, d - nu)).min(mbar + n)
                } else {
                    ((m + 1) * pow(b, dbar - nu)).min(mbar + 1)
                }
            });
        }
        AuditInstance::Sawtooth { d, m } => {
            let tt = encode_sawtooth(Grid::new(2, d)?, m, kind)?;
            let r = complexity(&tt, 0.0);
            rec.check("cost_C", r.cost_c as f64, (8 * d + 2 * m + 2) as f64);
        }
    }
    Ok(rec.out)
}

fn check_degrees(mbar: usize, m: usize) -> Result<()> {
    if m > mbar {
        return Err(Error::InvalidArgument(format!("m = {m} exceeds mbar = {mbar}")));
    }
    Ok(())
}

fn check_continuity(m: usize, c: i64) -> Result<()> {
    if c < -1 || c > m as i64 {
        return Err(Error::InvalidArgument(format!("continuity {c} outside [-1, {m}]")));
    }
    Ok(())
}

fn check_depths(d: usize, dbar: usize) -> Result<()> {
    if dbar < d {
        return Err(Error::InvalidArgument(format!("dbar = {dbar} below d = {d}")));
    }
    Ok(())
}

/// The default parameter sweep: `b in {2,3}`, `d <= 8`, `m <= 3`, `N <= 64`.
pub fn default_sweep() -> Vec<AuditInstance> {
    let mut out = Vec::new();
    for b in [2usize, 3] {
        for d in [1usize, 3, 5, 8] {
            for mbar in 1..=3 {
                for m in 0..=mbar {
                    out.push(AuditInstance::PolynomialInterpolant { b, d, mbar, m });
                }
            }
        }
        let fixed_depths: &[usize] = if b == 2 { &[1, 2, 3, 4, 5, 6] } else { &[1, 2, 3] };
        for &d in fixed_depths {
            for m in 0..=3 {
                for c in -1..=m as i64 {
                    out.push(AuditInstance::FixedKnot { b, d, m, c });
                }
            }
        }
        for &d in &fixed_depths[1..] {
            for mbar in [1usize, 3] {
                for m in 0..=1 {
                    for c in [-1, mbar as i64 - 1] {
                        for dbar in [d, d + 2] {
                            out.push(AuditInstance::FixedKnotInterpolant { b, d, mbar, c, m, dbar });
                        }
                    }
                }
            }
        }
        let free_depths: &[usize] = if b == 2 { &[3, 5, 8] } else { &[2, 3, 5] };
        for &d in free_depths {
            for m in [0usize, 1, 3] {
                for n in [2usize, 8, 32, 64] {
                    if n <= pow(b, d) {
                        out.push(AuditInstance::FreeKnot { b, d, m, n });
                    }
                }
            }
        }
        for &d in &free_depths[..2] {
            for mbar in [1usize, 3] {
                for m in [0usize, 1] {
                    for n in [2usize, 4] {
                        for dbar in [d, d + 3] {
                            out.push(AuditInstance::FreeKnotInterpolant { b, d, mbar, n, m, dbar });
                        }
                    }
                }
            }
        }
    }
    for d in 1..=10 {
        for m in 1..=3 {
            out.push(AuditInstance::Sawtooth { d, m });
        }
    }
    out
}

/// Runs every instance of the default sweep with per-instance seeds.
pub fn run_default_sweep(seed: u64) -> Result<Vec<AuditRecord>> {
    let mut out = Vec::new();
    for (k, inst) in default_sweep().iter().enumerate() {
        out.extend(audit_bounds(inst, seed.wrapping_add(k as u64))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::encode_sawtooth;
    use crate::tensor_train::TTCore;
    use nalgebra::DMatrix;

    #[test]
    fn all_ones_train() {
        let grid = Grid::new(2, 3).unwrap();
        let cores = (0..3)
            .map(|_| TTCore::new(vec![DMatrix::from_element(1, 1, 1.0); 2]).unwrap())
            .collect();
        let tt = TensorTrain::new(grid, PolyBasis::legendre(0), cores, DMatrix::from_element(1, 1, 1.0))
            .unwrap();
        let r = complexity(&tt, 0.0);
        assert_eq!((r.cost_n, r.cost_c, r.cost_s), (3, 7, 7));
    }

    #[test]
    fn sawtooth_cost() {
        for d in 1..=10 {
            let tt = encode_sawtooth(Grid::new(2, d).unwrap(), 1, BasisKind::LegendreShifted).unwrap();
            let r = complexity(&tt, 0.0);
            assert!(r.cost_c <= (8 * d + 4) as u64);
            assert!(r.cost_s <= r.cost_c && r.cost_n <= r.cost_c);
        }
    }

    #[test]
    fn subadditive_neurons() {
        let a = encode_sawtooth(Grid::new(2, 4).unwrap(), 1, BasisKind::LegendreShifted).unwrap();
        let b = a.scale(2.0);
        let s = a.add(&b).unwrap();
        assert!(complexity(&s, 0.0).cost_n <= complexity(&a, 0.0).cost_n + complexity(&b, 0.0).cost_n);
    }

    #[test]
    fn unknown_instance() {
        assert!(matches!(
            AuditInstance::from_name("nope", InstanceParams::default()),
            Err(Error::UnknownInstance(_))
        ));
    }

    #[test]
    fn polynomial_interpolant_passes() {
        let inst = AuditInstance::PolynomialInterpolant { b: 2, d: 6, mbar: 3, m: 1 };
        let recs = audit_bounds(&inst, 1).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
    }

    #[test]
    fn piecewise_constant_fixed_knot_passes() {
        for (b, d) in [(2, 6), (3, 5)] {
            let inst = AuditInstance::FixedKnot { b, d, m: 0, c: -1 };
            let recs = audit_bounds(&inst, 2).unwrap();
            assert!(recs.iter().all(|r| r.pass), "{recs:?}");
        }
    }
}
