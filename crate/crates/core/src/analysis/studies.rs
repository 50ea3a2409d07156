//! Convergence-study drivers and their CSV/JSON output.

use std::time::Instant;

use serde::Serialize;

use super::targets::Target;
use super::{fit_line, fit_upper_half, greedy_badic_knots, lp_error, lp_error_on_partition, LineFit};
use crate::complexity::{complexity, AUDIT_ROUND_TOL};
use crate::encoders::{encode_free_knot_spline_compact, encode_polynomial_in_basis, encode_sawtooth, sawtooth_value};
use crate::error::{Error, Result};
use crate::interpolation::{chebyshev_truncate, reinterpolate, tensor_interpolate_with, Interpolator};
use crate::poly::BasisKind;
use crate::tensor_train::TensorTrain;
use crate::tensorization::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Sobolev,
    Analytic,
    Adaptive,
    Sawtooth,
}

impl StudyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sobolev" => Ok(StudyKind::Sobolev),
            "analytic" => Ok(StudyKind::Analytic),
            "adaptive" => Ok(StudyKind::Adaptive),
            "sawtooth" => Ok(StudyKind::Sawtooth),
            other => Err(Error::InvalidArgument(format!("unknown study '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Sobolev => "sobolev",
            StudyKind::Analytic => "analytic",
            StudyKind::Adaptive => "adaptive",
            StudyKind::Sawtooth => "sawtooth",
        }
    }
}

/// Largest depth of the cost_N track of the analytic study; the sup error is
/// measured by enumerating all `b^d` leaves.
pub const ANALYTIC_N_TRACK_MAX_LEAVES: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub target: String,
    pub base: usize,
    /// Leaf degree `m` of the final train.
    pub degree: usize,
    /// Degree `mbar` of the intermediate approximation (Sobolev, adaptive).
    pub mbar: usize,
    /// Sobolev smoothness `r` used by the depth schedule.
    pub smoothness: u32,
    /// Norm exponent; `f64::INFINITY` for the sup norm.
    #[serde(serialize_with = "ser_p")]
    pub p: f64,
    /// Depths (Sobolev, sawtooth), budgets `n` (analytic) or piece counts `N` (adaptive).
    pub schedule: Vec<u64>,
    pub max_depth: u32,
    pub quad_order: usize,
    pub seed: u64,
}

fn ser_p<S: serde::Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_p(*p))
}

pub fn format_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

impl StudyConfig {
    /// Defaults that reach the asymptotic rate regimes at desk scale.
    pub fn default_for(kind: StudyKind) -> Self {
        let base = StudyConfig {
            kind,
            target: String::new(),
            base: 2,
            degree: 1,
            mbar: 3,
            smoothness: 4,
            p: 2.0,
            schedule: Vec::new(),
            max_depth: 30,
            quad_order: 8,
            seed: 0,
        };
        match kind {
            StudyKind::Sobolev => StudyConfig {
                target: "sin2pi".into(),
                schedule: (2..=11).collect(),
                ..base
            },
            StudyKind::Analytic => StudyConfig {
                target: "inv_xplus2".into(),
                p: f64::INFINITY,
                schedule: analytic_schedule(3000),
                ..base
            },
            StudyKind::Adaptive => StudyConfig {
                target: "x_pow:0.6".into(),
                mbar: 1,
                quad_order: 12,
                schedule: vec![8, 16, 32, 64, 128, 256],
                ..base
            },
            StudyKind::Sawtooth => StudyConfig {
                target: "sawtooth".into(),
                p: f64::INFINITY,
                schedule: (1..=10).collect(),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<Target> {
        let target = Target::parse(&self.target)?;
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("schedule must be nonempty and strictly increasing".into()));
        }
        if self.base < 2 {
            return Err(Error::InvalidArgument(format!("base {}", self.base)));
        }
        if self.p.is_nan() || self.p <= 0.0 {
            return Err(Error::InvalidArgument(format!("p = {}", self.p)));
        }
        if self.kind == StudyKind::Sawtooth && self.base != 2 {
            return Err(Error::InvalidArgument("the sawtooth study requires b = 2".into()));
        }
        if matches!(self.kind, StudyKind::Sobolev | StudyKind::Adaptive) && self.degree > self.mbar {
            return Err(Error::InvalidArgument(format!(
                "degree {} exceeds mbar {}",
                self.degree, self.mbar
            )));
        }
        if self.kind == StudyKind::Sawtooth && self.degree == 0 {
            return Err(Error::InvalidArgument("the sawtooth needs degree >= 1".into()));
        }
        Ok(target)
    }
}

/// Budgets `n` whose cube roots are spaced by 1/4 from 4 up to `nmax^{1/3}`,
/// merged with the squares `k^2`, `k = 2..=16`.
pub fn analytic_schedule(nmax: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (2..=16u64).map(|k| k * k).filter(|&n| n <= nmax).collect();
    let mut t = 4.0f64;
    while t.powi(3) <= nmax as f64 {
        out.push(t.powi(3).round() as u64);
        t += 0.25;
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CostKind {
    N,
    C,
    S,
}

impl CostKind {
    pub fn name(&self) -> &'static str {
        match self {
            CostKind::N => "N",
            CostKind::C => "C",
            CostKind::S => "S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub study: StudyKind,
    pub target: String,
    pub b: usize,
    /// Leaf degree of the train.
    pub m: usize,
    #[serde(serialize_with = "ser_p")]
    pub p: f64,
    /// Measured cost of the train.
    pub n: u64,
    pub cost_kind: CostKind,
    /// Depth of the train.
    pub depth: usize,
    /// Degree of the intermediate approximation.
    pub degree: usize,
    pub error: f64,
    pub seconds: f64,
    pub seed: u64,
    /// Schedule entry that produced the record.
    pub budget: u64,
}

/// A fitted line of log error against a transformed cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyFit {
    pub cost_kind: CostKind,
    /// `log_b(cost)`, `n^(1/3)` or `n^(1/2)`.
    pub abscissa: String,
    /// `log_b(error)` or `ln(error)`.
    pub ordinate: String,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub records: Vec<ErrorRecord>,
    pub fits: Vec<StudyFit>,
}

/// Runs the study named by `cfg.kind`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    match cfg.kind {
        StudyKind::Sobolev => study_sobolev(cfg),
        StudyKind::Analytic => study_analytic(cfg),
        StudyKind::Adaptive => study_adaptive(cfg),
        StudyKind::Sawtooth => study_sawtooth(cfg),
    }
}

struct Rec<'a> {
    cfg: &'a StudyConfig,
    target: String,
    out: Vec<ErrorRecord>,
}

impl Rec<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, kind: CostKind, n: u64, depth: usize, degree: usize, error: f64, seconds: f64, budget: u64) {
        self.out.push(ErrorRecord {
            study: self.cfg.kind,
            target: self.target.clone(),
            b: self.cfg.base,
            m: self.cfg.degree,
            p: self.cfg.p,
            n,
            cost_kind: kind,
            depth,
            degree,
            error,
            seconds,
            seed: self.cfg.seed,
            budget,
        });
    }

    fn push_all(&mut self, tt: &TensorTrain, rounded: &TensorTrain, degree: usize, error: f64, seconds: f64, budget: u64) {
        let exact = complexity(tt, 0.0);
        let small = complexity(rounded, 0.0);
        let d = tt.depth();
        self.push(CostKind::N, small.cost_n, d, degree, error, seconds, budget);
        self.push(CostKind::C, small.cost_c, d, degree, error, seconds, budget);
        self.push(CostKind::S, exact.cost_s, d, degree, error, seconds, budget);
    }
}

fn log_fits(records: &[ErrorRecord], base: usize, kinds: &[CostKind]) -> Vec<StudyFit> {
    let lb = (base as f64).ln();
    kinds
        .iter()
        .filter_map(|&k| {
            let pts: Vec<&ErrorRecord> = records
                .iter()
                .filter(|r| r.cost_kind == k && r.error > 0.0)
                .collect();
            let xs: Vec<f64> = pts.iter().map(|r| (r.n as f64).ln() / lb).collect();
            let ys: Vec<f64> = pts.iter().map(|r| r.error.ln() / lb).collect();
            fit_upper_half(&xs, &ys).map(|fit| StudyFit {
                cost_kind: k,
                abscissa: "log_b(cost)".into(),
                ordinate: "log_b(error)".into(),
                fit,
            })
        })
        .collect()
}

/// Jackson construction for Sobolev targets: `I_{b,d,mbar} f` with
/// `mbar = r - 1`, kept at full structural ranks, re-interpolated to depth
/// `ceil(d r / (m+1))` and degree `m`.
pub fn study_sobolev(cfg: &StudyConfig) -> Result<StudyResult> {
    let target = cfg.validate()?;
    let kind = BasisKind::LegendreShifted;
    let mut rec = Rec {
        cfg,
        target: target.name(),
        out: Vec::new(),
    };
    let fine = Interpolator::new(cfg.mbar, kind);
    let coarse = Interpolator::new(cfg.degree, kind);
    for &d in &cfg.schedule {
        let t0 = Instant::now();
        let d = d as usize;
        let s = tensor_interpolate_with(|x| target.eval(x), Grid::new(cfg.base, d)?, &fine, None)?;
        let dbar = (d as u64 * cfg.smoothness as u64).div_ceil(cfg.degree as u64 + 1) as usize;
        let tt = reinterpolate(&s, dbar.max(d), &coarse)?;
        let error = lp_error(|x| target.eval(x), &tt, cfg.p, cfg.quad_order)?;
        let secs = t0.elapsed().as_secs_f64();
        // costs of the construction itself, not of a rounded copy
        rec.push_all(&tt, &tt, cfg.mbar, error, secs, d as u64);
    }
    let fits = log_fits(&rec.out, cfg.base, &[CostKind::N, CostKind::C, CostKind::S]);
    Ok(StudyResult {
        config: cfg.clone(),
        records: rec.out,
        fits,
    })
}

/// `(d, mbar)` of the cost_C schedule for budget `n`, when `d > 1` and `mbar >= 1`.
pub fn analytic_schedule_c(n: u64, b: usize, m: usize) -> Option<(usize, usize)> {
    let nf = n as f64;
    let d = (nf.cbrt() / b as f64 - (m + 1) as f64 * nf.powf(-2.0 / 3.0)).floor();
    let mbar = (nf.cbrt() - 1.0).floor();
    (d > 1.0 && mbar >= 1.0).then_some((d as usize, mbar as usize))
}

/// `(d, mbar)` of the cost_N schedule for budget `n`, when `d > 1` and `mbar >= 1`.
pub fn analytic_schedule_n(n: u64) -> Option<(usize, usize)> {
    let s = (n as f64).sqrt();
    let d = s.floor();
    let mbar = (s - 1.0).floor();
    (d > 1.0 && mbar >= 1.0).then_some((d as usize, mbar as usize))
}

/// Chebyshev truncation of degree `mbar` interpolated into `V_{b,d,m}`.
pub fn analytic_approximant(target: &Target, b: usize, d: usize, mbar: usize, m: usize) -> Result<TensorTrain> {
    let series = chebyshev_truncate(|x| target.eval(x), mbar)?;
    let root = encode_polynomial_in_basis(&series.basis_coeffs(), series.basis(), Grid::new(b, 0)?)?;
    reinterpolate(&root, d, &Interpolator::new(m.min(mbar), BasisKind::LegendreShifted))
}

/// Both tracks of the analytic rate: for every budget `n` the proof's `(d, mbar)`
/// schedules, sup error of the interpolated Chebyshev truncation, and the
/// cost of the rounded train. Fits are of `ln(error)` against `n^{1/3}` (C)
/// and `n^{1/2}` (N) over the whole run.
pub fn study_analytic(cfg: &StudyConfig) -> Result<StudyResult> {
    let target = cfg.validate()?;
    let mut rec = Rec {
        cfg,
        target: target.name(),
        out: Vec::new(),
    };
    for &n in &cfg.schedule {
        if let Some((d, mbar)) = analytic_schedule_c(n, cfg.base, cfg.degree) {
            let t0 = Instant::now();
            let tt = analytic_approximant(&target, cfg.base, d, mbar, cfg.degree)?;
            let error = lp_error(|x| target.eval(x), &tt, cfg.p, cfg.quad_order)?;
            let cost = complexity(&tt.round(AUDIT_ROUND_TOL), 0.0).cost_c;
            rec.push(CostKind::C, cost, d, mbar, error, t0.elapsed().as_secs_f64(), n);
        }
        if let Some((d, mbar)) = analytic_schedule_n(n) {
            if Grid::new(cfg.base, d)?.leaves() > ANALYTIC_N_TRACK_MAX_LEAVES {
                continue;
            }
            let t0 = Instant::now();
            let tt = analytic_approximant(&target, cfg.base, d, mbar, cfg.degree)?;
            let error = lp_error(|x| target.eval(x), &tt, cfg.p, cfg.quad_order)?;
            let cost = complexity(&tt.round(AUDIT_ROUND_TOL), 0.0).cost_n;
            rec.push(CostKind::N, cost, d, mbar, error, t0.elapsed().as_secs_f64(), n);
        }
    }
    let mut fits = Vec::new();
    for (kind, power, label) in [(CostKind::C, 1.0 / 3.0, "n^(1/3)"), (CostKind::N, 0.5, "n^(1/2)")] {
        let pts: Vec<&ErrorRecord> = rec
            .out
            .iter()
            .filter(|r| r.cost_kind == kind && r.error > 0.0)
            .collect();
        let xs: Vec<f64> = pts.iter().map(|r| (r.budget as f64).powf(power)).collect();
        let ys: Vec<f64> = pts.iter().map(|r| r.error.ln()).collect();
        if let Some(fit) = fit_line(&xs, &ys) {
            fits.push(StudyFit {
                cost_kind: kind,
                abscissa: label.into(),
                ordinate: "ln(error)".into(),
                fit,
            });
        }
    }
    Ok(StudyResult {
        config: cfg.clone(),
        records: rec.out,
        fits,
    })
}

/// Depth of the re-interpolation in the free-knot Jackson construction,
/// `ceil((d (m+1+1/p) + alpha log_b N) / (m+1))`.
pub fn adaptive_depth(d: u32, m: usize, p: f64, alpha: f64, n: u64, b: usize) -> usize {
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let m1 = (m + 1) as f64;
    let v = (d as f64 * (m1 + inv_p) + alpha * (n as f64).ln() / (b as f64).ln()) / m1;
    (v - 1e-12).ceil().max(d as f64) as usize
}

/// Greedy b-adic free-knot approximation, compact encoding, re-interpolation
/// to degree `m` at the depth of [`adaptive_depth`] with `alpha = mbar + 1`.
/// The error of the train is integrated over the knot partition.
pub fn study_adaptive(cfg: &StudyConfig) -> Result<StudyResult> {
    let target = cfg.validate()?;
    let kind = BasisKind::LegendreShifted;
    let mut rec = Rec {
        cfg,
        target: target.name(),
        out: Vec::new(),
    };
    let coarse = Interpolator::new(cfg.degree, kind);
    let alpha = (cfg.mbar + 1) as f64;
    for &n in &cfg.schedule {
        let t0 = Instant::now();
        let out = greedy_badic_knots(
            |x| target.eval(x),
            cfg.base,
            n as usize,
            cfg.mbar,
            cfg.p,
            cfg.max_depth,
            cfg.quad_order,
        )?;
        let s = &out.spline;
        let phi = encode_free_knot_spline_compact(s, kind)?;
        let dbar = adaptive_depth(s.max_level(), cfg.degree, cfg.p, alpha, n, cfg.base);
        let dbar = dbar.min(max_grid_depth(cfg.base));
        let tt = reinterpolate(&phi, dbar, &coarse)?;
        let error = lp_error_on_partition(
            |x| target.eval(x),
            |x| tt.evaluate(x).unwrap_or(f64::NAN),
            &s.breakpoints(),
            cfg.p,
            cfg.quad_order,
        )?;
        let rounded = tt.round(AUDIT_ROUND_TOL);
        rec.push_all(&tt, &rounded, cfg.mbar, error, t0.elapsed().as_secs_f64(), n);
    }
    let fits = log_fits(&rec.out, cfg.base, &[CostKind::N, CostKind::C, CostKind::S]);
    Ok(StudyResult {
        config: cfg.clone(),
        records: rec.out,
        fits,
    })
}

fn max_grid_depth(b: usize) -> usize {
    (53.0 / (b as f64).log2()).floor() as usize
}

/// The sawtooth family for every depth in the schedule: exactness and cost_C.
pub fn study_sawtooth(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let mut rec = Rec {
        cfg,
        target: "sawtooth".into(),
        out: Vec::new(),
    };
    for &d in &cfg.schedule {
        let t0 = Instant::now();
        let d = d as usize;
        let tt = encode_sawtooth(Grid::new(2, d)?, cfg.degree, BasisKind::LegendreShifted)?;
        let error = lp_error(|x| sawtooth_value(d, x), &tt, cfg.p, cfg.quad_order)?;
        let cost = complexity(&tt, 0.0).cost_c;
        rec.push(CostKind::C, cost, d, cfg.degree, error, t0.elapsed().as_secs_f64(), d as u64);
    }
    let fits = log_fits(&rec.out, 2, &[]);
    Ok(StudyResult {
        config: cfg.clone(),
        records: rec.out,
        fits,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    study: &'a str,
    target: &'a str,
    b: usize,
    m: usize,
    p: String,
    n: u64,
    cost_kind: &'a str,
    depth: usize,
    degree: usize,
    error: f64,
    seconds: String,
    seed: u64,
}

/// CSV with columns `study,target,b,m,p,n,cost_kind,depth,degree,error,seconds,seed`.
pub fn to_csv(records: &[ErrorRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(CsvRow {
            study: r.study.name(),
            target: &r.target,
            b: r.b,
            m: r.m,
            p: format_p(r.p),
            n: r.n,
            cost_kind: r.cost_kind.name(),
            depth: r.depth,
            degree: r.degree,
            error: r.error,
            seconds: format!("{:.6}", r.seconds),
            seed: r.seed,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// JSON mirror with the full configuration and the fits.
pub fn to_json(result: &StudyResult) -> String {
    serde_json::to_string_pretty(result).expect("serializable study")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(analytic_schedule_c(3000, 2, 1), Some((7, 13)));
        assert_eq!(analytic_schedule_c(30, 2, 1), None);
        assert_eq!(analytic_schedule_n(50), Some((7, 6)));
        assert_eq!(analytic_schedule_n(3), None);
        let s = analytic_schedule(3000);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*s.last().unwrap(), 2894);
        assert_eq!(adaptive_depth(10, 1, 2.0, 2.0, 256, 2), 21);
    }

    #[test]
    fn analytic_budget_is_respected() {
        let t = Target::parse("inv_xplus2").unwrap();
        for n in [80u64, 300, 1000] {
            let (d, mbar) = analytic_schedule_c(n, 2, 1).unwrap();
            let tt = analytic_approximant(&t, 2, d, mbar, 1).unwrap();
            assert!(complexity(&tt, 0.0).cost_c <= n);
        }
        for n in [9u64, 50, 200] {
            let (d, mbar) = analytic_schedule_n(n).unwrap();
            let tt = analytic_approximant(&t, 2, d, mbar, 1).unwrap();
            assert!(complexity(&tt, 0.0).cost_n <= n);
        }
    }

    #[test]
    fn polynomial_target_is_exact_in_analytic_study() {
        // x^1 with m = 1: the Chebyshev truncation and interpolant are exact
        let t = Target::parse("x_pow:1").unwrap();
        for n in [80u64, 500] {
            let (d, mbar) = analytic_schedule_c(n, 2, 1).unwrap();
            let tt = analytic_approximant(&t, 2, d, mbar, 1).unwrap();
            assert!(lp_error(|x| x, &tt, f64::INFINITY, 4).unwrap() <= 1e-11);
        }
    }

    #[test]
    fn sawtooth_study_rows() {
        let cfg = StudyConfig::default_for(StudyKind::Sawtooth);
        let res = study_sawtooth(&cfg).unwrap();
        assert_eq!(res.records.len(), 10);
        for r in &res.records {
            assert!(r.error <= 1e-12);
            assert!(r.n <= (8 * r.depth + 2 * r.m + 2) as u64);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = StudyConfig::default_for(StudyKind::Sobolev);
        cfg.schedule = vec![3, 2];
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![2, 3];
        cfg.target = "nope".into();
        assert!(matches!(cfg.validate(), Err(Error::UnknownTarget(_))));
    }

    #[test]
    fn csv_header_and_determinism() {
        let mut cfg = StudyConfig::default_for(StudyKind::Sobolev);
        cfg.schedule = vec![2, 3, 4];
        let a = study_sobolev(&cfg).unwrap();
        let b = study_sobolev(&cfg).unwrap();
        let strip = |r: &ErrorRecord| ErrorRecord { seconds: 0.0, ..r.clone() };
        assert_eq!(
            a.records.iter().map(strip).collect::<Vec<_>>(),
            b.records.iter().map(strip).collect::<Vec<_>>()
        );
        let csv = to_csv(&a.records).unwrap();
        assert!(csv.starts_with("study,target,b,m,p,n,cost_kind,depth,degree,error,seconds,seed\n"));
        assert_eq!(csv.lines().count(), 1 + 9);
    }
}
