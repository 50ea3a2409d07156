//! `qtt`: encode functions as quantized tensor trains, inspect them, audit
//! the complexity bounds and run the convergence studies.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtt_core::analysis::studies::{run_study, to_csv, to_json, StudyConfig, StudyKind};
use qtt_core::analysis::studies::analytic_schedule;
use qtt_core::complexity::{
    audit_bounds, complexity, run_default_sweep, AuditInstance, AuditRecord, InstanceParams,
};
use qtt_core::encoders::{encode_dilated, encode_free_knot_spline_compact, encode_polynomial, encode_sawtooth};
use qtt_core::encoders::{haar_mother, hat_mother, WaveletSpec};
use qtt_core::interpolation::{reinterpolate, Interpolator};
use qtt_core::tensor_train::DEFAULT_RANK_TOL;
use qtt_core::{BasisKind, Error, Grid, PiecewisePolynomial, PolyBasis, TensorTrain};

/// Depth used by builtins when `--depth` is absent.
const DEFAULT_BUILTIN_DEPTH: usize = 4;

/// Rounding applied to encoded splines before they are written.
const ENCODE_ROUND_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "qtt", version, about = "Quantized tensor-train function approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a spline JSON file or a builtin (haar, hat, sawtooth, poly:c0,c1,...) as a train.
    Encode(EncodeArgs),
    /// Evaluate a train at points of [0,1).
    Eval {
        file: PathBuf,
        #[arg(required = true, allow_negative_numbers = true)]
        points: Vec<f64>,
    },
    /// Numerical ranks of a train.
    Ranks {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
    /// cost_N, cost_C and cost_S of a train as JSON.
    Complexity {
        file: PathBuf,
        /// Entries with magnitude at most this count as zero for cost_S.
        #[arg(long, default_value_t = 0.0)]
        zero_tol: f64,
    },
    /// Check the encoding complexity bounds; exits 0 iff every check passes.
    Audit(AuditArgs),
    /// Run a convergence study (sobolev, analytic, adaptive, sawtooth).
    Study(StudyArgs),
}

#[derive(Args)]
struct EncodeArgs {
    spec: String,
    #[arg(long)]
    base: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Leaf degree; splines of higher degree are re-interpolated.
    #[arg(long)]
    degree: Option<usize>,
    /// Leaf basis: legendre, chebyshev or monomial.
    #[arg(long, default_value = "legendre")]
    basis: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Parameter sweep to run when no instance is given.
    #[arg(long, default_value = "default")]
    sweep: String,
    /// Audit a single named instance instead of the sweep.
    #[arg(long)]
    instance: Option<String>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    mbar: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<i64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dbar: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    kind: String,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    base: Option<usize>,
    /// Leaf degree of the final train.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    mbar: Option<usize>,
    /// Sobolev smoothness used by the depth schedule.
    #[arg(long)]
    r: Option<u32>,
    /// Norm exponent, or `inf`.
    #[arg(long)]
    p: Option<String>,
    /// Smallest depth (sobolev, sawtooth).
    #[arg(long)]
    dmin: Option<u64>,
    /// Largest depth (sobolev, sawtooth).
    #[arg(long)]
    dmax: Option<u64>,
    /// Largest budget n (analytic) or piece count N (adaptive).
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write records as CSV here and the JSON mirror next to it.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Path of the JSON mirror; defaults to the CSV path with a .json extension.
    #[arg(long)]
    json: Option<PathBuf>,
}

/// A failure with its exit code and a one-line message.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonBadicKnot(_) => 3,
            Error::UnknownTarget(_) | Error::UnknownInstance(_) => 4,
            Error::Format(_)
            | Error::InvalidSpline(_)
            | Error::InvalidArgument(_)
            | Error::InvalidGrid(_)
            | Error::OutOfDomain(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("error: {}", one_line(first.trim_start_matches("error:").trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", one_line(&f.message));
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Encode(args) => cmd_encode(args),
        Command::Eval { file, points } => {
            let tt = load(&file)?;
            for x in points {
                println!("{x}\t{}", tt.evaluate(x)?);
            }
            Ok(0)
        }
        Command::Ranks { file, tol } => {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(usage(format!("tolerance {tol} outside (0,1)")));
            }
            let tt = load(&file)?;
            println!("ranks {}", fmt_ranks(&tt.ranks(tol).ranks));
            println!("stored {}", fmt_ranks(&tt.stored_ranks()));
            Ok(0)
        }
        Command::Complexity { file, zero_tol } => {
            let tt = load(&file)?;
            let r = complexity(&tt, zero_tol);
            println!("{}", serde_json::to_string_pretty(&r).expect("serializable report"));
            Ok(0)
        }
        Command::Audit(args) => cmd_audit(args),
        Command::Study(args) => cmd_study(args),
    }
}

fn load(path: &Path) -> Result<TensorTrain, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(TensorTrain::from_json(&text)?)
}

fn fmt_ranks(r: &[usize]) -> String {
    let parts: Vec<String> = r.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

fn parse_basis(name: &str) -> Result<BasisKind, Failure> {
    match name {
        "legendre" => Ok(BasisKind::LegendreShifted),
        "chebyshev" => Ok(BasisKind::ChebyshevShifted),
        "monomial" => Ok(BasisKind::Monomial),
        other => Ok(BasisKind::parse(other)?),
    }
}

fn cmd_encode(args: EncodeArgs) -> Result<u8, Failure> {
    let kind = parse_basis(&args.basis)?;
    let builtin_depth = args.depth.unwrap_or(DEFAULT_BUILTIN_DEPTH);
    let base = args.base.unwrap_or(2);
    let only_base_two = |name: &str| -> Result<(), Failure> {
        if base != 2 {
            return Err(usage(format!("builtin {name} requires --base 2")));
        }
        Ok(())
    };
    let tt = match args.spec.as_str() {
        "haar" | "hat" => {
            only_base_two(&args.spec)?;
            let mother = if args.spec == "haar" { haar_mother(kind) } else { hat_mother(kind) };
            let mut tt = encode_dilated(&WaveletSpec::new(mother, 0, 0), builtin_depth.max(1))?;
            if let Some(m) = args.degree {
                tt = with_degree(tt, m, kind)?;
            }
            tt
        }
        "sawtooth" => {
            only_base_two("sawtooth")?;
            encode_sawtooth(Grid::new(2, builtin_depth)?, args.degree.unwrap_or(1), kind)?
        }
        spec if spec.starts_with("poly:") => {
            let coeffs = parse_coeffs(&spec["poly:".len()..])?;
            let tt = encode_polynomial(&coeffs, Grid::new(base, builtin_depth)?, kind)?;
            match args.degree {
                Some(m) => with_degree(tt, m, kind)?,
                None => tt,
            }
        }
        path => encode_spline_file(Path::new(path), &args, kind)?,
    };
    let ranks = tt.ranks(DEFAULT_RANK_TOL).ranks;
    let r = complexity(&tt, 0.0);
    println!("ranks {}", fmt_ranks(&ranks));
    println!("cost_N {} cost_C {} cost_S {}", r.cost_n, r.cost_c, r.cost_s);
    if let Some(out) = &args.out {
        fs::write(out, tt.to_json()).map_err(|e| io_error(out, e))?;
        println!("wrote {}", out.display());
    }
    Ok(0)
}

/// Changes the leaf degree: exact for raising, local interpolation for lowering.
fn with_degree(tt: TensorTrain, m: usize, kind: BasisKind) -> Result<TensorTrain, Failure> {
    if m >= tt.basis().degree {
        Ok(tt.change_basis(PolyBasis::new(kind, m))?)
    } else {
        let depth = tt.depth();
        Ok(reinterpolate(&tt, depth, &Interpolator::new(m, kind))?)
    }
}

fn parse_coeffs(text: &str) -> Result<Vec<f64>, Failure> {
    let coeffs: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match coeffs {
        Ok(c) if !c.is_empty() && c.iter().all(|v| v.is_finite()) => Ok(c),
        _ => Err(usage(format!("cannot parse polynomial coefficients `{text}`"))),
    }
}

fn encode_spline_file(path: &Path, args: &EncodeArgs, kind: BasisKind) -> Result<TensorTrain, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            usage(format!("`{}` is neither a builtin nor a readable file", path.display()))
        } else {
            io_error(path, e)
        }
    })?;
    let s = PiecewisePolynomial::from_json(&text)?;
    if let Some(b) = args.base {
        if b != s.base() {
            return Err(usage(format!("--base {b} differs from the spline base {}", s.base())));
        }
    }
    let level = s.max_level() as usize;
    let depth = args.depth.unwrap_or(level);
    if depth < level {
        return Err(usage(format!("--depth {depth} is below the deepest knot level {level}")));
    }
    let tt = encode_free_knot_spline_compact(&s, kind)?.round(ENCODE_ROUND_TOL);
    let m = args.degree.unwrap_or(s.degree());
    if m < s.degree() {
        return Ok(reinterpolate(&tt, depth, &Interpolator::new(m, kind))?);
    }
    let tt = tt.extend(depth - level)?;
    with_degree(tt, m, kind)
}

fn cmd_audit(args: AuditArgs) -> Result<u8, Failure> {
    let records: Vec<AuditRecord> = match &args.instance {
        Some(name) => {
            let params = InstanceParams {
                b: args.b,
                d: args.d,
                m: args.m,
                mbar: args.mbar,
                c: args.c,
                n: args.n,
                dbar: args.dbar,
            };
            let inst = AuditInstance::from_name(name, params)?;
            audit_bounds(&inst, args.seed)?
        }
        None => {
            if args.sweep != "default" {
                return Err(usage(format!("unknown sweep `{}`", args.sweep)));
            }
            run_default_sweep(args.seed)?
        }
    };
    let failed = records.iter().filter(|r| !r.pass).count();
    let report = serde_json::json!({
        "records": records,
        "checks": records.len(),
        "failed": failed,
        "pass": failed == 0,
    });
    let text = serde_json::to_string_pretty(&report).expect("serializable report");
    match &args.out {
        Some(out) => {
            fs::write(out, text).map_err(|e| io_error(out, e))?;
            println!("{} checks, {failed} failed; report in {}", records.len(), out.display());
        }
        None => println!("{text}"),
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

fn parse_p(text: &str) -> Result<f64, Failure> {
    if text == "inf" {
        return Ok(f64::INFINITY);
    }
    text.parse::<f64>()
        .ok()
        .filter(|p| *p > 0.0)
        .ok_or_else(|| usage(format!("invalid p `{text}`")))
}

fn study_config(args: &StudyArgs) -> Result<StudyConfig, Failure> {
    let kind = StudyKind::parse(&args.kind)?;
    let mut cfg = StudyConfig::default_for(kind);
    if let Some(t) = &args.target {
        cfg.target = t.clone();
    }
    if let Some(b) = args.base {
        cfg.base = b;
    }
    if let Some(m) = args.m {
        cfg.degree = m;
    }
    if let Some(mbar) = args.mbar {
        cfg.mbar = mbar;
    }
    if let Some(r) = args.r {
        cfg.smoothness = r;
    }
    if let Some(p) = &args.p {
        cfg.p = parse_p(p)?;
    }
    if let Some(q) = args.quad_order {
        cfg.quad_order = q;
    }
    if let Some(md) = args.max_depth {
        cfg.max_depth = md;
    }
    cfg.seed = args.seed;
    match kind {
        StudyKind::Sobolev | StudyKind::Sawtooth => {
            if args.nmax.is_some() {
                return Err(usage(format!("--nmax does not apply to the {} study", kind.name())));
            }
            let lo = args.dmin.unwrap_or(cfg.schedule[0]);
            let hi = args.dmax.unwrap_or(*cfg.schedule.last().expect("nonempty default"));
            cfg.schedule = (lo..=hi).collect();
        }
        StudyKind::Analytic | StudyKind::Adaptive => {
            if args.dmin.is_some() || args.dmax.is_some() {
                return Err(usage(format!("--dmin/--dmax do not apply to the {} study", kind.name())));
            }
            if let Some(nmax) = args.nmax {
                cfg.schedule = if kind == StudyKind::Analytic {
                    analytic_schedule(nmax)
                } else {
                    std::iter::successors(Some(8u64), |n| Some(n * 2)).take_while(|&n| n <= nmax).collect()
                };
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_study(args: StudyArgs) -> Result<u8, Failure> {
    let cfg = study_config(&args)?;
    let result = run_study(&cfg)?;
    let csv = to_csv(&result.records)?;
    match &args.csv {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| io_error(path, e))?;
            let json_path = args.json.clone().unwrap_or_else(|| path.with_extension("json"));
            fs::write(&json_path, to_json(&result)).map_err(|e| io_error(&json_path, e))?;
            println!(
                "{} records to {} and {}",
                result.records.len(),
                path.display(),
                json_path.display()
            );
        }
        None => {
            print!("{csv}");
            if let Some(json_path) = &args.json {
                fs::write(json_path, to_json(&result)).map_err(|e| io_error(json_path, e))?;
            }
        }
    }
    for f in &result.fits {
        println!(
            "fit cost_{}: {} vs {} slope {:.4} intercept {:.4} r2 {:.4} points {}",
            f.cost_kind.name(),
            f.ordinate,
            f.abscissa,
            f.fit.slope,
            f.fit.intercept,
            f.fit.r2,
            f.fit.points
        );
    }
    if cfg.kind == StudyKind::Sawtooth {
        let worst = result.records.iter().map(|r| r.error).fold(0.0, f64::max);
        println!("max error {worst:e}");
    }
    Ok(0)
}
