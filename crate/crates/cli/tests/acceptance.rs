//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRng, TestRunner};
use qtt_core::analysis::catalog::{encoder_catalog, random_fixed_knot_spline, random_polynomial};
use qtt_core::analysis::studies::{run_study, StudyConfig, StudyKind};
use qtt_core::analysis::targets::Target;
use qtt_core::analysis::{
    fit_line, greedy_badic_knots, rank_span_oracle, reinterpolation_errors, spline_lp_error,
    uniform_badic_spline,
};
use qtt_core::complexity::{complexity, run_default_sweep};
use qtt_core::encoders::{
    encode_dilated, encode_fixed_knot_spline, encode_polynomial, encode_sawtooth, haar_mother,
    hat_mother, WaveletSpec,
};
use qtt_core::tensor_train::DEFAULT_RANK_TOL;
use qtt_core::{BasisKind, Grid};

const KIND: BasisKind = BasisKind::LegendreShifted;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn isometry() -> Outcome {
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 50,
            ..Config::default()
        },
        TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let strategy = (1u32..=6, 0usize..=3, proptest::num::u64::ANY)
        .prop_flat_map(|(d, m, seed)| (proptest::strategy::Just((d, m, seed)), -1i64..=m as i64));
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..50 {
        let ((d, m, seed), c) = strategy.new_tree(&mut runner).expect("strategy").current();
        let s = random_fixed_knot_spline(2, d, m, c, seed).expect("spline");
        let tt = encode_fixed_knot_spline(&s, c, KIND).expect("encoding");
        for p in [1.0, 2.0, f64::INFINITY] {
            let direct = s.lp_norm(p);
            let leaves = tt.lp_norm(p).expect("leaf norm");
            worst = worst.max(rel(direct, leaves));
        }
        cases += 1;
    }
    outcome(worst <= 1e-10, format!("{cases} splines, max relative gap {worst:.2e}"))
}

fn rank_oracle() -> Outcome {
    let cat = encoder_catalog(1).expect("catalog");
    let mut mismatches = Vec::new();
    for e in &cat {
        let ranks = e.tt.ranks(DEFAULT_RANK_TOL).ranks;
        let oracle: Vec<usize> = (1..=e.tt.depth())
            .map(|nu| rank_span_oracle(&e.source, e.tt.grid(), nu, 2 * (e.degree + 1), 1e-8).expect("oracle"))
            .collect();
        if ranks != oracle {
            mismatches.push(format!("{}: {ranks:?} vs {oracle:?}", e.label));
        }
    }
    let n = cat.len();
    let mut detail = format!("{n} instances, {} mismatches", mismatches.len());
    if let Some(first) = mismatches.first() {
        detail += &format!("; first {first}");
    }
    outcome(n >= 60 && mismatches.is_empty(), detail)
}

fn rank_values() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    for (name, mother, cap) in [("haar", haar_mother(KIND), 1), ("hat", hat_mother(KIND), 2)] {
        for level in 0..=4usize {
            for shift in 0..(1u64 << level) {
                let tt = encode_dilated(&WaveletSpec::new(mother.clone(), level, shift), level + 3).expect("dilation");
                let r = tt.ranks(DEFAULT_RANK_TOL).ranks;
                let ok = if name == "haar" { r.iter().all(|&v| v == 1) } else { r.iter().all(|&v| v <= cap) };
                if !ok {
                    failures.push(format!("{name} l={level} j={shift} {r:?}"));
                }
            }
        }
    }
    for d in 1..=10 {
        let r = encode_sawtooth(Grid::new(2, d).unwrap(), 1, KIND).unwrap().ranks(DEFAULT_RANK_TOL).ranks;
        if r != vec![2; d] {
            failures.push(format!("sawtooth d={d} {r:?}"));
        }
    }
    let mut seed = 11;
    for b in [2usize, 3] {
        for mbar in 0..=4usize {
            for d in 1..=6usize {
                seed += 1;
                let c = random_polynomial(mbar, seed);
                let r = encode_polynomial(&c, Grid::new(b, d).unwrap(), KIND)
                    .unwrap()
                    .ranks(DEFAULT_RANK_TOL)
                    .ranks;
                let bound: Vec<usize> = (1..=d).map(|nu| (mbar + 1).min(b.pow(nu as u32))).collect();
                if r != bound {
                    failures.push(format!("polynomial b={b} mbar={mbar} d={d} {r:?} vs {bound:?}"));
                }
            }
        }
    }
    let mut detail = format!("{} failing checks", failures.len());
    if !failures.is_empty() {
        let saw = failures.iter().filter(|f| f.starts_with("sawtooth")).count();
        let poly = failures.iter().filter(|f| f.starts_with("polynomial")).count();
        detail += &format!(" (sawtooth {saw}, polynomial {poly}); first {}", failures[0]);
    }
    outcome(failures.is_empty(), detail)
}

fn sawtooth_numbers() -> Outcome {
    let mut bad = Vec::new();
    for d in 1..=10usize {
        for m in 1..=3usize {
            let tt = encode_sawtooth(Grid::new(2, d).unwrap(), m, KIND).unwrap();
            let cost = complexity(&tt, 0.0).cost_c;
            if cost > (8 * d + 2 * m + 2) as u64 {
                bad.push(format!("cost_C d={d} m={m}: {cost}"));
            }
            for p in [1.0, 2.0, 3.0] {
                let v = tt.lp_norm(p).unwrap().powf(p);
                if (v - 1.0 / (p + 1.0)).abs() > 1e-10 {
                    bad.push(format!("norm d={d} m={m} p={p}: {v}"));
                }
            }
        }
    }
    let detail = match bad.first() {
        None => "30 cost and 90 norm checks".to_string(),
        Some(f) => format!("{} failures; first {f}", bad.len()),
    };
    outcome(bad.is_empty(), detail)
}

fn audit() -> Outcome {
    let recs = run_default_sweep(0).expect("sweep");
    let failed: Vec<_> = recs.iter().filter(|r| !r.pass).collect();
    let mut detail = format!("{} checks, {} violations", recs.len(), failed.len());
    if let Some(f) = failed.first() {
        let kinds: std::collections::BTreeSet<String> =
            failed.iter().map(|r| format!("{}/{}", r.instance, r.quantity)).collect();
        detail += &format!(
            " in {:?}; first {} {:?} {} = {} > {:.3}",
            kinds,
            f.instance,
            f.params,
            f.quantity,
            f.measured,
            f.bound
        );
    }
    outcome(failed.is_empty(), detail)
}

fn fit_for(result: &qtt_core::analysis::studies::StudyResult, kind: &str) -> qtt_core::analysis::LineFit {
    result
        .fits
        .iter()
        .find(|f| f.cost_kind.name() == kind)
        .map(|f| f.fit)
        .unwrap_or_else(|| panic!("no cost_{kind} fit"))
}

fn sobolev() -> Outcome {
    let r = run_study(&StudyConfig::default_for(StudyKind::Sobolev)).expect("study");
    let (c, n) = (fit_for(&r, "C"), fit_for(&r, "N"));
    let pass = (-4.4..=-3.6).contains(&c.slope) && (-9.6..=-6.4).contains(&n.slope);
    outcome(pass, format!("cost_C slope {:.3}, cost_N slope {:.3}", c.slope, n.slope))
}

fn analytic() -> Outcome {
    let r = run_study(&StudyConfig::default_for(StudyKind::Analytic)).expect("study");
    let (c, n) = (fit_for(&r, "C"), fit_for(&r, "N"));
    let pass = c.r2 >= 0.95 && n.r2 >= 0.95 && c.slope < 0.0 && n.slope < 0.0;
    outcome(
        pass,
        format!(
            "C track R2 {:.4} slope {:.3}; N track R2 {:.4} slope {:.3}",
            c.r2, c.slope, n.r2, n.slope
        ),
    )
}

fn adaptive() -> Outcome {
    let f = |x: f64| x.powf(0.6);
    let (p, q) = (2.0, 12);
    let budgets = [8u64, 16, 32, 64, 128, 256];
    let mut xs = Vec::new();
    let (mut ad, mut un) = (Vec::new(), Vec::new());
    for (k, &n) in budgets.iter().enumerate() {
        let g = greedy_badic_knots(f, 2, n as usize, 1, p, 30, q).expect("greedy");
        let u = uniform_badic_spline(f, 2, 3 + k as u32, 1).expect("uniform");
        xs.push((n as f64).ln());
        ad.push(spline_lp_error(f, &g.spline, p, q).expect("error").ln());
        un.push(spline_lp_error(f, &u, p, q).expect("error").ln());
    }
    let (sa, su) = (fit_line(&xs, &ad).unwrap().slope, fit_line(&xs, &un).unwrap().slope);
    let (ea, eu) = (ad[5].exp(), un[5].exp());
    let pass = ea <= eu / 5.0 && sa <= -1.5 && su >= -1.3;
    outcome(
        pass,
        format!("N=256 adaptive {ea:.3e} uniform {eu:.3e}; slopes adaptive {sa:.3} uniform {su:.3}"),
    )
}

fn reinterpolation() -> Outcome {
    let target = Target::parse("exp").unwrap();
    let pairs: Vec<(usize, usize)> = (2..=4).flat_map(|d| (d..=d + 4).map(move |e| (d, e))).collect();
    let pts = reinterpolation_errors(&target, 2, 3, 1, &pairs, 2.0, 8).expect("errors");
    let anchor = pts
        .iter()
        .find(|q| (q.depth, q.target_depth) == (2, 4))
        .expect("anchor pair");
    let c = anchor.error / anchor.shape;
    let ratios: Vec<f64> = pts.iter().map(|q| q.error / (c * q.shape)).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    outcome(
        lo >= 1.0 / 3.0 && hi <= 3.0,
        format!("C' = {c:.3e}; measured/bound in [{lo:.3}, {hi:.3}] over {} pairs", pts.len()),
    )
}

fn scratch_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qtt-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

/// CSV text with the `seconds` column removed.
fn without_timing(text: &str) -> String {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = header.iter().position(|h| *h == "seconds").expect("seconds column");
    std::iter::once(text.lines().next().unwrap_or("").to_string())
        .chain(lines.map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != col)
                .map(|(_, v)| v)
                .collect::<Vec<_>>()
                .join(",")
        }))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = scratch_dir();
    let mut differing = Vec::new();
    for kind in ["sobolev", "analytic", "adaptive", "sawtooth"] {
        let mut texts = Vec::new();
        for run in 0..2 {
            let csv = dir.join(format!("{kind}-{run}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_qtt"))
                .args(["study", kind, "--seed", "42", "--csv"])
                .arg(&csv)
                .output()
                .expect("run qtt");
            assert!(status.status.success(), "{kind}: {}", String::from_utf8_lossy(&status.stderr));
            texts.push(without_timing(&std::fs::read_to_string(&csv).expect("csv")));
        }
        if texts[0] != texts[1] || texts[0].lines().count() < 2 {
            differing.push(kind);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "4 studies identical across two runs".to_string()
        } else {
            format!("differing: {differing:?}")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("isometry of tensorization", isometry, 10),
        ("rank oracle equivalence", rank_oracle, 60),
        ("rank values", rank_values, 60),
        ("sawtooth cost and norms", sawtooth_numbers, 60),
        ("complexity bound audit", audit, 120),
        ("sobolev rate", sobolev, 120),
        ("analytic rate", analytic, 180),
        ("adaptive beats uniform", adaptive, 120),
        ("re-interpolation bound shape", reinterpolation, 60),
        ("study determinism", determinism, 300),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let secs = t0.elapsed();
        let (pass, detail) = match result {
            Ok(o) => {
                let in_time = secs <= Duration::from_secs(*limit);
                let mut detail = o.detail;
                if !in_time {
                    detail += &format!("; exceeded {limit} s");
                }
                (o.pass && in_time, detail)
            }
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {detail} ({:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            secs.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
