use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hcma_core::estimates::{comparison_check, estimate_report, validate_hypotheses};
use hcma_core::geom::{commutation_residual, curvature, torsion};
use hcma_core::io::config::PsiSpec;
use hcma_core::io::{load_config_with_overrides, read_field, write_field, ConfigDoc, GridMeta, ReportDoc};
use hcma_core::pointwise::lemma::{calibrate, scan, Calibration, LemmaSampler};
use hcma_core::solver::solve_continuation;
use hcma_core::{AnalyticFn, Error, MetricField, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{Cli, Command, DEFAULT_SEED, EXIT_CONFIG, EXIT_LEMMA, EXIT_SOLVER, EXIT_VERIFY};

pub const DEFAULT_OUT: &str = "hcma-out";

/// Errors at or below this level count as exact in a refinement study.
const EXACT_TOL: f64 = 1e-8;
const MIN_ORDER: f64 = 1.8;
const GEOM_TOL: f64 = 1e-10;

const PILOT_SIZE: usize = 20_000;
const PILOT_ATTEMPTS: usize = 50;
const SCAN_ATTEMPTS: usize = 200;

struct Loaded {
    doc: ConfigDoc,
    echo: Value,
    base_dir: PathBuf,
}

fn load(cli: &Cli) -> Result<Loaded, String> {
    let path = cli.config.as_ref().ok_or("--config is required for this command")?;
    if !path.is_file() {
        return Err(format!("config file {} not found", path.display()));
    }
    let (doc, echo) = load_config_with_overrides(path, &cli.overrides).map_err(|e| format!("{}: {e}", path.display()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { doc, echo, base_dir })
}

struct Phases {
    last: Instant,
}

impl Phases {
    fn new() -> Self {
        Self { last: Instant::now() }
    }

    fn mark(&mut self, report: &mut ReportDoc, name: &str) {
        let now = Instant::now();
        *report.timing.phases.entry(name.to_string()).or_insert(0.0) += (now - self.last).as_secs_f64();
        self.last = now;
    }
}

/// Runs the selected command, recording the outcome in `report`. Returns the
/// output directory.
pub fn run(cli: &Cli, report: &mut ReportDoc) -> PathBuf {
    let fallback = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match &cli.command {
        Command::LemmaCheck { n, epsilon, sup_psi, samples, theta, n_threshold, randomize } => {
            let seed = if *randomize { rand::rng().random() } else { cli.seed.unwrap_or(DEFAULT_SEED) };
            lemma_check(report, *n, *epsilon, *sup_psi, *samples, *theta, *n_threshold, seed);
            return fallback;
        }
        Command::GeomCheck { metric, params, n, points } => {
            geom_check(report, metric, params, *n, *points, cli.seed.unwrap_or(DEFAULT_SEED));
            return fallback;
        }
        _ => {}
    }

    let cfg = match load(cli) {
        Ok(c) => c,
        Err(msg) => {
            report.fail(EXIT_CONFIG, msg);
            return fallback;
        }
    };
    report.config = Some(cfg.echo.clone());
    let out = cli.out.clone().or_else(|| cfg.doc.output_dir.as_ref().map(PathBuf::from)).unwrap_or(fallback);
    if let Err(e) = std::fs::create_dir_all(&out) {
        report.fail(EXIT_CONFIG, format!("cannot create output directory {}: {e}", out.display()));
        return PathBuf::from(DEFAULT_OUT);
    }
    let mut opts = cfg.doc.solver.clone();
    opts.serial |= cli.serial;

    match &cli.command {
        Command::Solve => solve(report, &cfg, &opts, &out),
        Command::Mms => mms(report, &cfg, &opts, &out),
        Command::Verify { solution } => verify(report, &cfg, solution),
        Command::LemmaCheck { .. } | Command::GeomCheck { .. } => unreachable!("handled above"),
    }
    out
}

fn solve(report: &mut ReportDoc, cfg: &Loaded, opts: &SolveOptions, out: &Path) {
    let mut phases = Phases::new();
    let built = match cfg.doc.build_problem(cfg.doc.problem.m, &cfg.base_dir) {
        Ok(b) => b,
        Err(e) => return report.fail(EXIT_CONFIG, e.to_string()),
    };
    let problem = &built.problem;
    report.grid = Some(GridMeta::from(&problem.grid));
    match validate_hypotheses(problem) {
        Ok(v) => {
            if !(v.admissible && v.subsolution && v.cone) {
                println!(
                    "warning: hypotheses not satisfied (admissible {}, subsolution {}, cone {}; cone margin {:.3e})",
                    v.admissible, v.subsolution, v.cone, v.cone_min
                );
            }
            report.detail("hypotheses", &v);
        }
        Err(e) => report.detail("hypotheses_error", e.to_string()),
    }
    phases.mark(report, "build");

    let result = solve_continuation(problem, opts);
    phases.mark(report, "solve");
    match result {
        Ok((state, sr)) => {
            report.set_solve(&sr);
            println!(
                "solve: converged on m={} in {} continuation steps, {} Newton iterations, residual {:.3e}",
                problem.grid.m(),
                sr.steps.len(),
                sr.total_newton_iters,
                sr.final_residual
            );
            if let Some(exact) = &built.exact {
                if let Ok(err) = state.u.max_abs_diff(exact) {
                    println!("max error vs u*: {err:.3e}");
                    report.detail("max_error", err);
                }
            }
            if let Err(e) = write_field(&state.u, "u", &out.join("u.field")) {
                return report.fail(EXIT_CONFIG, e.to_string());
            }
            report.detail("field", "u.field");
            phases.mark(report, "write");
        }
        Err(Error::ContinuationFailed { last_t, attempted_t, state }) => {
            report.detail("last_t", last_t);
            report.detail("attempted_t", attempted_t);
            if write_field(&state.u, "u_partial", &out.join("u_partial.field")).is_ok() {
                report.detail("field", "u_partial.field");
            }
            report.fail(EXIT_SOLVER, format!("continuation failed at t = {last_t} (attempted {attempted_t})"));
        }
        Err(e) => report.fail(EXIT_SOLVER, e.to_string()),
    }
}

struct MmsRow {
    m: usize,
    h: f64,
    max_error: f64,
    order: Option<f64>,
    exact: bool,
}

fn mms_csv(rows: &[MmsRow]) -> String {
    let mut s = String::from("m,h,max_error,observed_order\n");
    for r in rows {
        let order = match (r.exact, r.order) {
            (true, _) => "exact".to_string(),
            (false, Some(o)) => format!("{o:.4}"),
            (false, None) => String::new(),
        };
        let _ = writeln!(s, "{},{:.6e},{:.6e},{}", r.m, r.h, r.max_error, order);
    }
    s
}

fn mms(report: &mut ReportDoc, cfg: &Loaded, opts: &SolveOptions, out: &Path) {
    if !matches!(cfg.doc.problem.psi, PsiSpec::Mms { .. }) {
        return report.fail(EXIT_CONFIG, "mms requires problem.psi.kind = \"mms\"");
    }
    let mut phases = Phases::new();
    let mut rows: Vec<MmsRow> = Vec::new();
    let mut failure = None;
    for m in cfg.doc.refinement_levels() {
        let built = match cfg.doc.build_problem(m, &cfg.base_dir) {
            Ok(b) => b,
            Err(e) => return report.fail(EXIT_CONFIG, format!("m={m}: {e}")),
        };
        let exact = built.exact.expect("mms problems carry the exact solution");
        report.grid = Some(GridMeta::from(&built.problem.grid));
        phases.mark(report, "build");
        let result = solve_continuation(&built.problem, opts);
        phases.mark(report, "solve");
        let (state, sr) = match result {
            Ok(r) => r,
            Err(e) => {
                failure = Some(format!("m={m}: {e}"));
                break;
            }
        };
        report.set_solve(&sr);
        let max_error = state.u.max_abs_diff(&exact).unwrap_or(f64::NAN);
        let h = built.problem.grid.h_max();
        let (order, exact_row) = match rows.last() {
            None => (None, max_error <= EXACT_TOL),
            Some(prev) if prev.max_error <= EXACT_TOL && max_error <= EXACT_TOL => (None, true),
            Some(prev) => (Some((prev.max_error / max_error).ln() / (prev.h / h).ln()), false),
        };
        println!(
            "mms: m={m} h={h:.4e} max_error={max_error:.3e}{}",
            match (exact_row, order) {
                (true, _) => " (exact)".to_string(),
                (false, Some(o)) => format!(" order={o:.3}"),
                _ => String::new(),
            }
        );
        rows.push(MmsRow { m, h, max_error, order, exact: exact_row });
    }

    let csv = mms_csv(&rows);
    if let Err(e) = std::fs::write(out.join("mms.csv"), &csv) {
        return report.fail(EXIT_CONFIG, format!("cannot write mms.csv: {e}"));
    }
    report.detail(
        "study",
        rows.iter()
            .map(|r| json!({"m": r.m, "h": r.h, "max_error": r.max_error, "observed_order": r.order, "exact": r.exact}))
            .collect::<Vec<_>>(),
    );
    report.detail("csv", "mms.csv");
    if let Some(msg) = failure {
        return report.fail(EXIT_SOLVER, msg);
    }
    let Some(last) = rows.last() else {
        return report.fail(EXIT_CONFIG, "empty refinement list");
    };
    if rows.len() > 1 && !last.exact {
        let order = last.order.unwrap_or(f64::NAN);
        report.detail("final_order", order);
        if !(order >= MIN_ORDER) {
            report.fail(EXIT_VERIFY, format!("observed order {order:.3} is below {MIN_ORDER}"));
        }
    }
}

fn verify(report: &mut ReportDoc, cfg: &Loaded, solution: &Path) {
    let mut phases = Phases::new();
    let (u, name) = match read_field(solution) {
        Ok(f) => f,
        Err(e) => return report.fail(EXIT_CONFIG, format!("{}: {e}", solution.display())),
    };
    let built = match cfg.doc.build_problem(cfg.doc.problem.m, &cfg.base_dir) {
        Ok(b) => b,
        Err(e) => return report.fail(EXIT_CONFIG, e.to_string()),
    };
    let problem = &built.problem;
    report.grid = Some(GridMeta::from(&problem.grid));
    if u.spec() != &problem.grid {
        let msg = Error::GridMismatch(format!(
            "solution '{name}' has n={} m={}, configured grid has n={} m={}",
            u.spec().n(),
            u.spec().m(),
            problem.grid.n(),
            problem.grid.m()
        ));
        return report.fail(EXIT_CONFIG, msg.to_string());
    }
    phases.mark(report, "load");

    let cmp = match comparison_check(&u, &problem.usub) {
        Ok(c) => c,
        Err(e) => return report.fail(EXIT_VERIFY, format!("comparison check: {e}")),
    };
    report.detail("comparison", &cmp);
    println!(
        "verify: min(u - usub) = {:.3e} ({}), minimum on boundary: {}",
        cmp.min,
        if cmp.pass { "pass" } else { "FAIL" },
        cmp.min_on_boundary
    );
    let v = &cfg.doc.verify;
    let est = estimate_report(&u, problem, v.theta, v.n_threshold, v.barrier);
    phases.mark(report, "estimates");
    let est = match est {
        Ok(e) => e,
        Err(e @ (Error::InvalidParams(_) | Error::Config(_))) => return report.fail(EXIT_CONFIG, e.to_string()),
        Err(e) => return report.fail(EXIT_VERIFY, format!("estimates: {e}")),
    };
    println!(
        "verify: lemma scan theta={} N={}: {} violations over {} nodes",
        est.lemma21.theta_used, est.lemma21.n_used, est.lemma21.violations, est.lemma21.nodes_checked
    );
    println!("verify: ratio_grad={:.4} ratio_lap={:.4}", est.ratio_grad, est.ratio_lap);
    let violations = est.lemma21.violations;
    report.estimates = Some(est);
    if !cmp.pass {
        report.fail(EXIT_VERIFY, format!("comparison violated: min(u - usub) = {:e}", cmp.min));
    } else if violations > 0 {
        report.fail(EXIT_VERIFY, format!("{violations} lemma violations"));
    }
}

#[allow(clippy::too_many_arguments)]
fn lemma_check(
    report: &mut ReportDoc,
    n: usize,
    epsilon: f64,
    sup_psi: f64,
    samples: usize,
    theta: Option<f64>,
    n_threshold: Option<f64>,
    seed: u64,
) {
    let mut problems = Vec::new();
    if !(2..=4).contains(&n) {
        problems.push(format!("--n must be 2, 3 or 4 (got {n})"));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        problems.push(format!("--epsilon must lie in (0, 1] (got {epsilon})"));
    }
    if !(sup_psi > 0.0 && sup_psi.is_finite()) {
        problems.push(format!("--sup-psi must be positive (got {sup_psi})"));
    }
    if samples == 0 {
        problems.push("--samples must be positive".into());
    }
    if theta.is_some_and(|t| !(t >= 0.0)) || n_threshold.is_some_and(|t| !(t >= 0.0)) {
        problems.push("--theta and --N must be non-negative".into());
    }
    if !problems.is_empty() {
        return report.fail(EXIT_CONFIG, problems.join("; "));
    }

    let mut phases = Phases::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = LemmaSampler::new(n, epsilon, sup_psi);
    report.detail("seed", seed);
    report.detail("params", json!({"n": n, "epsilon": epsilon, "sup_psi": sup_psi, "samples": samples}));

    let calibration: Option<Calibration> = if theta.is_some() && n_threshold.is_some() {
        None
    } else {
        match calibrate(&sampler, PILOT_SIZE, PILOT_ATTEMPTS, &mut rng) {
            Ok(c) => Some(c),
            Err(e) => return report.fail(EXIT_LEMMA, format!("calibration: {e}")),
        }
    };
    phases.mark(report, "calibrate");
    let n_used = n_threshold.or(calibration.as_ref().map(|c| c.n_threshold)).expect("set above");
    let theta_used = theta
        .or_else(|| {
            let c = calibration.as_ref()?;
            c.pilots.iter().find(|p| p.n_threshold == n_used).map(|p| p.theta).or(Some(c.theta))
        })
        .expect("set above");
    if let Some(c) = &calibration {
        println!("lemma-check: calibrated theta*={} N*={}", c.theta, c.n_threshold);
        report.detail("calibration", c);
    }

    let result = match scan(&sampler, theta_used, n_used, samples, samples.saturating_mul(SCAN_ATTEMPTS), &mut rng) {
        Ok(r) => r,
        Err(e) => return report.fail(EXIT_LEMMA, format!("scan: {e}")),
    };
    phases.mark(report, "scan");
    println!(
        "lemma-check: n={n} epsilon={epsilon} sup_psi={sup_psi}: theta={theta_used} N={n_used}, {} samples, {} violations (worst margin {:.3e})",
        result.samples, result.violations, result.worst_margin
    );
    report.detail("theta_used", theta_used);
    report.detail("N_used", n_used);
    report.detail("scan", &result);
    if result.samples < samples {
        println!("warning: only {} of {samples} samples reached W >= {n_used}", result.samples);
    }
    if result.violations > 0 {
        report.fail(EXIT_LEMMA, format!("{} violations at theta={theta_used} N={n_used}", result.violations));
    }
}

fn test_functions(n: usize) -> Vec<(&'static str, AnalyticFn)> {
    [
        ("quadratic", AnalyticFn::Quadratic { scale: 1.0 }),
        ("pluriharmonic-bump", AnalyticFn::PluriharmonicBump { scale: 0.5, amp: 0.3 }),
        ("sin-product", AnalyticFn::SinProduct { scale: 1.0, amp: 0.4 }),
        ("bilinear", AnalyticFn::Bilinear),
        ("cubic", AnalyticFn::Cubic),
    ]
    .into_iter()
    .filter(|(_, f)| f.min_dimension() <= n)
    .collect()
}

fn geom_check(report: &mut ReportDoc, name: &str, params: &[f64], n: usize, points: usize, seed: u64) {
    let metric = match MetricField::builtin(name, params, n) {
        Ok(m) => m,
        Err(e) => return report.fail(EXIT_CONFIG, e.to_string()),
    };
    let mut phases = Phases::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let funcs = test_functions(n);
    let (mut antisym, mut hermitian, mut torsion_max, mut curvature_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut commutation: BTreeMap<&str, f64> = funcs.iter().map(|(k, _)| (*k, 0.0)).collect();
    for _ in 0..points {
        let z: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let step = (|| -> hcma_core::Result<()> {
            let t = torsion(&metric, &z)?;
            antisym = antisym.max(t.antisymmetry_residual());
            torsion_max = torsion_max.max(t.max_abs());
            let r = curvature(&metric, &z)?;
            hermitian = hermitian.max(r.hermitian_residual());
            curvature_max = curvature_max.max(r.max_abs());
            for (k, f) in &funcs {
                let res = commutation_residual(&metric, f, &z)?;
                let e = commutation.get_mut(k).expect("initialised");
                *e = e.max(res);
            }
            Ok(())
        })();
        if let Err(e) = step {
            return report.fail(EXIT_CONFIG, format!("metric evaluation at {z:?}: {e}"));
        }
    }
    phases.mark(report, "check");
    let commutation_max = commutation.values().copied().fold(0.0, f64::max);
    println!("geom-check: {} params {:?} n={n}, {points} points", metric.name(), metric.params());
    println!("  torsion antisymmetry residual  {antisym:.3e}   (max |T| = {torsion_max:.3e})");
    println!("  curvature Hermitian residual   {hermitian:.3e}   (max |R| = {curvature_max:.3e})");
    for (k, v) in &commutation {
        println!("  commutation residual {k:<20} {v:.3e}");
    }
    report.detail(
        "geometry",
        json!({
            "metric": metric.name(),
            "params": metric.params(),
            "n": n,
            "points": points,
            "seed": seed,
            "torsion_antisymmetry": antisym,
            "curvature_hermitian": hermitian,
            "torsion_max_abs": torsion_max,
            "curvature_max_abs": curvature_max,
            "commutation": commutation,
            "commutation_max": commutation_max,
        }),
    );
    let worst = antisym.max(hermitian).max(commutation_max);
    if !(worst <= GEOM_TOL) {
        report.fail(EXIT_VERIFY, format!("identity residual {worst:.3e} exceeds {GEOM_TOL:e}"));
    }
}
