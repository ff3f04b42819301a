use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(n: usize, m: usize) -> GridSpec {
    GridSpec::cube(n, 0.0, 1.0, m).unwrap()
}

fn quadratic_problem(m: usize, psi: f64) -> ProblemSpec {
    let g = unit(2, m);
    let q = ScalarField::sample(g.clone(), &AnalyticFn::Quadratic { scale: 1.0 }).unwrap();
    ProblemSpec::new(MetricField::euclidean(2), ChiForm::Zero, ScalarField::constant(g, psi), q.clone(), q).unwrap()
}

#[test]
fn initial_psi_examples() {
    let p = quadratic_problem(7, 1.0);
    let psi0 = initial_psi(&p).unwrap();
    for k in p.grid.interior_indices() {
        assert!((psi0.get(k) - 1.0).abs() < 1e-13);
    }

    let g = unit(2, 7);
    let aniso = ScalarField::from_fn(g.clone(), |z| 2.0 * (z[0] * z[0] + z[1] * z[1]) + z[2] * z[2] + z[3] * z[3]).unwrap();
    let p = ProblemSpec::new(MetricField::euclidean(2), ChiForm::Zero, ScalarField::constant(g, 1.0), aniso.clone(), aniso)
        .unwrap();
    let psi0 = initial_psi(&p).unwrap();
    let solver = Solver::new(&p, SolveOptions::default()).unwrap();
    let r = solver.discretization().residual(p.usub.values(), solver.psi0()).unwrap();
    assert!(max_abs(&r) <= 1e-14);
    for k in p.grid.interior_indices() {
        assert!((psi0.get(k) - 4.0 / 3.0).abs() < 1e-13);
    }
}

#[test]
fn problem_validation() {
    let g = unit(2, 5);
    let q = ScalarField::sample(g.clone(), &AnalyticFn::Quadratic { scale: 1.0 }).unwrap();
    let e = MetricField::euclidean(2);
    let zero_psi = ScalarField::constant(g.clone(), 0.0);
    assert!(ProblemSpec::new(e.clone(), ChiForm::Zero, zero_psi, q.clone(), q.clone()).is_err());
    let shifted = ScalarField::from_fn(g.clone(), |z| z.iter().map(|x| x * x).sum::<f64>() + 1.0).unwrap();
    let one = ScalarField::constant(g.clone(), 1.0);
    assert!(ProblemSpec::new(e.clone(), ChiForm::Zero, one.clone(), shifted, q.clone()).is_err());
    let neg = ScalarField::from_fn(g.clone(), |z| -z.iter().map(|x| x * x).sum::<f64>()).unwrap();
    let err = ProblemSpec::new(e, ChiForm::Zero, one, neg.clone(), neg).unwrap_err();
    assert!(matches!(err, Error::InadmissibleNode { what: "subsolution", .. }));
}

#[test]
fn mms_quadratic_has_unit_psi_and_rejects_inadmissible() {
    let mms = mms_generate(&MetricField::euclidean(2), &ChiForm::Zero, &AnalyticFn::Quadratic { scale: 1.0 }, &unit(2, 5)).unwrap();
    assert!(mms.problem.psi.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    let err = mms_generate(&MetricField::euclidean(2), &ChiForm::Zero, &AnalyticFn::Quadratic { scale: -1.0 }, &unit(2, 5))
        .unwrap_err();
    assert!(matches!(err, Error::InadmissibleNode { what: "manufactured solution", node: 0, .. }));
}

#[test]
fn identity_coefficients_give_half_laplacian() {
    let p = quadratic_problem(5, 1.0);
    let disc = Discretization::new(&p.grid, &p.metric, &p.chi).unwrap();
    let jac = disc.jacobian(p.usub.values()).unwrap();
    let h2 = p.grid.spacing(0).powi(2);
    let c = disc.unknowns() / 2;
    // 1/2 tr of the stencil: -1/h^2 at the center, 1/(8 h^2) at axis neighbors
    assert!((jac.get(c, c) + 1.0 / h2).abs() < 1e-9);
    assert!((jac.get(c, c + 1) - 0.125 / h2).abs() < 1e-9);
    let row: f64 = (jac.row_ptr[c]..jac.row_ptr[c + 1]).map(|k| jac.val[k]).sum();
    assert!(row.abs() < 1e-9);
}

fn random_state(disc: &Discretization, base: &ScalarField, rng: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
    let mut u = base.values().to_vec();
    for &p in disc.interior() {
        u[p] += amp * rng.random_range(-1.0..1.0);
    }
    u
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = GridSpec::cube(2, -0.3, 0.5, 5).unwrap();
    for (metric, chi) in [
        (MetricField::euclidean(2), ChiForm::Zero),
        (MetricField::builtin("conformal-exp", &[1.0], 2).unwrap(), ChiForm::Omega),
        (MetricField::builtin("diag-anisotropic", &[2.0, 0.3, -0.4], 2).unwrap(), ChiForm::Identity),
    ] {
        let disc = Discretization::new(&g, &metric, &chi).unwrap();
        let base = ScalarField::sample(g.clone(), &AnalyticFn::Quadratic { scale: 1.0 }).unwrap();
        let psi = vec![0.9; disc.unknowns()];
        for _ in 0..20 {
            let u = random_state(&disc, &base, &mut rng, 0.002);
            let jac = disc.jacobian(&u).unwrap();
            let v: Vec<f64> = (0..disc.unknowns()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut jv = vec![0.0; v.len()];
            jac.matvec(&v, &mut jv);
            let eps = 1e-6;
            let shift = |s: f64| {
                let mut w = u.clone();
                for (&p, vi) in disc.interior().iter().zip(&v) {
                    w[p] += s * vi;
                }
                disc.residual(&w, &psi).unwrap()
            };
            let (rp, rm) = (shift(eps), shift(-eps));
            let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            let err = jv.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-6 * max_abs(&jv), "{err} vs {}", max_abs(&jv));
        }
    }
}

#[test]
fn solved_state_gives_zero_direction() {
    let p = quadratic_problem(5, 1.0);
    let solver = Solver::new(&p, SolveOptions::default()).unwrap();
    let s0 = solver.initial_state().unwrap();
    let (d, pred, _) = solver.newton_step(&s0, &solver.psi_at(1.0)).unwrap();
    assert!(pred < 1e-14);
    assert!(max_abs(d.values()) < 1e-12);
    let zero = ScalarField::constant(p.grid.clone(), 0.0);
    let (next, s) = solver.line_search(&s0, &zero, &solver.psi_at(1.0)).unwrap();
    assert_eq!(s, 1.0);
    assert_eq!(next.u, s0.u);
}

#[test]
fn line_search_backtracks_on_large_direction() {
    let p = quadratic_problem(7, 0.8);
    let solver = Solver::new(&p, SolveOptions::default()).unwrap();
    let s0 = solver.initial_state().unwrap();
    let psi = solver.psi_at(1.0);
    let (d, _, _) = solver.newton_step(&s0, &psi).unwrap();
    let big = ScalarField::constant(p.grid.clone(), 0.0).axpy(1000.0, &d).unwrap();
    let big = crate::grid::apply_dirichlet(&big, |_| 0.0).unwrap();
    assert!(solver.discretization().residual(s0.u.axpy(1.0, &big).unwrap().values(), &psi).is_err());
    let (next, s) = solver.line_search(&s0, &big, &psi).unwrap();
    assert!(s < 1.0);
    let r0 = max_abs(&solver.discretization().residual(s0.u.values(), &psi).unwrap());
    assert!(next.admissible && next.residual_norm < r0);
    solver.discretization().admissible_pencils(next.u.values(), "iterate").unwrap();
}

#[test]
fn exact_seed_needs_no_newton() {
    let p = quadratic_problem(7, 1.0);
    let (state, report) = solve_continuation(&p, &SolveOptions::default()).unwrap();
    assert_eq!(report.total_newton_iters, 0);
    assert_eq!(state.u, p.usub);
    assert_eq!(state.t, 1.0);
}

#[test]
fn strict_subsolution_solve_and_comparison() {
    let p = quadratic_problem(7, 0.8);
    let (state, report) = solve_continuation(&p, &SolveOptions::default()).unwrap();
    assert!(state.residual_norm <= 1e-10 && state.t == 1.0 && state.admissible);
    let solver = Solver::new(&p, SolveOptions::default()).unwrap();
    let r = solver.discretization().residual(state.u.values(), &solver.psi_at(1.0)).unwrap();
    assert!(max_abs(&r) <= 1e-10);
    for b in p.grid.boundary_indices() {
        assert_eq!(state.u.get(b), p.phi.get(b));
    }
    let diff: Vec<f64> = state.u.values().iter().zip(p.usub.values()).map(|(a, b)| a - b).collect();
    let min = diff.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-8);
    for k in p.grid.interior_indices() {
        assert!(diff[k] > min);
    }
    // quadratic convergence in the last steps
    let last = report.steps.last().unwrap();
    let h = &last.residual_history;
    if h.len() >= 3 {
        let n = h.len();
        assert!(h[n - 1] <= 0.1 * h[n - 2] || h[n - 1] < 1e-13);
    }
}

#[test]
fn serial_and_parallel_agree_bitwise() {
    let p = quadratic_problem(7, 0.7);
    let serial = SolveOptions { serial: true, ..SolveOptions::default() };
    let (a, _) = solve_continuation(&p, &serial).unwrap();
    let (b, _) = solve_continuation(&p, &serial).unwrap();
    let (c, _) = solve_continuation(&p, &SolveOptions::default()).unwrap();
    assert_eq!(a.u.values(), b.u.values());
    assert!(a.u.max_abs_diff(&c.u).unwrap() <= 1e-12);
}

#[test]
fn continuation_failure_carries_last_state() {
    let p = quadratic_problem(7, 0.05);
    let opts = SolveOptions { max_newton: 1, max_continuation_steps: 8, ..SolveOptions::default() };
    match solve_continuation(&p, &opts) {
        Err(Error::ContinuationFailed { last_t, attempted_t, state }) => {
            assert!(last_t < 1.0 && attempted_t > last_t);
            assert_eq!(state.t, last_t);
            assert!(state.admissible);
        }
        other => panic!("expected continuation failure, got {other:?}"),
    }
}

#[test]
fn options_validation() {
    assert!(SolveOptions::default().validate().is_ok());
    let bad = SolveOptions { damping: 1.5, max_newton: 0, ..SolveOptions::default() };
    match bad.validate() {
        Err(Error::Config(v)) => assert_eq!(v.len(), 2),
        other => panic!("{other:?}"),
    }
    let json = serde_json::to_string(&SolveOptions::default()).unwrap();
    let back: SolveOptions = serde_json::from_str(&json).unwrap();
    assert_eq!(back, SolveOptions::default());
    assert!(serde_json::from_str::<SolveOptions>(r#"{"bogus": 1}"#).is_err());
}
