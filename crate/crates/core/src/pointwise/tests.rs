use super::random::{random_hermitian, random_pd, rotate_diagonal};
use super::wedge::{cone_margin_by_wedge, subsolution_margin_by_wedge};
use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn diag(d: &[f64]) -> HermitianMat {
    HermitianMat::from_real_diagonal(d)
}

fn point(g: HermitianMat, chi: HermitianMat, hess: HermitianMat, psi: f64) -> PointData {
    PointData::new(g, chi, hess, psi).unwrap()
}

#[test]
fn assemble_examples() {
    let i = HermitianMat::identity(2);
    let z = HermitianMat::zeros(2);
    assert_eq!(assemble_gtilde(&i, &z).unwrap(), i);
    assert_eq!(assemble_gtilde(&z, &diag(&[1.0, 1.0])).unwrap(), diag(&[1.0, 1.0]));
    let gt = assemble_gtilde(&i, &diag(&[-2.0, 0.0])).unwrap();
    assert_eq!(gt, diag(&[-1.0, 1.0]));
    assert!(assemble_gtilde(&i, &HermitianMat::zeros(3)).is_err());
}

#[test]
fn admissibility_examples() {
    let i = HermitianMat::identity(2);
    let z = HermitianMat::zeros(2);
    assert!((admissibility_margin(&point(i.clone(), z.clone(), i.clone(), 1.0)) - 1.0).abs() < 1e-15);
    let p = point(i.clone(), z.clone(), diag(&[-1.0, 1.0]), 1.0);
    assert!((admissibility_margin(&p) + 1.0).abs() < 1e-15);
    assert!(matches!(residual_point(&p), Err(Error::NotAdmissible { .. })));
    let p = point(i.scale(2.0), z, i, 1.0);
    assert!((admissibility_margin(&p) - 0.5).abs() < 1e-15);
}

#[test]
fn residual_examples() {
    let i2 = HermitianMat::identity(2);
    let z2 = HermitianMat::zeros(2);
    let r = residual_point(&point(i2.clone(), i2.clone(), z2.clone(), 1.0)).unwrap();
    assert!(r.abs() < 1e-15);
    let r = residual_point(&point(i2.clone(), z2.clone(), diag(&[2.0, 1.0]), 1.0)).unwrap();
    assert!((r - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    assert!((r - 0.287_682_072_451_780_9).abs() < 1e-15);
    let i3 = HermitianMat::identity(3);
    let r = residual_point(&point(i3.clone(), i3, HermitianMat::zeros(3), 1.0)).unwrap();
    assert!(r.abs() < 1e-15);
}

#[test]
fn linearization_examples() {
    let i2 = HermitianMat::identity(2);
    let z2 = HermitianMat::zeros(2);
    let f = linearization_coeffs(&point(i2.clone(), z2.clone(), i2.clone(), 1.0)).unwrap();
    assert!(f.max_abs_diff(&i2.scale(0.5)) < 1e-15);

    let l2 = 100.0 / 199.0;
    let w = 100.0 + l2;
    let f = linearization_coeffs(&point(i2, z2, diag(&[100.0, l2]), 1.0)).unwrap();
    let expected = diag(&[1.0 / 100.0 - 1.0 / w, 1.0 / l2 - 1.0 / w]);
    assert!(f.max_abs_diff(&expected) < 1e-14);
}

#[test]
fn equation_psi_examples() {
    let i2 = HermitianMat::identity(2);
    let z2 = HermitianMat::zeros(2);
    assert!((equation_psi(&i2, &z2, &i2).unwrap() - 1.0).abs() < 1e-15);
    let h = diag(&[2.0, 1.0]);
    let psi = equation_psi(&i2, &z2, &h).unwrap();
    assert!((psi - 4.0 / 3.0).abs() < 1e-15);
    let r = residual_point(&point(i2, z2, h, psi)).unwrap();
    assert!(r.abs() < 1e-14);
}

#[test]
fn subsolution_and_cone_examples() {
    let i2 = HermitianMat::identity(2);
    let z2 = HermitianMat::zeros(2);
    let p = |l: f64, psi: f64| point(i2.clone(), z2.clone(), diag(&[l, l]), psi);
    assert!(subsolution_margin(&p(1.0, 1.0)).abs() < 1e-15);
    assert!((subsolution_margin(&p(2.0, 1.0)) - 2.0).abs() < 1e-15);
    assert!((subsolution_margin(&p(1.0, 3.0)) + 2.0).abs() < 1e-15);
    assert!((cone_margin(&p(1.0, 1.0)) - 1.0).abs() < 1e-15);
    assert!((cone_margin(&p(1.0, 3.0)) + 1.0).abs() < 1e-15);
    let i3 = HermitianMat::identity(3);
    let p3 = point(i3.clone(), HermitianMat::zeros(3), i3, 1.0);
    assert!((cone_margin(&p3) - 1.0).abs() < 1e-15);
}

#[test]
fn two_dimensional_cone_is_psi_below_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let lambdas = [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)];
        let psi = rng.random_range(0.1..4.0);
        let m = cone_margin_from_eigenvalues(&lambdas, psi);
        assert_eq!(m > 0.0, psi < 2.0);
    }
}

#[test]
fn concavity_probe_examples() {
    let i2 = HermitianMat::identity(2);
    assert_eq!(concavity_probe(&i2, &i2).unwrap(), 0.0);
    let probe = concavity_probe(&i2, &diag(&[4.0, 1.0])).unwrap();
    let expected = 2.5 / 3.5 - 0.5 * (0.5 + 0.8);
    assert!((probe - expected).abs() < 1e-15);
    assert!((probe - 0.064_285_714).abs() < 1e-8);
    assert!(concavity_probe(&i2, &diag(&[1.0, -1.0])).is_err());
}

#[test]
fn lemma21_examples() {
    let i2 = HermitianMat::identity(2);
    let z2 = HermitianMat::zeros(2);
    let sub = point(i2.clone(), z2.clone(), i2.clone(), 1.0);
    assert!(lemma21_margin(&sub, &sub, 0.0).unwrap().abs() < 1e-15);

    let sol_h = lemma::diagonal_solution_2d(100.0, 1.0).unwrap();
    let sol = point(i2.clone(), z2.clone(), sol_h, 1.0);
    let f = linearization_coeffs(&sol).unwrap();
    assert!((f.trace() - 1.980_10).abs() < 1e-5);
    let m = lemma21_margin(&sub, &sol, 0.3).unwrap();
    // direct evaluation of F . (I - gt) - 0.3 (1 + tr F)
    let l2 = 100.0 / 199.0;
    let w = 100.0 + l2;
    let (f1, f2) = (0.01 - 1.0 / w, 1.0 / l2 - 1.0 / w);
    let direct = f1 * (1.0 - 100.0) + f2 * (1.0 - l2) - 0.3 * (1.0 + f1 + f2);
    assert!((m - direct).abs() < 1e-12);
    assert!((m - 0.086).abs() < 1e-3);

    // violated precondition: not a solution
    let not_sol = point(i2.clone(), z2, diag(&[3.0, 3.0]), 1.0);
    assert!(lemma21_margin(&sub, &not_sol, 0.0).is_err());
}

fn random_admissible(rng: &mut ChaCha8Rng, n: usize) -> PointData {
    let g = random_pd(n, 0.5, 2.0, rng);
    let chi = random_hermitian(n, rng);
    let gt = super::random::push_forward(&random_pd(n, 1e-2, 1e3, rng), &g.cholesky_factor().unwrap());
    let psi = rng.random_range(0.1..2.0);
    point(g, chi.clone(), gt.sub(&chi), psi)
}

#[test]
fn residual_is_midpoint_concave_in_hessian() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..10_000 {
        let n = 2 + k % 2;
        let a = random_admissible(&mut rng, n);
        let gt_b = super::random::push_forward(
            &random_pd(n, 1e-2, 1e3, &mut rng),
            &a.g.cholesky_factor().unwrap(),
        );
        let b = point(a.g.clone(), a.chi.clone(), gt_b.sub(&a.chi), a.psi);
        let mid = point(a.g.clone(), a.chi.clone(), a.hess_u.add(&b.hess_u).scale(0.5), a.psi);
        let lhs = residual_point(&mid).unwrap();
        let rhs = 0.5 * (residual_point(&a).unwrap() + residual_point(&b).unwrap());
        assert!(lhs >= rhs - 1e-10, "{lhs} < {rhs}");
    }
}

#[test]
fn linearization_matches_finite_differences_and_is_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for k in 0..1000 {
        let n = 2 + k % 3;
        let p = random_admissible(&mut rng, n);
        let f = linearization_coeffs(&p).unwrap();
        // F is positive definite with pencil eigenvalues 1/lambda_i - 1/W
        let pencil = p.pencil();
        let w = pencil.trace();
        let f_pencil = Pencil::new(&f, &p.g.inverse().unwrap()).unwrap();
        let mut expected: Vec<f64> = pencil.lambdas().iter().map(|l| 1.0 / l - 1.0 / w).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in f_pencil.lambdas().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
        assert!(f_pencil.min() > 0.0);

        // direction scaled to the smallest eigenvalue so the stencil stays admissible
        let dir = random_hermitian(n, &mut rng).scale(pencil.min() * 0.1);
        let h = 1e-3;
        let shifted = |s: f64| point(p.g.clone(), p.chi.clone(), p.hess_u.add(&dir.scale(s)), p.psi);
        let fd = (residual_point(&shifted(h)).unwrap() - residual_point(&shifted(-h)).unwrap()) / (2.0 * h);
        let exact = f.contract(&dir);
        // relative to the size of the contracted terms, not their (possibly cancelling) sum
        let scale = f.as_matrix().norm() * dir.as_matrix().norm();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(scale), "{fd} vs {exact}");
    }
}

#[test]
fn wedge_oracle_agrees_with_pencil_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 0..2000 {
        let n = 2 + k % 2;
        let g = random_pd(n, 0.5, 2.0, &mut rng);
        let chi = random_pd(n, 0.1, 10.0, &mut rng);
        let psi = rng.random_range(0.1..3.0);
        let p = point(g.clone(), HermitianMat::zeros(n), chi.clone(), psi);
        let sub = subsolution_margin(&p);
        let cone = cone_margin(&p);
        let sub_w = subsolution_margin_by_wedge(&chi, &g, psi).unwrap();
        let cone_w = cone_margin_by_wedge(&chi, &g, psi).unwrap();
        assert!((sub - sub_w).abs() <= 1e-10 * sub.abs().max(1.0), "{sub} vs {sub_w}");
        assert!((cone - cone_w).abs() <= 1e-10 * cone.abs().max(1.0), "{cone} vs {cone_w}");
    }
}

#[test]
fn equation_locus_matches_wedge_expansion() {
    // 2 l1 l2 = psi (l1 + l2) is where the residual vanishes
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..100 {
        let psi = rng.random_range(0.2..1.5);
        let gt = lemma::diagonal_solution_2d(rng.random_range(1.0..50.0), psi).unwrap();
        let rotated = rotate_diagonal(&gt.eigenvalues(), &mut rng);
        let i2 = HermitianMat::identity(2);
        let r = residual_point(&point(i2.clone(), HermitianMat::zeros(2), rotated.clone(), psi)).unwrap();
        assert!(r.abs() < 1e-12);
        assert!(subsolution_margin_by_wedge(&rotated, &i2, psi).unwrap().abs() < 1e-9);
    }
}

#[test]
fn concavity_probe_never_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for k in 0..3000 {
        let n = 2 + k % 3;
        let a = random_pd(n, 1e-2, 1e3, &mut rng);
        let b = random_pd(n, 1e-2, 1e3, &mut rng);
        assert!(concavity_probe(&a, &b).unwrap() >= -1e-12);
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn hermitian_after_construction(re in proptest::collection::vec(-5.0f64..5.0, 9), im in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let m = crate::CMat::from_fn(3, 3, |i, j| crate::Complex64::new(re[3 * i + j], im[3 * i + j]));
            let h = HermitianMat::new(m);
            prop_assert_eq!(h.as_matrix(), &h.as_matrix().adjoint());
        }

        #[test]
        fn equation_psi_zeroes_residual(l1 in 0.01f64..100.0, l2 in 0.01f64..100.0, l3 in 0.01f64..100.0) {
            let g = HermitianMat::identity(3);
            let h = diag(&[l1, l2, l3]);
            let psi = equation_psi(&g, &HermitianMat::zeros(3), &h).unwrap();
            let r = residual_point(&point(g, HermitianMat::zeros(3), h, psi)).unwrap();
            prop_assert!(r.abs() < 1e-13);
        }
    }
}
