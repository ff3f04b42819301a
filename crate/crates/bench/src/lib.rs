//! Shared fixtures for the benchmarks.

use hcma_core::pointwise::random::{random_hermitian, random_pd};
use hcma_core::pointwise::PointData;
use hcma_core::solver::mms_generate;
use hcma_core::{AnalyticFn, ChiForm, GridSpec, HermitianMat, MetricField, ProblemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` positive-definite pairs of size `n`.
pub fn pd_pairs(n: usize, count: usize, seed: u64) -> Vec<(HermitianMat, HermitianMat)> {
    let mut r = rng(seed);
    (0..count).map(|_| (random_pd(n, 0.1, 10.0, &mut r), random_pd(n, 0.1, 10.0, &mut r))).collect()
}

/// Admissible points with a random metric and `chi`.
pub fn points(n: usize, count: usize, seed: u64) -> Vec<PointData> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let g = random_pd(n, 0.5, 2.0, &mut r);
            let chi = random_hermitian(n, &mut r);
            let gt = random_pd(n, 0.1, 10.0, &mut r);
            PointData::new(g, chi.clone(), gt.sub(&chi), 1.0).expect("positive metric")
        })
        .collect()
}

/// Manufactured problem on the unit cube with the conformal metric and `chi = omega`.
pub fn mms_problem(m: usize) -> ProblemSpec {
    let grid = GridSpec::cube(2, 0.0, 1.0, m).expect("valid grid");
    let metric = MetricField::builtin("conformal-exp", &[1.0], 2).expect("builtin");
    let u_star = AnalyticFn::PluriharmonicBump { scale: 1.0, amp: 0.1 };
    mms_generate(&metric, &ChiForm::Omega, &u_star, &grid).expect("admissible").problem
}
