//! Post-solve diagnostics: hypothesis margins of the subsolution, the
//! comparison `u >= usub`, the strict-concavity inequality at grid nodes,
//! the boundary barrier, and gradient/Laplacian ratio reports.
//!
//! These are measurements, not certificates: the a priori constants are
//! existential, so boundedness is only observed across refinements.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient_sup, w_field, BoundaryFill, Region, ScalarField};
use crate::pointwise::{cone_margin_from_eigenvalues, subsolution_margin_from_eigenvalues};
use crate::solver::{Discretization, ProblemSpec};

/// Nodewise minima of the subsolution hypotheses and its pinching constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub admissibility_min: f64,
    pub subsolution_min: f64,
    pub cone_min: f64,
    /// Largest `eps` with `eps g <= chi_usub <= g / eps` at every interior node.
    pub epsilon: f64,
    pub admissible: bool,
    pub subsolution: bool,
    pub cone: bool,
}

pub fn validate_hypotheses(problem: &ProblemSpec) -> Result<HypothesisVerdict> {
    let disc = Discretization::new(&problem.grid, &problem.metric, &problem.chi)?;
    let psi = disc.interior_values(&problem.psi);
    let pencils = disc.pencils(problem.usub.values());
    let (mut adm, mut sub, mut cone) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, &s) in pencils.iter().zip(&psi) {
        adm = adm.min(p.min());
        sub = sub.min(subsolution_margin_from_eigenvalues(p.lambdas(), s));
        cone = cone.min(cone_margin_from_eigenvalues(p.lambdas(), s));
        lo = lo.min(p.min());
        hi = hi.max(p.max());
    }
    let epsilon = if lo > 0.0 { lo.min(1.0 / hi) } else { 0.0 };
    Ok(HypothesisVerdict {
        admissibility_min: adm,
        subsolution_min: sub,
        cone_min: cone,
        epsilon,
        admissible: adm > 0.0,
        subsolution: sub >= -1e-10,
        cone: cone > 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// `min (u - usub)` over all nodes.
    pub min: f64,
    pub argmin: usize,
    pub boundary_min: f64,
    pub interior_min: f64,
    /// `interior_min >= boundary_min`
    pub min_on_boundary: bool,
    /// `min >= -1e-8`
    pub pass: bool,
}

/// `min (u - usub)`; the fields must agree on the boundary to 1e-12.
pub fn comparison_check(u: &ScalarField, usub: &ScalarField) -> Result<ComparisonResult> {
    u.check_same_grid(usub)?;
    let spec = u.spec();
    for p in spec.boundary_indices() {
        let d = (u.get(p) - usub.get(p)).abs();
        if d > 1e-12 {
            return Err(Error::Precondition(format!(
                "boundary values differ by {d:e} at node {p} (multi-index {:?})",
                spec.multi_index(p)
            )));
        }
    }
    let (mut bmin, mut imin) = (f64::INFINITY, f64::INFINITY);
    let (mut min, mut argmin) = (f64::INFINITY, 0);
    for p in 0..spec.len() {
        let d = u.get(p) - usub.get(p);
        if d < min {
            min = d;
            argmin = p;
        }
        if spec.is_interior(p) {
            imin = imin.min(d);
        } else {
            bmin = bmin.min(d);
        }
    }
    Ok(ComparisonResult { min, argmin, boundary_min: bmin, interior_min: imin, min_on_boundary: imin >= bmin, pass: min >= -1e-8 })
}

/// Gradient and Laplacian sups with the ratios `sup / (1 + boundary sup)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// Over all nodes of the closed box.
    pub grad_interior_sup: f64,
    pub grad_boundary_sup: f64,
    /// `sup |W|` over interior nodes.
    pub lap_interior_sup: f64,
    /// `sup |W|` over boundary nodes, each taking the value of its nearest interior node.
    pub lap_boundary_sup: f64,
    pub ratio_grad: f64,
    pub ratio_lap: f64,
}

pub fn estimate_ratios(u: &ScalarField, problem: &ProblemSpec) -> Result<RatioReport> {
    u.check_same_grid(&problem.psi)?;
    let grad_all = gradient_sup(u, Region::All);
    let grad_bdry = gradient_sup(u, Region::Boundary);
    let w = w_field(u, &problem.metric, &problem.chi, BoundaryFill::NearestInterior)?;
    let sup = |r: Region| w.spec().indices(r).iter().map(|&p| w.get(p).abs()).fold(0.0, f64::max);
    let (lap_int, lap_bdry) = (sup(Region::Interior), sup(Region::Boundary));
    Ok(RatioReport {
        grad_interior_sup: grad_all,
        grad_boundary_sup: grad_bdry,
        lap_interior_sup: lap_int,
        lap_boundary_sup: lap_bdry,
        ratio_grad: grad_all / (1.0 + grad_bdry),
        ratio_lap: lap_int / (1.0 + lap_bdry),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma21Record {
    pub theta_used: f64,
    #[serde(rename = "N_used")]
    pub n_used: f64,
    pub violations: usize,
    /// Interior nodes with `W >= N`.
    pub nodes_checked: usize,
    /// Smallest margin among checked nodes (`None` if no node was checked).
    pub worst_margin: Option<f64>,
}

/// Counts interior nodes with `W >= N` where
/// `F . (Hess usub - Hess u) - theta (1 + F . g) < 0`, `F` taken at `u`.
pub fn lemma21_scan(u: &ScalarField, usub: &ScalarField, problem: &ProblemSpec, theta: f64, n_threshold: f64) -> Result<Lemma21Record> {
    u.check_same_grid(usub)?;
    u.check_same_grid(&problem.psi)?;
    let disc = Discretization::new(&problem.grid, &problem.metric, &problem.chi)?;
    let margins: Vec<Option<f64>> = (0..disc.unknowns())
        .into_par_iter()
        .map(|k| {
            let (f, w) = disc.linearization(k, u.values())?;
            if w < n_threshold {
                return Ok(None);
            }
            let diff = disc.hessian(k, usub.values()).sub(&disc.hessian(k, u.values()));
            Ok(Some(f.contract(&diff) - theta * (1.0 + f.contract(disc.metric_at(k)))))
        })
        .collect::<Result<_>>()?;
    let checked: Vec<f64> = margins.into_iter().flatten().collect();
    Ok(Lemma21Record {
        theta_used: theta,
        n_used: n_threshold,
        violations: checked.iter().filter(|&&m| m < 0.0).count(),
        nodes_checked: checked.len(),
        worst_margin: checked.iter().copied().reduce(f64::min),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierRecord {
    pub t: f64,
    #[serde(rename = "T")]
    pub big_t: f64,
    pub delta: f64,
    /// Achieved `c0`: `min (-F . Hess v) / (1 + F . g)` over interior collar nodes.
    pub min_margin: f64,
    /// `min v` over all collar nodes, boundary included.
    pub min_v: f64,
    pub collar_nodes: usize,
}

impl BarrierRecord {
    pub fn accepted(&self) -> bool {
        self.min_v >= 0.0 && self.min_margin > 0.0
    }
}

/// Barrier `v = (u - usub) + t sigma - T sigma^2` on the collar `sigma < delta`,
/// with `sigma` the distance to the nearest face. `Hess sigma` vanishes off
/// the medial set; `Hess sigma^2 = 2 d sigma (x) d sigma` uses the nearest
/// face (the first one on ties).
pub fn barrier_check(u: &ScalarField, usub: &ScalarField, problem: &ProblemSpec, t: f64, big_t: f64, delta: f64) -> Result<BarrierRecord> {
    u.check_same_grid(usub)?;
    u.check_same_grid(&problem.psi)?;
    let spec = u.spec();
    let h_min = spec.spacings().into_iter().fold(f64::INFINITY, f64::min);
    if delta <= h_min {
        return Err(Error::Precondition(format!("collar width {delta} does not exceed the grid spacing {h_min}, collar has no interior nodes")));
    }
    let half = (0..spec.dims()).map(|a| 0.5 * (spec.hi()[a] - spec.lo()[a])).fold(f64::INFINITY, f64::min);
    if delta > half {
        return Err(Error::Precondition(format!("collar width {delta} exceeds the shortest half-width {half}")));
    }
    let disc = Discretization::new(&problem.grid, &problem.metric, &problem.chi)?;
    let min_v = (0..spec.len())
        .filter_map(|p| {
            let sigma = spec.face_distance(&spec.coords(p));
            (sigma < delta).then(|| u.get(p) - usub.get(p) + t * sigma - big_t * sigma * sigma)
        })
        .fold(f64::INFINITY, f64::min);
    let ratios: Vec<Option<f64>> = (0..disc.unknowns())
        .into_par_iter()
        .map(|k| {
            let p = disc.interior()[k];
            let z = spec.coords(p);
            let sigma = spec.face_distance(&z);
            if sigma >= delta {
                return Ok(None);
            }
            let (f, _) = disc.linearization(k, u.values())?;
            let axis = (0..spec.dims())
                .find(|&a| (z[a] - spec.lo()[a]).min(spec.hi()[a] - z[a]) == sigma)
                .expect("some face attains the distance");
            // complex Hessian of sigma^2 is (1/2) e_j e_j^T for the complex direction j of the axis
            let j = axis / 2;
            let f_sigma2 = 0.5 * f.as_matrix()[(j, j)].re;
            let f_diff = f.contract(&disc.hessian(k, u.values()).sub(&disc.hessian(k, usub.values())));
            let f_v = f_diff - big_t * f_sigma2;
            Ok(Some(-f_v / (1.0 + f.contract(disc.metric_at(k)))))
        })
        .collect::<Result<_>>()?;
    let collar: Vec<f64> = ratios.into_iter().flatten().collect();
    Ok(BarrierRecord {
        t,
        big_t,
        delta,
        min_margin: collar.iter().copied().fold(f64::INFINITY, f64::min),
        min_v,
        collar_nodes: collar.len(),
    })
}

/// Evaluates every `(t, T, delta)` triple and returns all records together
/// with the accepted one of largest achieved `c0`.
pub fn barrier_sweep(
    u: &ScalarField,
    usub: &ScalarField,
    problem: &ProblemSpec,
    ts: &[f64],
    big_ts: &[f64],
    deltas: &[f64],
) -> Result<(Vec<BarrierRecord>, Option<BarrierRecord>)> {
    let mut all = Vec::new();
    for &t in ts {
        for &bt in big_ts {
            for &d in deltas {
                all.push(barrier_check(u, usub, problem, t, bt, d)?);
            }
        }
    }
    let best = all
        .iter()
        .filter(|r| r.accepted())
        .max_by(|a, b| a.min_margin.total_cmp(&b.min_margin))
        .cloned();
    Ok((all, best))
}

/// Default sweep: `T` over decades, `delta` over multiples of the spacing up
/// to the shortest half-width, `t = T delta` (the smallest `t` keeping
/// `t sigma - T sigma^2 >= 0` on the collar) and `t = 2 T delta`.
pub fn default_barrier_sweep(u: &ScalarField, usub: &ScalarField, problem: &ProblemSpec) -> Result<(Vec<BarrierRecord>, Option<BarrierRecord>)> {
    let spec = u.spec();
    let h = spec.h_max();
    let half = (0..spec.dims()).map(|a| 0.5 * (spec.hi()[a] - spec.lo()[a])).fold(f64::INFINITY, f64::min);
    let deltas: Vec<f64> = (1..=4).map(|k| (k as f64 + 0.5) * h).filter(|&d| d <= half).collect();
    let mut all = Vec::new();
    for big_t in [1.0, 10.0, 100.0] {
        for &d in &deltas {
            for factor in [1.0, 2.0] {
                all.push(barrier_check(u, usub, problem, factor * big_t * d, big_t, d)?);
            }
        }
    }
    let best = all
        .iter()
        .filter(|r| r.accepted())
        .max_by(|a, b| a.min_margin.total_cmp(&b.min_margin))
        .cloned();
    Ok((all, best))
}

/// Everything measured after a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub grad_interior_sup: f64,
    pub grad_boundary_sup: f64,
    pub lap_interior_sup: f64,
    pub lap_boundary_sup: f64,
    pub ratio_grad: f64,
    pub ratio_lap: f64,
    pub comparison_min: f64,
    pub comparison_min_on_boundary: bool,
    pub admissibility_min: f64,
    pub cone_min: f64,
    pub subsolution_min: f64,
    pub epsilon: f64,
    pub lemma21: Lemma21Record,
    pub barrier: Option<BarrierRecord>,
}

/// Barrier parameters; `None` runs [`default_barrier_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub t: f64,
    #[serde(rename = "T")]
    pub big_t: f64,
    pub delta: f64,
}

pub fn estimate_report(
    u: &ScalarField,
    problem: &ProblemSpec,
    theta: f64,
    n_threshold: f64,
    barrier: Option<BarrierParams>,
) -> Result<EstimateReport> {
    let ratios = estimate_ratios(u, problem)?;
    let cmp = comparison_check(u, &problem.usub)?;
    let hyp = validate_hypotheses(problem)?;
    let lemma21 = lemma21_scan(u, &problem.usub, problem, theta, n_threshold)?;
    let barrier = match barrier {
        Some(b) => Some(barrier_check(u, &problem.usub, problem, b.t, b.big_t, b.delta)?),
        None => default_barrier_sweep(u, &problem.usub, problem)?.1,
    };
    Ok(EstimateReport {
        grad_interior_sup: ratios.grad_interior_sup,
        grad_boundary_sup: ratios.grad_boundary_sup,
        lap_interior_sup: ratios.lap_interior_sup,
        lap_boundary_sup: ratios.lap_boundary_sup,
        ratio_grad: ratios.ratio_grad,
        ratio_lap: ratios.ratio_lap,
        comparison_min: cmp.min,
        comparison_min_on_boundary: cmp.min_on_boundary,
        admissibility_min: hyp.admissibility_min,
        cone_min: hyp.cone_min,
        subsolution_min: hyp.subsolution_min,
        epsilon: hyp.epsilon,
        lemma21,
        barrier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::AnalyticFn;
    use crate::geom::{ChiForm, MetricField};
    use crate::grid::GridSpec;
    use crate::solver::{solve_continuation, SolveOptions};

    fn quadratic(m: usize, psi: f64) -> ProblemSpec {
        let g = GridSpec::cube(2, 0.0, 1.0, m).unwrap();
        let q = ScalarField::sample(g.clone(), &AnalyticFn::Quadratic { scale: 1.0 }).unwrap();
        ProblemSpec::new(MetricField::euclidean(2), ChiForm::Zero, ScalarField::constant(g, psi), q.clone(), q).unwrap()
    }

    #[test]
    fn hypothesis_examples() {
        let v = validate_hypotheses(&quadratic(5, 1.0)).unwrap();
        assert!((v.epsilon - 1.0).abs() < 1e-12);
        assert!(v.subsolution_min.abs() < 1e-12);
        assert!((v.cone_min - 1.0).abs() < 1e-12);
        assert!(v.admissible && v.subsolution && v.cone);
        let v = validate_hypotheses(&quadratic(5, 3.0)).unwrap();
        assert!((v.cone_min + 1.0).abs() < 1e-12);
        assert!(!v.cone && !v.subsolution);
    }

    #[test]
    fn comparison_examples() {
        let p = quadratic(5, 1.0);
        let c = comparison_check(&p.usub, &p.usub).unwrap();
        assert_eq!(c.min, 0.0);
        assert!(c.pass && c.min_on_boundary);
        let bump = ScalarField::from_fn(p.grid.clone(), |z| {
            z.iter().map(|x| x * x).sum::<f64>() + 0.5 * z.iter().map(|x| x * (1.0 - x)).product::<f64>()
        })
        .unwrap();
        let c = comparison_check(&bump, &p.usub).unwrap();
        let expect = 0.5 * (0.25f64 * 0.75).powi(4);
        assert!((c.interior_min - expect).abs() < 1e-15);
        assert_eq!(c.min, 0.0);
        let shifted = ScalarField::from_fn(p.grid.clone(), |z| z.iter().map(|x| x * x).sum::<f64>() + 1.0).unwrap();
        assert!(comparison_check(&shifted, &p.usub).is_err());
    }

    #[test]
    fn ratio_examples() {
        let p = quadratic(9, 1.0);
        let c = ScalarField::constant(p.grid.clone(), 2.0);
        let r = estimate_ratios(&c, &p).unwrap();
        assert_eq!((r.ratio_grad, r.ratio_lap), (0.0, 0.0));
        // |grad u| = 2|z| peaks at the far corner; W = 2 everywhere
        let r = estimate_ratios(&p.usub, &p).unwrap();
        assert!((r.grad_interior_sup - 4.0).abs() < 1e-12 && (r.grad_boundary_sup - 4.0).abs() < 1e-12);
        assert!((r.ratio_grad - 0.8).abs() < 1e-12);
        assert!((r.ratio_lap - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lemma_scan_examples() {
        let p = quadratic(7, 0.8);
        let none = lemma21_scan(&p.usub, &p.usub, &p, 0.1, 1e9).unwrap();
        assert_eq!((none.violations, none.nodes_checked), (0, 0));
        let (state, _) = solve_continuation(&p, &SolveOptions::default()).unwrap();
        let weak = lemma21_scan(&state.u, &p.usub, &p, 0.0, 0.0).unwrap();
        assert_eq!(weak.violations, 0);
        assert_eq!(weak.nodes_checked, p.grid.interior_len());
    }

    #[test]
    fn barrier_examples() {
        let p = quadratic(9, 1.0);
        let r = barrier_check(&p.usub, &p.usub, &p, 0.0, 0.0, 0.3).unwrap();
        assert_eq!(r.min_v, 0.0);
        assert!(r.min_margin.abs() < 1e-15);
        assert!(barrier_check(&p.usub, &p.usub, &p, 0.0, 0.0, 0.1).is_err());
        assert!(barrier_check(&p.usub, &p.usub, &p, 0.0, 0.0, 0.6).is_err());
        // F = I/2 and 1 + F.g = 2, so c0 = T/8 exactly
        let r = barrier_check(&p.usub, &p.usub, &p, 3.0, 10.0, 0.3).unwrap();
        assert!((r.min_margin - 10.0 / 8.0).abs() < 1e-12);
        assert!(r.min_v >= 0.0 && r.accepted());
        let (all, best) = default_barrier_sweep(&p.usub, &p.usub, &p).unwrap();
        assert!(all.iter().filter(|r| r.accepted()).all(|r| r.min_v >= 0.0));
        assert!(best.unwrap().min_margin > 0.0);
    }
}
