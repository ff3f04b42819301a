//! Brute-force search for the strict-concavity constants `(theta, N)`:
//!
//! ```text
//! F . (Hess usub - Hess u) >= theta (1 + F . g)    wherever W >= N
//! ```
//!
//! Instances pair a pinched subsolution point (`eps g <= gtbar <= g/eps`,
//! `psi <= sup_psi`) with a point solving the equation exactly.

use rand::Rng;
use serde::Serialize;

use super::random::{log_uniform, push_forward, random_hermitian, random_pd, rotate_diagonal};
use super::{cone_margin, lemma21_margin_unchecked, linearization_coeffs, psi_from_pencil, HermitianMat, Pencil, PointData};
use crate::error::Result;

/// Solution eigenvalues (all but one) are drawn log-uniformly in this range.
pub const SOLUTION_SPECTRUM: (f64, f64) = (1e-2, 1e3);
/// Candidate thresholds for `N`.
pub const N_CANDIDATES: [f64; 3] = [10.0, 100.0, 1000.0];

#[derive(Clone, Debug)]
pub struct LemmaInstance {
    pub sub: PointData,
    pub sol: PointData,
    /// `W = tr_g gt` at the solution point.
    pub w: f64,
}

impl LemmaInstance {
    /// `F . (Hess usub - Hess u) - theta (1 + F . g)`.
    pub fn margin(&self, theta: f64) -> Result<f64> {
        Ok(lemma21_margin_unchecked(&self.sub, &self.sol, theta)?.0)
    }

    /// Largest `theta` this instance tolerates: `F . diff / (1 + F . g)`.
    pub fn theta_capacity(&self) -> Result<f64> {
        let (at_zero, f_g) = lemma21_margin_unchecked(&self.sub, &self.sol, 0.0)?;
        Ok(at_zero / (1.0 + f_g))
    }
}

#[derive(Clone, Debug)]
pub struct LemmaSampler {
    pub n: usize,
    pub epsilon: f64,
    pub sup_psi: f64,
}

impl LemmaSampler {
    pub fn new(n: usize, epsilon: f64, sup_psi: f64) -> Self {
        assert!(n >= 2, "lemma sampler needs n >= 2");
        assert!(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0, 1]");
        assert!(sup_psi > 0.0);
        Self { n, epsilon, sup_psi }
    }

    /// One candidate instance, or `None` when the construction is rejected
    /// (no positive root for the last eigenvalue, a solution point below the
    /// admissibility threshold, or the cone condition fails).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<LemmaInstance> {
        let n = self.n;
        let g = random_pd(n, 0.5, 2.0, rng);
        let l = g.cholesky_factor()?;
        let chi = random_hermitian(n, rng);

        let eps = self.epsilon;
        let sub_lambdas: Vec<f64> = (0..n).map(|_| log_uniform(rng, eps, 1.0 / eps)).collect();
        let gt_sub = push_forward(&rotate_diagonal(&sub_lambdas, rng), &l);
        let psi0 = psi_from_pencil(&Pencil::from_eigenvalues(sub_lambdas));
        let cap = psi0.min(self.sup_psi);
        // half the draws sit on the boundary psi = min(psi0, sup psi)
        let psi = if rng.random_bool(0.5) { cap } else { cap * rng.random_range(0.01..1.0) };

        let (lo, hi) = SOLUTION_SPECTRUM;
        let mut lambdas: Vec<f64> = (0..n - 1).map(|_| log_uniform(rng, lo, hi)).collect();
        let prod: f64 = lambdas.iter().product();
        let sum: f64 = lambdas.iter().sum();
        // n prod x = psi (sum + x)
        let denom = n as f64 * prod - psi;
        if !(denom > 0.0) {
            return None;
        }
        let last = psi * sum / denom;
        if !(last.is_finite() && last > 0.0) {
            return None;
        }
        lambdas.push(last);
        let w: f64 = lambdas.iter().sum();
        let gt_sol = push_forward(&rotate_diagonal(&lambdas, rng), &l);

        let sub = PointData::new(g.clone(), chi.clone(), gt_sub.sub(&chi), psi).ok()?;
        let sol = PointData::new(g, chi.clone(), gt_sol.sub(&chi), psi).ok()?;
        linearization_coeffs(&sol).ok()?;
        if !(cone_margin(&sub) > 0.0) {
            return None;
        }
        Some(LemmaInstance { sub, sol, w })
    }

    /// Draw until an instance with `W >= n_threshold` appears, giving up
    /// after `max_attempts` candidates.
    pub fn sample_with_w_at_least<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n_threshold: f64,
        max_attempts: usize,
    ) -> (Option<LemmaInstance>, usize) {
        for attempt in 1..=max_attempts {
            if let Some(inst) = self.sample(rng) {
                if inst.w >= n_threshold {
                    return (Some(inst), attempt);
                }
            }
        }
        (None, max_attempts)
    }
}

/// Largest grid value `0.01 k` not exceeding every observed capacity, found
/// by the descending scan `theta = 1.00, 0.99, ...`.
pub fn largest_grid_theta(min_capacity: f64) -> f64 {
    for k in (1..=100).rev() {
        let theta = k as f64 / 100.0;
        if theta <= min_capacity {
            return theta;
        }
    }
    0.0
}

/// Brute-force minimum of the `theta` capacity over aligned (simultaneously
/// diagonal) instances, evaluated in closed form:
/// `F_i = 1/lambda_i - 1/W`, capacity `sum F_i (b_i - lambda_i) / (1 + sum F_i)`.
///
/// Subsolution eigenvalues `b_i` range over a log grid on `[eps, 1/eps]`
/// including both ends, `psi` over fractions of `min(psi0(b), sup_psi)`, and
/// the free solution eigenvalues over a log grid on [`SOLUTION_SPECTRUM`]
/// with the last one solved from the equation. Returns `None` when no
/// enumerated instance reaches `W >= n_threshold`.
pub fn enumerate_aligned_min_capacity(
    n: usize,
    epsilon: f64,
    sup_psi: f64,
    n_threshold: f64,
    sub_points: usize,
    solution_points: usize,
) -> Option<f64> {
    let log_grid = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..k)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp())
            .collect()
    };
    let sub_grid = log_grid(epsilon, 1.0 / epsilon, sub_points);
    let (lo, hi) = SOLUTION_SPECTRUM;
    let sol_grid = log_grid(lo, hi, solution_points);
    let fractions = [1.0, 0.75, 0.5, 0.25, 0.1];

    let mut best: Option<f64> = None;
    let mut b = vec![0.0; n];
    let mut free = vec![0.0; n - 1];
    for_each_tuple(sub_grid.len(), n, |bi| {
        for (slot, &k) in b.iter_mut().zip(bi) {
            *slot = sub_grid[k];
        }
        let psi0 = n as f64 * b.iter().product::<f64>() / b.iter().sum::<f64>();
        let cap = psi0.min(sup_psi);
        for frac in fractions {
            let psi = cap * frac;
            for_each_tuple(sol_grid.len(), n - 1, |li| {
                for (slot, &k) in free.iter_mut().zip(li) {
                    *slot = sol_grid[k];
                }
                let prod: f64 = free.iter().product();
                let sum: f64 = free.iter().sum();
                let denom = n as f64 * prod - psi;
                if denom <= 0.0 {
                    return;
                }
                let last = psi * sum / denom;
                let w = sum + last;
                if w < n_threshold {
                    return;
                }
                let lambdas = free.iter().copied().chain(std::iter::once(last));
                let (mut num, mut tr_f) = (0.0, 0.0);
                for (l, bi) in lambdas.zip(&b) {
                    let f = 1.0 / l - 1.0 / w;
                    num += f * (bi - l);
                    tr_f += f;
                }
                let cap = num / (1.0 + tr_f);
                best = Some(best.map_or(cap, |c: f64| c.min(cap)));
            });
        }
    });
    best
}

fn for_each_tuple(base: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; len];
    loop {
        f(&idx);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < base {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PilotResult {
    pub n_threshold: f64,
    pub samples: usize,
    /// Minimum capacity over the random pilot sample.
    pub random_min_capacity: f64,
    /// Minimum capacity over the aligned enumeration.
    pub enumerated_min_capacity: Option<f64>,
    pub min_capacity: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub theta: f64,
    pub n_threshold: f64,
    pub pilots: Vec<PilotResult>,
}

/// For each candidate `N`, collect `pilot_size` random instances with
/// `W >= N` (skipping `N` if `attempts_per_sample * pilot_size` draws do not
/// suffice), add the aligned enumeration, and find the largest grid `theta`
/// with zero violations on both. The pair with the largest `theta` wins;
/// ties go to the smaller `N`.
pub fn calibrate<R: Rng + ?Sized>(
    sampler: &LemmaSampler,
    pilot_size: usize,
    attempts_per_sample: usize,
    rng: &mut R,
) -> Result<Calibration> {
    let mut pilots = Vec::new();
    for &n_threshold in &N_CANDIDATES {
        let budget = attempts_per_sample * pilot_size;
        let mut used = 0;
        let mut min_capacity = f64::INFINITY;
        let mut samples = 0;
        while samples < pilot_size && used < budget {
            let (inst, attempts) = sampler.sample_with_w_at_least(rng, n_threshold, budget - used);
            used += attempts;
            if let Some(inst) = inst {
                min_capacity = min_capacity.min(inst.theta_capacity()?);
                samples += 1;
            }
        }
        if samples < pilot_size {
            continue;
        }
        let enumerated = enumerate_aligned_min_capacity(
            sampler.n,
            sampler.epsilon,
            sampler.sup_psi,
            n_threshold,
            7,
            match sampler.n {
                0..=2 => 401,
                3 => 61,
                _ => 15,
            },
        );
        let combined = enumerated.map_or(min_capacity, |e| e.min(min_capacity));
        pilots.push(PilotResult {
            n_threshold,
            samples,
            random_min_capacity: min_capacity,
            enumerated_min_capacity: enumerated,
            min_capacity: combined,
            theta: largest_grid_theta(combined),
        });
    }
    let best = pilots
        .iter()
        .fold(None::<&PilotResult>, |best, p| match best {
            Some(b) if b.theta >= p.theta => Some(b),
            _ => Some(p),
        })
        .map(|p| (p.theta, p.n_threshold))
        .unwrap_or((0.0, N_CANDIDATES[0]));
    Ok(Calibration { theta: best.0, n_threshold: best.1, pilots })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub samples: usize,
    pub attempts: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub min_capacity: f64,
}

/// Count violations of the strict-concavity inequality at `(theta, N)` over
/// `samples` instances with `W >= N`.
pub fn scan<R: Rng + ?Sized>(
    sampler: &LemmaSampler,
    theta: f64,
    n_threshold: f64,
    samples: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<ScanResult> {
    let mut out = ScanResult {
        samples: 0,
        attempts: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        min_capacity: f64::INFINITY,
    };
    while out.samples < samples && out.attempts < max_attempts {
        let (inst, used) = sampler.sample_with_w_at_least(rng, n_threshold, max_attempts - out.attempts);
        out.attempts += used;
        let Some(inst) = inst else { break };
        let margin = inst.margin(theta)?;
        out.worst_margin = out.worst_margin.min(margin);
        out.min_capacity = out.min_capacity.min(inst.theta_capacity()?);
        if margin < 0.0 {
            out.violations += 1;
        }
        out.samples += 1;
    }
    Ok(out)
}

/// Diagonal solution of the two-dimensional equation `2 l1 l2 = psi (l1 + l2)`
/// for a given `l1`.
pub fn diagonal_solution_2d(l1: f64, psi: f64) -> Option<HermitianMat> {
    let denom = 2.0 * l1 - psi;
    (denom > 0.0).then(|| HermitianMat::from_real_diagonal(&[l1, psi * l1 / denom]))
}
