//! Per-point algebra of the equation `det(gt) = (psi/n) W det(g)`.
//!
//! Everything here works on small dense Hermitian matrices: the metric `g`,
//! the background form `chi`, the complex Hessian of the unknown, and
//! `gt = chi + Hess u`. Quantities that depend only on `gt` relative to `g`
//! are computed from the generalized eigenvalues of the pencil `(gt, g)`.

mod hermitian;
pub mod lemma;
pub mod random;
pub mod wedge;

pub use hermitian::{HermitianMat, MetricFrame, Pencil};

use crate::error::{Error, Result};

/// Relative threshold below which the smallest pencil eigenvalue is treated
/// as non-admissible: `lambda_min > ADMISSIBILITY_RTOL * tr_g(gt) / n`.
pub const ADMISSIBILITY_RTOL: f64 = 1e-10;

/// The data of the equation at one point.
#[derive(Clone, Debug)]
pub struct PointData {
    pub g: HermitianMat,
    pub chi: HermitianMat,
    pub hess_u: HermitianMat,
    pub psi: f64,
}

impl PointData {
    pub fn new(g: HermitianMat, chi: HermitianMat, hess_u: HermitianMat, psi: f64) -> Result<Self> {
        let n = g.dim();
        for m in [&chi, &hess_u] {
            if m.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
            }
        }
        if g.cholesky_factor().is_none() {
            return Err(Error::NotPositiveDefinite("metric"));
        }
        Ok(Self { g, chi, hess_u, psi })
    }

    pub fn n(&self) -> usize {
        self.g.dim()
    }

    /// `gt = chi + Hess u`
    pub fn gtilde(&self) -> HermitianMat {
        self.chi.add(&self.hess_u)
    }

    pub fn pencil(&self) -> Pencil {
        Pencil::new(&self.gtilde(), &self.g).expect("metric checked positive definite on construction")
    }
}

pub fn assemble_gtilde(chi: &HermitianMat, hess_u: &HermitianMat) -> Result<HermitianMat> {
    if chi.dim() != hess_u.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), got: hess_u.dim() });
    }
    Ok(chi.add(hess_u))
}

/// Smallest eigenvalue of `gt` relative to `g`; admissible iff positive.
pub fn admissibility_margin(p: &PointData) -> f64 {
    p.pencil().min()
}

/// Admissibility with the relative guard [`ADMISSIBILITY_RTOL`].
pub fn is_admissible_pencil(pencil: &Pencil) -> bool {
    let n = pencil.lambdas().len() as f64;
    let w = pencil.trace();
    pencil.min() > ADMISSIBILITY_RTOL * w.abs() / n && w > 0.0
}

fn admissible_pencil(p: &PointData) -> Result<Pencil> {
    let pencil = p.pencil();
    if is_admissible_pencil(&pencil) {
        Ok(pencil)
    } else {
        Err(Error::NotAdmissible { margin: pencil.min() })
    }
}

/// Residual in log form from pencil eigenvalues:
/// `sum log(lambda) - log(sum lambda) - log(psi/n)`.
pub fn residual_from_pencil(pencil: &Pencil, psi: f64) -> f64 {
    let n = pencil.lambdas().len() as f64;
    let log_det: f64 = pencil.lambdas().iter().map(|l| l.ln()).sum();
    log_det - pencil.trace().ln() - (psi / n).ln()
}

/// `r = log det(g^{-1} gt) - log tr_g gt - log(psi/n)`; zero exactly where
/// the equation holds, and concave in `Hess u`.
pub fn residual_point(p: &PointData) -> Result<f64> {
    if !(p.psi > 0.0) {
        return Err(Error::Precondition(format!("psi must be positive, got {}", p.psi)));
    }
    let pencil = admissible_pencil(p)?;
    Ok(residual_from_pencil(&pencil, p.psi))
}

/// `F = gt^{-1} - g^{-1}/W`, the coefficients of the linearized operator:
/// the derivative of [`residual_point`] in direction `delta` is `F . delta`.
pub fn linearization_coeffs(p: &PointData) -> Result<HermitianMat> {
    let pencil = admissible_pencil(p)?;
    let w = pencil.trace();
    let gt_inv = p.gtilde().inverse().ok_or(Error::NotPositiveDefinite("gtilde"))?;
    let g_inv = p.g.inverse().ok_or(Error::NotPositiveDefinite("metric"))?;
    Ok(gt_inv.sub(&g_inv.scale(1.0 / w)))
}

/// The unique `psi` for which the equation holds: `n det(g^{-1} gt) / tr_g gt`.
pub fn equation_psi(g: &HermitianMat, chi: &HermitianMat, hess_u: &HermitianMat) -> Result<f64> {
    let p = PointData::new(g.clone(), chi.clone(), hess_u.clone(), 1.0)?;
    let pencil = admissible_pencil(&p)?;
    Ok(psi_from_pencil(&pencil))
}

pub fn psi_from_pencil(pencil: &Pencil) -> f64 {
    let n = pencil.lambdas().len() as f64;
    n * pencil.product() / pencil.trace()
}

pub fn subsolution_margin_from_eigenvalues(lambdas: &[f64], psi: f64) -> f64 {
    let n = lambdas.len() as f64;
    lambdas.iter().product::<f64>() - psi / n * lambdas.iter().sum::<f64>()
}

pub fn cone_margin_from_eigenvalues(lambdas: &[f64], psi: f64) -> f64 {
    let n = lambdas.len();
    (0..n)
        .map(|i| {
            let prod: f64 = (0..n).filter(|&k| k != i).map(|k| lambdas[k]).product();
            let sum: f64 = (0..n).filter(|&k| k != i).map(|k| lambdas[k]).sum();
            n as f64 * prod - psi * sum
        })
        .fold(f64::INFINITY, f64::min)
}

/// `det(g^{-1} gt) - (psi/n) tr_g gt`; `gt` is a subsolution iff non-negative.
pub fn subsolution_margin(p: &PointData) -> f64 {
    subsolution_margin_from_eigenvalues(p.pencil().lambdas(), p.psi)
}

/// `min_i [n prod_{k != i} lambda_k - psi sum_{j != i} lambda_j]`; the cone
/// condition holds iff positive.
pub fn cone_margin(p: &PointData) -> f64 {
    cone_margin_from_eigenvalues(p.pencil().lambdas(), p.psi)
}

/// `G((A+B)/2) - (G(A) + G(B))/2` with `G(A) = (det A / tr A)^{1/(n-1)}`.
pub fn concavity_probe(a: &HermitianMat, b: &HermitianMat) -> Result<f64> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
    }
    if n < 2 {
        return Err(Error::Precondition("concavity probe needs n >= 2".into()));
    }
    let quotient = |m: &HermitianMat| -> Result<f64> {
        let ev = m.eigenvalues();
        if ev[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite("concavity probe input"));
        }
        let det: f64 = ev.iter().product();
        let tr: f64 = ev.iter().sum();
        Ok((det / tr).powf(1.0 / (n as f64 - 1.0)))
    };
    let mid = a.add(b).scale(0.5);
    Ok(quotient(&mid)? - 0.5 * (quotient(a)? + quotient(b)?))
}

/// `F . (Hess usub - Hess u) - theta (1 + F . g)` with `F` from the solution point.
pub fn lemma21_margin(p_sub: &PointData, p_sol: &PointData, theta: f64) -> Result<f64> {
    let same = |a: &HermitianMat, b: &HermitianMat| (a.as_matrix() - b.as_matrix()).norm() <= 1e-12 * (1.0 + a.as_matrix().norm());
    if !same(&p_sub.g, &p_sol.g) || !same(&p_sub.chi, &p_sol.chi) || p_sub.psi != p_sol.psi {
        return Err(Error::Precondition("subsolution and solution points must share g, chi and psi".into()));
    }
    let r = residual_point(p_sol)?;
    if r.abs() > 1e-10 {
        return Err(Error::Precondition(format!("solution point does not satisfy the equation (residual {r:e})")));
    }
    let cone = cone_margin(p_sub);
    if !(cone > 0.0) {
        return Err(Error::Precondition(format!("subsolution point fails the cone condition (margin {cone:e})")));
    }
    Ok(lemma21_margin_unchecked(p_sub, p_sol, theta)?.0)
}

/// Margin and `F . g` without precondition checks (used by field scans).
pub fn lemma21_margin_unchecked(p_sub: &PointData, p_sol: &PointData, theta: f64) -> Result<(f64, f64)> {
    let f = linearization_coeffs(p_sol)?;
    let diff = p_sub.hess_u.sub(&p_sol.hess_u);
    let f_g = f.contract(&p_sol.g);
    Ok((f.contract(&diff) - theta * (1.0 + f_g), f_g))
}

#[cfg(test)]
mod tests;
