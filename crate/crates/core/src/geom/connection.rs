use super::MetricField;
use crate::error::{Error, Result};
use crate::functions::AnalyticFn;
use crate::{CMat, Complex64};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Chern connection coefficients `Gamma^l_{ik} = g^{l mbar} d_i g_{k mbar}` at a point.
#[derive(Clone, Debug)]
pub struct ConnectionCoeffs {
    n: usize,
    gamma: Vec<Complex64>,
}

impl ConnectionCoeffs {
    /// `Gamma^l_{ik}`
    pub fn get(&self, l: usize, i: usize, k: usize) -> Complex64 {
        self.gamma[(l * self.n + i) * self.n + k]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Torsion `T^l_{ij} = Gamma^l_{ij} - Gamma^l_{ji}` and its lowered form
/// `T_{ij kbar} = g_{l kbar} T^l_{ij}`.
#[derive(Clone, Debug)]
pub struct TorsionTensor {
    n: usize,
    upper: Vec<Complex64>,
    lowered: Vec<Complex64>,
}

impl TorsionTensor {
    /// `T^l_{ij}`
    pub fn get(&self, l: usize, i: usize, j: usize) -> Complex64 {
        self.upper[(l * self.n + i) * self.n + j]
    }

    /// `T_{ij kbar}`
    pub fn lowered(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.lowered[(i * self.n + j) * self.n + k]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max |T^l_{ij} + T^l_{ji}|`
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(l, i, j) + self.get(l, j, i)).norm());
                }
            }
        }
        worst
    }
}

/// Chern curvature `R_{i jbar k lbar}`.
#[derive(Clone, Debug)]
pub struct CurvatureTensor {
    n: usize,
    r: Vec<Complex64>,
}

impl CurvatureTensor {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.n;
        self.r[((i * n + j) * n + k) * n + l]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.r.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max |R_{i jbar k lbar} - conj(R_{j ibar l kbar})|`
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let d = self.get(i, j, k, l) - self.get(j, i, l, k).conj();
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }
}

fn metric_inverse(m: &MetricField, z: &[f64]) -> Result<(CMat, CMat)> {
    let g = m.value(z).into_matrix();
    let inv = g
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("metric"))?
        .inverse();
    Ok((g, inv))
}

pub fn chern_connection(m: &MetricField, z: &[f64]) -> Result<ConnectionCoeffs> {
    let n = m.n();
    let (_, ginv) = metric_inverse(m, z)?;
    let dg = m.holomorphic_derivatives(z);
    let mut gamma = vec![ZERO; n * n * n];
    for (i, dgi) in dg.iter().enumerate() {
        // (d_i G) G^{-1}: row k, column l is Gamma^l_{ik}
        let a = dgi * &ginv;
        for k in 0..n {
            for l in 0..n {
                gamma[(l * n + i) * n + k] = a[(k, l)];
            }
        }
    }
    Ok(ConnectionCoeffs { n, gamma })
}

pub fn torsion(m: &MetricField, z: &[f64]) -> Result<TorsionTensor> {
    let n = m.n();
    let gamma = chern_connection(m, z)?;
    let g = m.value(z).into_matrix();
    let mut upper = vec![ZERO; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                upper[(l * n + i) * n + j] = gamma.get(l, i, j) - gamma.get(l, j, i);
            }
        }
    }
    let mut lowered = vec![ZERO; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                lowered[(i * n + j) * n + k] = (0..n)
                    .map(|l| upper[(l * n + i) * n + j] * g[(l, k)])
                    .sum();
            }
        }
    }
    Ok(TorsionTensor { n, upper, lowered })
}

/// `R_{i jbar k lbar} = -d_i dbar_j g_{k lbar} + g^{p qbar} d_i g_{k qbar} dbar_j g_{p lbar}`.
pub fn curvature(m: &MetricField, z: &[f64]) -> Result<CurvatureTensor> {
    let n = m.n();
    let (_, ginv) = metric_inverse(m, z)?;
    let dg = m.holomorphic_derivatives(z);
    let dbg = m.antiholomorphic_derivatives(z);
    let ddg = m.mixed_derivatives(z);
    let mut r = vec![ZERO; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            let block = &dg[i] * &ginv * &dbg[j] - &ddg[i][j];
            for k in 0..n {
                for l in 0..n {
                    r[((i * n + j) * n + k) * n + l] = block[(k, l)];
                }
            }
        }
    }
    Ok(CurvatureTensor { n, r })
}

/// `max_{i,j,k} |v_{i jbar k} - v_{k jbar i} - T^l_{ik} v_{l jbar}|` with
/// `v_{i jbar k} = d_k v_{i jbar} - Gamma^l_{ki} v_{l jbar}`.
pub fn commutation_residual(m: &MetricField, v: &AnalyticFn, z: &[f64]) -> Result<f64> {
    let n = m.n();
    if v.min_dimension() > n {
        return Err(Error::Precondition(format!(
            "test function needs complex dimension >= {}",
            v.min_dimension()
        )));
    }
    let gamma = chern_connection(m, z)?;
    let t = torsion(m, z)?;
    let hess = v.complex_hessian(z).into_matrix();
    let third = v.complex_third(z);
    let covariant = |i: usize, j: usize, k: usize| -> Complex64 {
        let correction: Complex64 = (0..n).map(|l| gamma.get(l, k, i) * hess[(l, j)]).sum();
        third[k][i][j] - correction
    };
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let torsion_term: Complex64 = (0..n).map(|l| t.get(l, i, k) * hess[(l, j)]).sum();
                let d = covariant(i, j, k) - covariant(k, j, i) - torsion_term;
                worst = worst.max(d.norm());
            }
        }
    }
    Ok(worst)
}
