use serde::{Deserialize, Serialize};

use super::wirtinger;
use crate::error::{Error, Result};
use crate::pointwise::HermitianMat;
use crate::{CMat, Complex64};

pub const SUPPORTED_METRICS: &str = "euclidean, conformal-exp, diag-anisotropic";
pub const SUPPORTED_CHI: &str = "zero, omega, identity, scaled-identity, scaled-omega";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MetricFamily {
    Euclidean,
    /// `g = e^{a x_1} I`; non-Kahler for `a != 0`.
    ConformalExp { a: f64 },
    /// `g_{k kbar} = 1 + a_k sin(b x_k)`, positive for `|a_k| < 1`.
    DiagAnisotropic { b: f64, amps: Vec<f64> },
}

/// A Hermitian metric given by a closed-form recipe on a chart, with exact
/// first and second coordinate derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    family: MetricFamily,
    n: usize,
}

impl MetricField {
    pub fn builtin(name: &str, params: &[f64], n: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidParams(format!(
                "metric dimension must be 2 or 3, got {n}"
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParams(format!("metric '{name}': non-finite parameter")));
        }
        let family = match name {
            "euclidean" => {
                if !params.is_empty() {
                    return Err(Error::InvalidParams("euclidean takes no parameters".into()));
                }
                MetricFamily::Euclidean
            }
            "conformal-exp" => {
                if params.len() != 1 {
                    return Err(Error::InvalidParams(
                        "conformal-exp takes one parameter [a]".into(),
                    ));
                }
                MetricFamily::ConformalExp { a: params[0] }
            }
            "diag-anisotropic" => {
                if params.len() != n + 1 {
                    return Err(Error::InvalidParams(format!(
                        "diag-anisotropic takes [b, a_1..a_{n}] ({} values), got {}",
                        n + 1,
                        params.len()
                    )));
                }
                let amps = params[1..].to_vec();
                if let Some(bad) = amps.iter().find(|a| a.abs() >= 1.0) {
                    return Err(Error::InvalidParams(format!(
                        "diag-anisotropic amplitude {bad} violates |a_k| < 1 (metric would not be positive definite)"
                    )));
                }
                MetricFamily::DiagAnisotropic { b: params[0], amps }
            }
            _ => {
                return Err(Error::UnknownName {
                    kind: "metric",
                    name: name.to_string(),
                    supported: SUPPORTED_METRICS,
                })
            }
        };
        Ok(Self { family, n })
    }

    pub fn euclidean(n: usize) -> Self {
        Self { family: MetricFamily::Euclidean, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            MetricFamily::Euclidean => "euclidean",
            MetricFamily::ConformalExp { .. } => "conformal-exp",
            MetricFamily::DiagAnisotropic { .. } => "diag-anisotropic",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.family {
            MetricFamily::Euclidean => vec![],
            MetricFamily::ConformalExp { a } => vec![*a],
            MetricFamily::DiagAnisotropic { b, amps } => {
                std::iter::once(*b).chain(amps.iter().copied()).collect()
            }
        }
    }

    pub fn is_kahler(&self) -> bool {
        match self.family {
            MetricFamily::ConformalExp { a } => a == 0.0,
            _ => true,
        }
    }

    // Every built-in family is diagonal; entry k with its real gradient and Hessian.
    fn diag_entry(&self, k: usize, z: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let d = 2 * self.n;
        let mut grad = vec![0.0; d];
        let mut hess = vec![vec![0.0; d]; d];
        let value = match &self.family {
            MetricFamily::Euclidean => 1.0,
            MetricFamily::ConformalExp { a } => {
                let e = (a * z[0]).exp();
                grad[0] = a * e;
                hess[0][0] = a * a * e;
                e
            }
            MetricFamily::DiagAnisotropic { b, amps } => {
                let x = z[2 * k];
                let (s, c) = (b * x).sin_cos();
                grad[2 * k] = amps[k] * b * c;
                hess[2 * k][2 * k] = -amps[k] * b * b * s;
                1.0 + amps[k] * s
            }
        };
        (value, grad, hess)
    }

    fn check_point(&self, z: &[f64]) {
        assert_eq!(z.len(), 2 * self.n, "point has wrong real dimension");
    }

    /// `g_{i jbar}(z)`.
    pub fn value(&self, z: &[f64]) -> HermitianMat {
        self.check_point(z);
        let diag: Vec<f64> = (0..self.n).map(|k| self.diag_entry(k, z).0).collect();
        HermitianMat::from_real_diagonal(&diag)
    }

    /// Real-axis derivatives `dG/dt_a`, `a = 0..2n`.
    pub fn real_gradient(&self, z: &[f64]) -> Vec<CMat> {
        self.check_point(z);
        let entries: Vec<_> = (0..self.n).map(|k| self.diag_entry(k, z)).collect();
        (0..2 * self.n)
            .map(|a| {
                CMat::from_fn(self.n, self.n, |i, j| {
                    if i == j {
                        Complex64::new(entries[i].1[a], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect()
    }

    /// Real-axis second derivatives `d^2 G / dt_a dt_b`, indexed `[a][b]`.
    pub fn real_hessian(&self, z: &[f64]) -> Vec<Vec<CMat>> {
        self.check_point(z);
        let entries: Vec<_> = (0..self.n).map(|k| self.diag_entry(k, z)).collect();
        (0..2 * self.n)
            .map(|a| {
                (0..2 * self.n)
                    .map(|b| {
                        CMat::from_fn(self.n, self.n, |i, j| {
                            if i == j {
                                Complex64::new(entries[i].2[a][b], 0.0)
                            } else {
                                Complex64::new(0.0, 0.0)
                            }
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// `d_k G` for `k = 0..n`.
    pub fn holomorphic_derivatives(&self, z: &[f64]) -> Vec<CMat> {
        let real = self.real_gradient(z);
        (0..self.n)
            .map(|k| wirtinger::combine(wirtinger::holomorphic(k), &real))
            .collect()
    }

    /// `dbar_k G` for `k = 0..n`.
    pub fn antiholomorphic_derivatives(&self, z: &[f64]) -> Vec<CMat> {
        let real = self.real_gradient(z);
        (0..self.n)
            .map(|k| wirtinger::combine(wirtinger::antiholomorphic(k), &real))
            .collect()
    }

    /// `d_i dbar_j G`, indexed `[i][j]`.
    pub fn mixed_derivatives(&self, z: &[f64]) -> Vec<Vec<CMat>> {
        let hess = self.real_hessian(z);
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let mut acc = CMat::zeros(self.n, self.n);
                        for (a, ca) in wirtinger::holomorphic(i) {
                            for (b, cb) in wirtinger::antiholomorphic(j) {
                                acc += hess[a][b].map(|v| v * ca * cb);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

/// The background real (1,1)-form `chi`, sampled pointwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChiForm {
    Zero,
    /// `chi = omega`
    Omega,
    /// Euclidean `chi = I`, independent of the metric.
    Identity,
    ScaledIdentity(f64),
    ScaledOmega(f64),
}

impl ChiForm {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let scalar = |name: &str| -> Result<f64> {
            match params {
                [c] if c.is_finite() => Ok(*c),
                _ => Err(Error::InvalidParams(format!("chi '{name}' takes one finite parameter"))),
            }
        };
        let none = |form: ChiForm| -> Result<ChiForm> {
            if params.is_empty() {
                Ok(form)
            } else {
                Err(Error::InvalidParams(format!("chi '{name}' takes no parameters")))
            }
        };
        match name {
            "zero" => none(Self::Zero),
            "omega" => none(Self::Omega),
            "identity" => none(Self::Identity),
            "scaled-identity" => scalar(name).map(Self::ScaledIdentity),
            "scaled-omega" => scalar(name).map(Self::ScaledOmega),
            _ => Err(Error::UnknownName {
                kind: "chi form",
                name: name.to_string(),
                supported: SUPPORTED_CHI,
            }),
        }
    }

    pub fn value(&self, metric: &MetricField, z: &[f64]) -> HermitianMat {
        let n = metric.n();
        match *self {
            Self::Zero => HermitianMat::zeros(n),
            Self::Omega => metric.value(z),
            Self::Identity => HermitianMat::identity(n),
            Self::ScaledIdentity(c) => HermitianMat::identity(n).scale(c),
            Self::ScaledOmega(c) => metric.value(z).scale(c),
        }
    }
}
