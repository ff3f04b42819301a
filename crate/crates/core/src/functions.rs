//! Closed-form real functions on `R^{2n}` used as manufactured solutions,
//! subsolutions and covariant-derivative test functions.
//!
//! Coordinates are ordered `(x_1, y_1, ..., x_n, y_n)`, so real axis `2k`
//! is `x_{k+1}` and `2k + 1` is `y_{k+1}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geom::wirtinger;
use crate::pointwise::HermitianMat;
use crate::Complex64;

pub const SUPPORTED: &str = "zero, quadratic, pluriharmonic-bump, sin-product, bilinear, cubic";

#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticFn {
    Zero,
    /// `c |z|^2`
    Quadratic { scale: f64 },
    /// `c |z|^2 + amp e^{x_1} cos(y_1)`; the bump is pluriharmonic.
    PluriharmonicBump { scale: f64, amp: f64 },
    /// `c |z|^2 + amp sin(x_1) sin(x_2)`
    SinProduct { scale: f64, amp: f64 },
    /// `x_1 x_2`
    Bilinear,
    /// `x_1^2 y_2 + x_2 y_1 y_2`
    Cubic,
}

impl AnalyticFn {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "function '{name}' takes {k} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParams(format!("function '{name}': non-finite parameter")));
        }
        match name {
            "zero" => want(0).map(|_| Self::Zero),
            "quadratic" => want(1).map(|_| Self::Quadratic { scale: params[0] }),
            "pluriharmonic-bump" => want(2).map(|_| Self::PluriharmonicBump {
                scale: params[0],
                amp: params[1],
            }),
            "sin-product" => want(2).map(|_| Self::SinProduct {
                scale: params[0],
                amp: params[1],
            }),
            "bilinear" => want(0).map(|_| Self::Bilinear),
            "cubic" => want(0).map(|_| Self::Cubic),
            _ => Err(Error::UnknownName {
                kind: "function",
                name: name.to_string(),
                supported: SUPPORTED,
            }),
        }
    }

    /// Smallest complex dimension the function needs.
    pub fn min_dimension(&self) -> usize {
        match self {
            Self::SinProduct { .. } | Self::Bilinear | Self::Cubic => 2,
            _ => 1,
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { scale } => scale * norm_sq(z),
            Self::PluriharmonicBump { scale, amp } => {
                scale * norm_sq(z) + amp * z[0].exp() * z[1].cos()
            }
            Self::SinProduct { scale, amp } => scale * norm_sq(z) + amp * z[0].sin() * z[2].sin(),
            Self::Bilinear => z[0] * z[2],
            Self::Cubic => z[0] * z[0] * z[3] + z[2] * z[1] * z[3],
        }
    }

    pub fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let d = z.len();
        let mut g = DVector::zeros(d);
        match *self {
            Self::Zero => {}
            Self::Quadratic { scale } => {
                for a in 0..d {
                    g[a] = 2.0 * scale * z[a];
                }
            }
            Self::PluriharmonicBump { scale, amp } => {
                for a in 0..d {
                    g[a] = 2.0 * scale * z[a];
                }
                let e = z[0].exp();
                g[0] += amp * e * z[1].cos();
                g[1] -= amp * e * z[1].sin();
            }
            Self::SinProduct { scale, amp } => {
                for a in 0..d {
                    g[a] = 2.0 * scale * z[a];
                }
                g[0] += amp * z[0].cos() * z[2].sin();
                g[2] += amp * z[0].sin() * z[2].cos();
            }
            Self::Bilinear => {
                g[0] = z[2];
                g[2] = z[0];
            }
            Self::Cubic => {
                g[0] = 2.0 * z[0] * z[3];
                g[1] = z[2] * z[3];
                g[2] = z[1] * z[3];
                g[3] = z[0] * z[0] + z[2] * z[1];
            }
        }
        g
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let d = z.len();
        let mut h = DMatrix::zeros(d, d);
        match *self {
            Self::Zero => {}
            Self::Quadratic { scale } => h.fill_diagonal(2.0 * scale),
            Self::PluriharmonicBump { scale, amp } => {
                h.fill_diagonal(2.0 * scale);
                let e = z[0].exp();
                let (s, c) = z[1].sin_cos();
                h[(0, 0)] += amp * e * c;
                h[(1, 1)] -= amp * e * c;
                h[(0, 1)] -= amp * e * s;
                h[(1, 0)] -= amp * e * s;
            }
            Self::SinProduct { scale, amp } => {
                h.fill_diagonal(2.0 * scale);
                let (s0, c0) = z[0].sin_cos();
                let (s2, c2) = z[2].sin_cos();
                h[(0, 0)] -= amp * s0 * s2;
                h[(2, 2)] -= amp * s0 * s2;
                h[(0, 2)] += amp * c0 * c2;
                h[(2, 0)] += amp * c0 * c2;
            }
            Self::Bilinear => {
                h[(0, 2)] = 1.0;
                h[(2, 0)] = 1.0;
            }
            Self::Cubic => {
                // x1^2 y2 + x2 y1 y2
                let set = |h: &mut DMatrix<f64>, a: usize, b: usize, v: f64| {
                    h[(a, b)] = v;
                    h[(b, a)] = v;
                };
                set(&mut h, 0, 0, 2.0 * z[3]);
                set(&mut h, 0, 3, 2.0 * z[0]);
                set(&mut h, 1, 2, z[3]);
                set(&mut h, 1, 3, z[2]);
                set(&mut h, 2, 3, z[1]);
            }
        }
        h
    }

    /// Third partial derivative along real axes `a, b, c`.
    pub fn third(&self, z: &[f64], a: usize, b: usize, c: usize) -> f64 {
        let mut idx = [a, b, c];
        idx.sort_unstable();
        match *self {
            Self::Zero | Self::Quadratic { .. } | Self::Bilinear => 0.0,
            Self::PluriharmonicBump { amp, .. } => {
                if idx.iter().any(|&i| i > 1) {
                    return 0.0;
                }
                // d^p/dx^p d^q/dy^q of e^x cos y, with q = number of y's
                let q = idx.iter().filter(|&&i| i == 1).count();
                let e = z[0].exp();
                let (s, c) = z[1].sin_cos();
                let trig = match q % 4 {
                    0 => c,
                    1 => -s,
                    2 => -c,
                    _ => s,
                };
                amp * e * trig
            }
            Self::SinProduct { amp, .. } => {
                if idx.iter().any(|&i| i != 0 && i != 2) {
                    return 0.0;
                }
                let p = idx.iter().filter(|&&i| i == 0).count();
                let q = 3 - p;
                amp * sin_derivative(z[0], p) * sin_derivative(z[2], q)
            }
            Self::Cubic => match idx {
                [0, 0, 3] => 2.0,
                [1, 2, 3] => 1.0,
                _ => 0.0,
            },
        }
    }

    /// Complex Hessian `v_{i jbar} = d_i dbar_j v` at `z`.
    pub fn complex_hessian(&self, z: &[f64]) -> HermitianMat {
        complex_hessian_from_real(&self.hessian(z))
    }

    /// `d_k d_i dbar_j v` for all `(i, j, k)`, indexed `[k][i][j]`.
    pub fn complex_third(&self, z: &[f64]) -> Vec<Vec<Vec<Complex64>>> {
        let n = z.len() / 2;
        let mut out = vec![vec![vec![Complex64::new(0.0, 0.0); n]; n]; n];
        for (k, slab) in out.iter_mut().enumerate() {
            for (i, row) in slab.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (a, ca) in wirtinger::holomorphic(k) {
                        for (b, cb) in wirtinger::holomorphic(i) {
                            for (c, cc) in wirtinger::antiholomorphic(j) {
                                acc += ca * cb * cc * self.third(z, a, b, c);
                            }
                        }
                    }
                    *entry = acc;
                }
            }
        }
        out
    }
}

fn norm_sq(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

fn sin_derivative(x: f64, order: usize) -> f64 {
    let (s, c) = x.sin_cos();
    match order % 4 {
        0 => s,
        1 => c,
        2 => -s,
        _ => -c,
    }
}

/// Assemble `u_{i jbar} = 1/4 [u_{x_i x_j} + u_{y_i y_j} + i (u_{x_i y_j} - u_{y_i x_j})]`
/// from a real `2n x 2n` Hessian.
pub fn complex_hessian_from_real(h: &DMatrix<f64>) -> HermitianMat {
    let n = h.nrows() / 2;
    let m = crate::CMat::from_fn(n, n, |i, j| {
        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        0.25 * Complex64::new(h[(xi, xj)] + h[(yi, yj)], h[(xi, yj)] - h[(yi, xj)])
    });
    HermitianMat::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAMILY: [AnalyticFn; 5] = [
        AnalyticFn::Quadratic { scale: 0.7 },
        AnalyticFn::PluriharmonicBump { scale: 1.0, amp: 0.3 },
        AnalyticFn::SinProduct { scale: 1.0, amp: 0.2 },
        AnalyticFn::Bilinear,
        AnalyticFn::Cubic,
    ];

    fn point() -> Vec<f64> {
        vec![0.3, -0.2, 0.45, 0.1]
    }

    #[test]
    fn derivatives_match_central_differences() {
        let z = point();
        let h = 1e-4;
        for f in FAMILY {
            let g = f.gradient(&z);
            let hess = f.hessian(&z);
            for a in 0..4 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[a] += h;
                zm[a] -= h;
                let fd = (f.value(&zp) - f.value(&zm)) / (2.0 * h);
                assert!((fd - g[a]).abs() < 1e-7, "{f:?} grad {a}");
                let gp = f.gradient(&zp);
                let gm = f.gradient(&zm);
                let hp = f.hessian(&zp);
                let hm = f.hessian(&zm);
                for b in 0..4 {
                    let fd2 = (gp[b] - gm[b]) / (2.0 * h);
                    assert!((fd2 - hess[(a, b)]).abs() < 1e-7, "{f:?} hess {a}{b}");
                    for c in 0..4 {
                        let fd3 = (hp[(b, c)] - hm[(b, c)]) / (2.0 * h);
                        assert!((fd3 - f.third(&z, a, b, c)).abs() < 1e-7, "{f:?} third {a}{b}{c}");
                    }
                }
            }
        }
    }

    #[test]
    fn complex_hessian_conventions() {
        // |z|^2 has identity complex Hessian
        let h = AnalyticFn::Quadratic { scale: 1.0 }.complex_hessian(&point());
        assert!((h.as_matrix() - crate::CMat::identity(2, 2)).norm() < 1e-15);
        // x_1 y_2 -> u_{1 2bar} = i/4
        let mut real = DMatrix::zeros(4, 4);
        real[(0, 3)] = 1.0;
        real[(3, 0)] = 1.0;
        let h = complex_hessian_from_real(&real);
        assert_eq!(h.as_matrix()[(0, 1)], Complex64::new(0.0, 0.25));
        assert_eq!(h.as_matrix()[(1, 0)], Complex64::new(0.0, -0.25));
        // the bump is pluriharmonic
        let f = AnalyticFn::PluriharmonicBump { scale: 0.0, amp: 1.0 };
        assert!(f.complex_hessian(&point()).as_matrix().norm() < 1e-15);
    }

    #[test]
    fn unknown_function_is_rejected() {
        assert!(matches!(
            AnalyticFn::from_name("gaussian", &[]),
            Err(Error::UnknownName { .. })
        ));
        assert!(AnalyticFn::from_name("quadratic", &[]).is_err());
    }
}
