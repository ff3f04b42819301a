//! Box discretization: grid specification, sampled scalar fields, the
//! second-order complex Hessian stencil and first-difference norms.
//!
//! Nodes are stored row-major over the real axes `(x1, y1, ..., xn, yn)`,
//! so the last axis (`yn`) varies fastest.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{complex_hessian_from_real, AnalyticFn};
use crate::geom::{ChiForm, MetricField};
use crate::pointwise::{HermitianMat, MetricFrame};
use crate::CMat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    m: usize,
}

impl GridSpec {
    pub fn new(n: usize, lo: Vec<f64>, hi: Vec<f64>, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("complex dimension must be at least 1".into()));
        }
        for (what, v) in [("lo", &lo), ("hi", &hi)] {
            if v.len() != 2 * n {
                return Err(Error::InvalidParams(format!("{what} must have {} entries, got {}", 2 * n, v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!("{what} must be finite")));
            }
        }
        if let Some(a) = (0..2 * n).find(|&a| !(hi[a] > lo[a])) {
            return Err(Error::InvalidParams(format!("box axis {a} is empty: lo {} >= hi {}", lo[a], hi[a])));
        }
        if m < 5 || m.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("points per axis must be odd and at least 5, got {m}")));
        }
        let total = (m as u128).checked_pow(2 * n as u32);
        if total.is_none_or(|t| t > usize::MAX as u128 / 16) {
            return Err(Error::InvalidParams(format!("grid with {m}^{} nodes is too large", 2 * n)));
        }
        Ok(Self { n, lo, hi, m })
    }

    /// The cube `[lo, hi]^{2n}`.
    pub fn cube(n: usize, lo: f64, hi: f64, m: usize) -> Result<Self> {
        Self::new(n, vec![lo; 2 * n], vec![hi; 2 * n], m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real axes, `2n`.
    pub fn dims(&self) -> usize {
        2 * self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.m - 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dims()).map(|a| self.spacing(a)).collect()
    }

    /// Largest spacing over all axes.
    pub fn h_max(&self) -> f64 {
        self.spacings().into_iter().fold(0.0, f64::max)
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dims();
        (0..d).map(|a| self.m.pow((d - 1 - a) as u32)).collect()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        let mut rest = flat;
        for a in (0..self.dims()).rev() {
            idx[a] = rest % self.m;
            rest /= self.m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.m - 1 {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    pub fn is_interior_index(&self, idx: &[usize]) -> bool {
        idx.iter().all(|&i| i >= 1 && i + 1 < self.m)
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        let mut rest = flat;
        for _ in 0..self.dims() {
            let i = rest % self.m;
            if i == 0 || i + 1 == self.m {
                return false;
            }
            rest /= self.m;
        }
        true
    }

    /// Flat indices of interior nodes in increasing order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.is_interior(p)).collect()
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| !self.is_interior(p)).collect()
    }

    pub fn interior_len(&self) -> usize {
        (self.m - 2).pow(self.dims() as u32)
    }

    pub fn center(&self) -> usize {
        self.flat_index(&vec![self.m / 2; self.dims()])
    }

    pub fn indices(&self, region: Region) -> Vec<usize> {
        match region {
            Region::All => (0..self.len()).collect(),
            Region::Interior => self.interior_indices(),
            Region::Boundary => self.boundary_indices(),
        }
    }

    /// Distance from a point to the box boundary (minimum over faces).
    pub fn face_distance(&self, z: &[f64]) -> f64 {
        (0..self.dims())
            .map(|a| (z[a] - self.lo[a]).min(self.hi[a] - z[a]))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    All,
    Interior,
    Boundary,
}

/// Real samples on every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch { expected: spec.len(), got: values.len() });
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("field value at node {p} is not finite")));
        }
        Ok(Self { spec, values })
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        let len = spec.len();
        Self { spec, values: vec![c; len] }
    }

    /// Samples `f` at every node.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let values: Vec<f64> = (0..spec.len()).into_par_iter().map(|p| f(&spec.coords(p))).collect();
        Self::new(spec, values)
    }

    pub fn sample(spec: GridSpec, f: &AnalyticFn) -> Result<Self> {
        Self::from_fn(spec, |z| f.value(z))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn set(&mut self, flat: usize, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("field value at node {flat} is not finite")));
        }
        self.values[flat] = v;
        Ok(())
    }

    /// `self + s * other`, checked for matching grids.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        ScalarField::new(self.spec.clone(), values)
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch(format!(
                "n={} m={} vs n={} m={} (or different box)",
                self.spec.n, self.spec.m, other.spec.n, other.spec.m
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// One neighbor of the complex Hessian stencil: `Hess u(p) = sum coeff * u(p + offset)`.
#[derive(Clone, Debug)]
pub struct StencilEntry {
    pub offset: Vec<isize>,
    pub flat_offset: isize,
    pub coeff: HermitianMat,
}

/// Second-order central stencil for the complex Hessian on a uniform grid:
/// pure second differences `(f+ - 2 f0 + f-)/h^2` and the four-point cross
/// `(f++ - f+- - f-+ + f--)/(4 h_a h_b)`, combined as
/// `u_{i jbar} = 1/4 [u_{x_i x_j} + u_{y_i y_j} + i (u_{x_i y_j} - u_{y_i x_j})]`.
#[derive(Clone, Debug)]
pub struct HessianStencil {
    n: usize,
    entries: Vec<StencilEntry>,
}

impl HessianStencil {
    pub fn new(spec: &GridSpec) -> Self {
        let d = spec.dims();
        let h = spec.spacings();
        let strides = spec.strides();
        let mut real: Vec<(Vec<isize>, DMatrix<f64>)> = Vec::new();
        let mut add = |offset: Vec<isize>, a: usize, b: usize, w: f64| {
            let slot = match real.iter().position(|(o, _)| *o == offset) {
                Some(k) => k,
                None => {
                    real.push((offset, DMatrix::zeros(d, d)));
                    real.len() - 1
                }
            };
            let r = &mut real[slot].1;
            r[(a, b)] += w;
            if a != b {
                r[(b, a)] += w;
            }
        };
        for a in 0..d {
            let w = 1.0 / (h[a] * h[a]);
            let unit = |s: isize| {
                let mut o = vec![0isize; d];
                o[a] = s;
                o
            };
            add(vec![0; d], a, a, -2.0 * w);
            add(unit(1), a, a, w);
            add(unit(-1), a, a, w);
        }
        for a in 0..d {
            for b in a + 1..d {
                let w = 1.0 / (4.0 * h[a] * h[b]);
                for (sa, sb, sign) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                    let mut o = vec![0isize; d];
                    o[a] = sa;
                    o[b] = sb;
                    add(o, a, b, sign * w);
                }
            }
        }
        let entries = real
            .into_iter()
            .filter_map(|(offset, r)| {
                let coeff = complex_hessian_from_real(&r);
                if coeff.as_matrix().iter().all(|c| c.norm() == 0.0) {
                    return None;
                }
                let flat_offset = offset.iter().zip(&strides).map(|(&o, &s)| o * s as isize).sum();
                Some(StencilEntry { offset, flat_offset, coeff })
            })
            .collect();
        Self { n: spec.n(), entries }
    }

    pub fn entries(&self) -> &[StencilEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Applies the stencil at an interior node (no bounds checks).
    pub fn apply(&self, values: &[f64], flat: usize) -> HermitianMat {
        let mut acc = CMat::zeros(self.n, self.n);
        for e in &self.entries {
            let v = values[(flat as isize + e.flat_offset) as usize];
            acc.zip_apply(e.coeff.as_matrix(), |s, c| *s += c * v);
        }
        HermitianMat::new(acc)
    }
}

/// Complex Hessian of a field at an interior node.
pub fn complex_hessian(f: &ScalarField, idx: &[usize]) -> Result<HermitianMat> {
    let spec = f.spec();
    if idx.len() != spec.dims() || idx.iter().any(|&i| i >= spec.m()) {
        return Err(Error::InvalidParams(format!("multi-index {idx:?} is outside the grid")));
    }
    if !spec.is_interior_index(idx) {
        return Err(Error::BoundaryIndex { node: spec.flat_index(idx) });
    }
    Ok(HessianStencil::new(spec).apply(f.values(), spec.flat_index(idx)))
}

/// Complex Hessians at all interior nodes, in [`GridSpec::interior_indices`] order.
pub fn complex_hessian_field(f: &ScalarField, stencil: &HessianStencil) -> Vec<HermitianMat> {
    let interior = f.spec().interior_indices();
    interior.par_iter().map(|&p| stencil.apply(f.values(), p)).collect()
}

/// First-difference gradient at a node: central where both neighbors exist,
/// one-sided second order at the two ends of each axis.
pub fn gradient_at(f: &ScalarField, flat: usize) -> Vec<f64> {
    let spec = f.spec();
    let idx = spec.multi_index(flat);
    let strides = spec.strides();
    let v = f.values();
    (0..spec.dims())
        .map(|a| {
            let h = spec.spacing(a);
            let s = strides[a];
            let i = idx[a];
            if i == 0 {
                (-3.0 * v[flat] + 4.0 * v[flat + s] - v[flat + 2 * s]) / (2.0 * h)
            } else if i + 1 == spec.m() {
                (3.0 * v[flat] - 4.0 * v[flat - s] + v[flat - 2 * s]) / (2.0 * h)
            } else {
                (v[flat + s] - v[flat - s]) / (2.0 * h)
            }
        })
        .collect()
}

/// Maximum over a region of the Euclidean norm of the difference gradient.
pub fn gradient_sup(f: &ScalarField, region: Region) -> f64 {
    f.spec()
        .indices(region)
        .par_iter()
        .map(|&p| gradient_at(f, p).iter().map(|g| g * g).sum::<f64>().sqrt())
        .reduce(|| 0.0, f64::max)
}

/// How [`w_field`] fills boundary nodes, where no Hessian is available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryFill {
    /// Copy the value of the nearest interior node (indices clamped to `[1, m-2]`).
    NearestInterior,
    Constant(f64),
}

/// `W = tr_g(chi + Hess u)` at interior nodes.
pub fn w_field(f: &ScalarField, metric: &MetricField, chi: &ChiForm, fill: BoundaryFill) -> Result<ScalarField> {
    let spec = f.spec();
    if metric.n() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: metric.n() });
    }
    let stencil = HessianStencil::new(spec);
    let interior = spec.interior_indices();
    let w: Vec<f64> = interior
        .par_iter()
        .map(|&p| {
            let z = spec.coords(p);
            let g = metric.value(&z);
            let frame = MetricFrame::new(&g).ok_or(Error::NotPositiveDefinite("metric"))?;
            let gt = chi.value(metric, &z).add(&stencil.apply(f.values(), p));
            Ok(frame.inverse().contract(&gt))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; spec.len()];
    for (&p, &wp) in interior.iter().zip(&w) {
        values[p] = wp;
    }
    for p in spec.boundary_indices() {
        values[p] = match fill {
            BoundaryFill::Constant(c) => c,
            BoundaryFill::NearestInterior => {
                let idx: Vec<usize> = spec.multi_index(p).iter().map(|&i| i.clamp(1, spec.m() - 2)).collect();
                values[spec.flat_index(&idx)]
            }
        };
    }
    ScalarField::new(spec.clone(), values)
}

/// Overwrites boundary nodes with `phi`; interior nodes are untouched.
pub fn apply_dirichlet(f: &ScalarField, phi: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
    let spec = f.spec();
    let mut values = f.values().to_vec();
    for p in spec.boundary_indices() {
        values[p] = phi(&spec.coords(p));
    }
    ScalarField::new(spec.clone(), values)
}

/// Overwrites boundary nodes with the boundary samples of `src`.
pub fn copy_boundary(f: &ScalarField, src: &ScalarField) -> Result<ScalarField> {
    f.check_same_grid(src)?;
    let mut values = f.values().to_vec();
    for p in f.spec().boundary_indices() {
        values[p] = src.values()[p];
    }
    ScalarField::new(f.spec().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointwise::assemble_gtilde;
    use num_complex::Complex64;

    fn unit(n: usize, m: usize) -> GridSpec {
        GridSpec::cube(n, 0.0, 1.0, m).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::cube(2, 0.0, 1.0, 4).is_err());
        assert!(GridSpec::cube(2, 0.0, 1.0, 3).is_err());
        assert!(GridSpec::cube(2, 1.0, 1.0, 5).is_err());
        assert!(GridSpec::new(2, vec![0.0; 3], vec![1.0; 4], 5).is_err());
        let s = unit(2, 5);
        assert_eq!(s.len(), 625);
        assert_eq!(s.interior_len(), 81);
        assert_eq!(s.interior_indices().len(), 81);
        assert_eq!(s.coords(s.center()), vec![0.5; 4]);
    }

    #[test]
    fn indexing_round_trip_and_row_major() {
        let s = GridSpec::new(2, vec![0.0, -1.0, 2.0, 0.0], vec![1.0, 1.0, 3.0, 4.0], 7).unwrap();
        for p in [0, 1, 7, 342, s.len() - 1] {
            assert_eq!(s.flat_index(&s.multi_index(p)), p);
        }
        assert_eq!(s.multi_index(1), vec![0, 0, 0, 1]);
        assert_eq!(s.coords(s.len() - 1), vec![1.0, 1.0, 3.0, 4.0]);
        assert_eq!(s.coords(0), vec![0.0, -1.0, 2.0, 0.0]);
    }

    #[test]
    fn stencil_size() {
        for (n, expect) in [(1, 5), (2, 25), (3, 61)] {
            let s = GridSpec::cube(n, 0.0, 1.0, 5).unwrap();
            assert_eq!(HessianStencil::new(&s).len(), expect);
            assert_eq!(expect, 8 * n * n - 4 * n + 1);
        }
    }

    #[test]
    fn hessian_examples() {
        let s = unit(2, 9);
        let idx = [3, 4, 5, 2];
        let x1sq = ScalarField::from_fn(s.clone(), |z| z[0] * z[0]).unwrap();
        let h = complex_hessian(&x1sq, &idx).unwrap();
        assert!((h.as_matrix()[(0, 0)].re - 0.5).abs() < 1e-12);

        let q = ScalarField::sample(s.clone(), &AnalyticFn::Quadratic { scale: 1.0 }).unwrap();
        let h = complex_hessian(&q, &idx).unwrap();
        assert!(h.max_abs_diff(&HermitianMat::identity(2)) < 1e-12);

        let x1y2 = ScalarField::from_fn(s.clone(), |z| z[0] * z[3]).unwrap();
        let h = complex_hessian(&x1y2, &idx).unwrap();
        assert!((h.as_matrix()[(0, 1)] - Complex64::new(0.0, 0.25)).norm() < 1e-12);
        assert!((h.as_matrix()[(1, 0)] - Complex64::new(0.0, -0.25)).norm() < 1e-12);
    }

    #[test]
    fn hessian_rejects_boundary() {
        let s = unit(2, 5);
        let f = ScalarField::constant(s, 1.0);
        assert!(matches!(complex_hessian(&f, &[0, 2, 2, 2]), Err(Error::BoundaryIndex { .. })));
        assert!(matches!(complex_hessian(&f, &[2, 2, 2, 4]), Err(Error::BoundaryIndex { .. })));
        assert!(complex_hessian(&f, &[2, 2, 2, 5]).is_err());
    }

    #[test]
    fn exact_on_random_quadratics() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            let s = GridSpec::new(n, vec![-0.5; 2 * n], (0..2 * n).map(|a| 0.5 + 0.1 * a as f64).collect(), 5).unwrap();
            let d = 2 * n;
            let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let a = (&a + a.transpose()) * 0.5;
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = ScalarField::from_fn(s.clone(), |z| {
                let zv = nalgebra::DVector::from_column_slice(z);
                0.5 * zv.dot(&(&a * &zv)) + b.iter().zip(z).map(|(b, z)| b * z).sum::<f64>() + 0.3
            })
            .unwrap();
            let expect = complex_hessian_from_real(&a);
            let st = HessianStencil::new(&s);
            for h in complex_hessian_field(&f, &st) {
                assert!(h.max_abs_diff(&expect) < 1e-12);
                let m = h.as_matrix();
                assert_eq!(m, &m.adjoint());
            }
        }
    }

    #[test]
    fn second_order_convergence() {
        let funcs = [
            AnalyticFn::PluriharmonicBump { scale: 1.0, amp: 0.5 },
            AnalyticFn::SinProduct { scale: 0.5, amp: 1.0 },
            AnalyticFn::Cubic,
        ];
        for f in funcs {
            let err = |m: usize| -> f64 {
                let s = unit(2, m);
                let field = ScalarField::sample(s.clone(), &f).unwrap();
                // nodes shared by the m=9 and m=17 grids
                let coarse = unit(2, 9);
                let ratio = (m - 1) / 8;
                coarse
                    .interior_indices()
                    .into_iter()
                    .map(|pc| {
                        let idx: Vec<usize> = coarse.multi_index(pc).iter().map(|i| i * ratio).collect();
                        let z = s.coords(s.flat_index(&idx));
                        complex_hessian(&field, &idx).unwrap().max_abs_diff(&f.complex_hessian(&z))
                    })
                    .fold(0.0, f64::max)
            };
            let (e9, e17) = (err(9), err(17));
            if e9 < 1e-12 {
                continue;
            }
            let r = e9 / e17;
            assert!((3.5..=4.5).contains(&r), "{f:?}: ratio {r}");
        }
    }

    #[test]
    fn gradient_examples() {
        let s = unit(2, 9);
        assert_eq!(gradient_sup(&ScalarField::constant(s.clone(), 3.0), Region::All), 0.0);
        let x1 = ScalarField::from_fn(s.clone(), |z| z[0]).unwrap();
        for p in [0, 17, s.len() - 1] {
            assert!((gradient_at(&x1, p)[0] - 1.0).abs() < 1e-12);
        }
        assert!((gradient_sup(&x1, Region::All) - 1.0).abs() < 1e-12);
        let x1sq = ScalarField::from_fn(s.clone(), |z| z[0] * z[0]).unwrap();
        assert!((gradient_sup(&x1sq, Region::Boundary) - 2.0).abs() < 1e-12);
        let interior = gradient_sup(&x1sq, Region::Interior);
        assert!(interior < 2.0);
        assert!((interior - 2.0 * (1.0 - s.spacing(0))).abs() < 1e-12);
    }

    #[test]
    fn w_field_examples() {
        let s = unit(2, 7);
        let zero = ScalarField::constant(s.clone(), 0.0);
        let e = MetricField::euclidean(2);
        let w = w_field(&zero, &e, &ChiForm::Identity, BoundaryFill::NearestInterior).unwrap();
        assert!(w.values().iter().all(|&v| (v - 2.0).abs() < 1e-14));
        let q = ScalarField::sample(s.clone(), &AnalyticFn::Quadratic { scale: 1.0 }).unwrap();
        let w = w_field(&q, &e, &ChiForm::Zero, BoundaryFill::Constant(0.0)).unwrap();
        for p in s.interior_indices() {
            assert!((w.get(p) - 2.0).abs() < 1e-12);
        }
        assert_eq!(w.get(0), 0.0);
        // chi = I/2 with g = I gives W = n/2 everywhere, boundary included
        let w = w_field(&zero, &e, &ChiForm::ScaledIdentity(0.5), BoundaryFill::NearestInterior).unwrap();
        assert!(w.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn w_field_matches_trace_of_gtilde() {
        let s = GridSpec::cube(2, -0.4, 0.6, 7).unwrap();
        let metric = MetricField::builtin("conformal-exp", &[0.7], 2).unwrap();
        let chi = ChiForm::Omega;
        let u = ScalarField::sample(s.clone(), &AnalyticFn::SinProduct { scale: 1.0, amp: 0.3 }).unwrap();
        let w = w_field(&u, &metric, &chi, BoundaryFill::NearestInterior).unwrap();
        for p in s.interior_indices() {
            let z = s.coords(p);
            let hess = complex_hessian(&u, &s.multi_index(p)).unwrap();
            let gt = assemble_gtilde(&chi.value(&metric, &z), &hess).unwrap();
            let direct = (metric.value(&z).inverse().unwrap().as_matrix() * gt.as_matrix()).trace().re;
            assert!((w.get(p) - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
        let corner = s.flat_index(&[0, 0, 0, 0]);
        assert_eq!(w.get(corner), w.get(s.flat_index(&[1, 1, 1, 1])));
    }

    #[test]
    fn dirichlet() {
        let s = unit(2, 5);
        let f = ScalarField::constant(s.clone(), 1.0);
        let g = apply_dirichlet(&f, |_| 0.0).unwrap();
        for p in 0..s.len() {
            assert_eq!(g.get(p), if s.is_interior(p) { 1.0 } else { 0.0 });
        }
        let phi = |z: &[f64]| z.iter().map(|x| x * x).sum::<f64>();
        let once = apply_dirichlet(&f, phi).unwrap();
        let twice = apply_dirichlet(&once, phi).unwrap();
        assert_eq!(once, twice);
        let usub = ScalarField::from_fn(s.clone(), phi).unwrap();
        let copied = copy_boundary(&f, &usub).unwrap();
        assert_eq!(copied, once);
    }
}
