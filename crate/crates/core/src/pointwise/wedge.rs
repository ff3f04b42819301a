//! Literal exterior-algebra expansion of wedge products of real (1,1)-forms.
//!
//! This is an independent oracle for the eigenvalue formulas of the
//! subsolution and cone predicates; the solver never calls it.
//!
//! A (1,1)-form `A` is identified with `sum_{ij} A_{ij} (i/2) dz_i ^ dzbar_j`,
//! so the identity matrix is `sum_k beta_k` with `beta_k = (i/2) dz_k ^ dzbar_k`.
//! A (p,p)-form is stored on the basis
//! `e(I, J) = (i/2)^p dz_{I_1} ^ dzbar_{J_1} ^ ... ^ dz_{I_p} ^ dzbar_{J_p}`
//! with `I`, `J` strictly increasing.

use std::collections::BTreeMap;

use super::{HermitianMat, Pencil};
use crate::error::{Error, Result};
use crate::{CMat, Complex64};

type Key = (Vec<usize>, Vec<usize>);

#[derive(Clone, Debug)]
pub struct Form {
    n: usize,
    degree: usize,
    coeffs: BTreeMap<Key, Complex64>,
}

impl Form {
    /// The (1,1)-form with coefficient matrix `a`.
    pub fn from_matrix(a: &HermitianMat) -> Self {
        let n = a.dim();
        let mut coeffs = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let c = a.as_matrix()[(i, j)];
                if c != Complex64::new(0.0, 0.0) {
                    coeffs.insert((vec![i], vec![j]), c);
                }
            }
        }
        Self { n, degree: 1, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficient(&self, i: &[usize], j: &[usize]) -> Complex64 {
        self.coeffs
            .get(&(i.to_vec(), j.to_vec()))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn wedge(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut coeffs: BTreeMap<Key, Complex64> = BTreeMap::new();
        for ((i1, j1), c1) in &self.coeffs {
            for ((i2, j2), c2) in &other.coeffs {
                if let Some((key, sign)) = canonical_product(i1, j1, i2, j2) {
                    *coeffs.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c1 * c2 * sign;
                }
            }
        }
        Self { n: self.n, degree: self.degree + other.degree, coeffs }
    }

    pub fn scale(&self, c: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        Self { n: self.n, degree: self.degree, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        let mut coeffs = self.coeffs.clone();
        for (k, v) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) -= v;
        }
        Self { n: self.n, degree: self.degree, coeffs }
    }

    /// Coefficient of `beta_1 ^ ... ^ beta_n` in a top-degree form.
    pub fn top_coefficient(&self) -> f64 {
        assert_eq!(self.degree, self.n);
        let all: Vec<usize> = (0..self.n).collect();
        self.coefficient(&all, &all).re
    }

    /// For an (n-1, n-1)-form, the `n x n` matrix whose `(a, b)` entry is the
    /// coefficient of `e([n] \ a, [n] \ b)`.
    pub fn codegree_one_matrix(&self) -> CMat {
        assert_eq!(self.degree + 1, self.n);
        let n = self.n;
        let drop = |k: usize| -> Vec<usize> { (0..n).filter(|&i| i != k).collect() };
        CMat::from_fn(n, n, |a, b| self.coefficient(&drop(a), &drop(b)))
    }
}

// Concatenate the pair lists, sort pairs by holomorphic index (pairs are
// 2-forms and commute), then sort the antiholomorphic factors, picking up
// the sign of that permutation.
fn canonical_product(i1: &[usize], j1: &[usize], i2: &[usize], j2: &[usize]) -> Option<(Key, f64)> {
    let mut pairs: Vec<(usize, usize)> = i1
        .iter()
        .zip(j1)
        .chain(i2.iter().zip(j2))
        .map(|(&a, &b)| (a, b))
        .collect();
    pairs.sort_unstable_by_key(|p| p.0);
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return None;
    }
    let js: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let mut inversions = 0;
    for a in 0..js.len() {
        for b in a + 1..js.len() {
            if js[a] == js[b] {
                return None;
            }
            if js[a] > js[b] {
                inversions += 1;
            }
        }
    }
    let is: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut sorted_js = js;
    sorted_js.sort_unstable();
    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
    Some(((is, sorted_js), sign))
}

/// Result of [`wedge_oracle`].
#[derive(Clone, Debug)]
pub enum WedgeValue {
    /// Coefficient relative to `beta_1 ^ ... ^ beta_n`.
    Top(f64),
    /// Coefficient matrix of an (n-1, n-1)-form, see [`Form::codegree_one_matrix`].
    CodegreeOne(CMat),
}

/// Expand `A_1^{k_1} ^ A_2^{k_2} ^ ...` literally. Total degree must be `n`
/// or `n - 1`.
pub fn wedge_oracle(mats: &[(&HermitianMat, usize)], n: usize) -> Result<WedgeValue> {
    if !(2..=3).contains(&n) {
        return Err(Error::Precondition(format!("wedge oracle supports n in {{2, 3}}, got {n}")));
    }
    let total: usize = mats.iter().map(|(_, k)| k).sum();
    if total != n && total + 1 != n {
        return Err(Error::Precondition(format!(
            "wedge degree {total} is neither n = {n} nor n - 1"
        )));
    }
    if let Some((m, _)) = mats.iter().find(|(m, _)| m.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
    }
    let product = power_product(mats).expect("degree at least one");
    Ok(if total == n {
        WedgeValue::Top(product.top_coefficient())
    } else {
        WedgeValue::CodegreeOne(product.codegree_one_matrix())
    })
}

fn power_product(mats: &[(&HermitianMat, usize)]) -> Option<Form> {
    let mut acc: Option<Form> = None;
    for (m, k) in mats {
        let f = Form::from_matrix(m);
        for _ in 0..*k {
            acc = Some(match acc {
                None => f.clone(),
                Some(a) => a.wedge(&f),
            });
        }
    }
    acc
}

/// `(chi^n - psi chi ^ omega^{n-1}) / omega^n`, which equals the pencil
/// formula `det(g^{-1} chi) - (psi/n) tr_g chi` when `omega^n = n! det(g) beta`.
pub fn subsolution_margin_by_wedge(chi: &HermitianMat, g: &HermitianMat, psi: f64) -> Result<f64> {
    let n = g.dim();
    let top = |mats: &[(&HermitianMat, usize)]| -> Result<f64> {
        match wedge_oracle(mats, n)? {
            WedgeValue::Top(v) => Ok(v),
            WedgeValue::CodegreeOne(_) => unreachable!(),
        }
    };
    let chi_n = top(&[(chi, n)])?;
    let mixed = top(&[(chi, 1), (g, n - 1)])?;
    let vol = top(&[(g, n)])?;
    Ok((chi_n - psi * mixed) / vol)
}

/// Smallest generalized eigenvalue of the (n-1, n-1)-form
/// `n chi^{n-1} - (n-1) psi chi ^ omega^{n-2}` relative to `omega^{n-1}`.
pub fn cone_margin_by_wedge(chi: &HermitianMat, g: &HermitianMat, psi: f64) -> Result<f64> {
    let n = g.dim();
    let codegree = |mats: &[(&HermitianMat, usize)]| -> Result<Form> {
        wedge_oracle(mats, n)?;
        Ok(power_product(mats).expect("non-empty"))
    };
    let lead = codegree(&[(chi, n - 1)])?;
    let mixed = if n == 2 {
        Form::from_matrix(chi)
    } else {
        codegree(&[(chi, 1), (g, n - 2)])?
    };
    let form = lead.scale(n as f64).sub(&mixed.scale((n - 1) as f64 * psi));
    let reference = codegree(&[(g, n - 1)])?;
    let m = HermitianMat::new(form.codegree_one_matrix());
    let omega = HermitianMat::new(reference.codegree_one_matrix());
    let pencil = Pencil::new(&m, &omega).ok_or(Error::NotPositiveDefinite("omega^{n-1}"))?;
    Ok(pencil.min())
}
