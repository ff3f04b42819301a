use crate::{CMat, Complex64};

/// A dense `n x n` complex Hermitian matrix. Construction symmetrizes the
/// input, `(M + M^*)/2`, so the stored entries are exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMat(CMat);

impl HermitianMat {
    pub fn new(m: CMat) -> Self {
        assert!(m.is_square(), "Hermitian matrix must be square");
        let sym = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self(sym)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(CMat::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(&self.0 - &other.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|v| v * c))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `Re tr(self * other)`, i.e. `F^{i jbar} A_{i jbar}` when `self` holds
    /// upper-index coefficients as the matrix inverse convention.
    pub fn contract(&self, other: &Self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.0[(i, j)] * other.0[(j, i)]).re;
            }
        }
        acc
    }

    /// Lower Cholesky factor, `None` unless positive definite.
    pub fn cholesky_factor(&self) -> Option<CMat> {
        self.0.clone().cholesky().map(|c| c.l())
    }

    /// Inverse of a positive-definite matrix.
    pub fn inverse(&self) -> Option<Self> {
        self.0.clone().cholesky().map(|c| Self::new(c.inverse()))
    }

    /// Real eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// A positive-definite metric with its Cholesky reduction cached, for
/// repeated pencil evaluations at one point.
#[derive(Clone, Debug)]
pub struct MetricFrame {
    g: HermitianMat,
    l_inv: CMat,
}

impl MetricFrame {
    pub fn new(g: &HermitianMat) -> Option<Self> {
        let l = g.cholesky_factor()?;
        let n = g.dim();
        let l_inv = l.solve_lower_triangular(&CMat::identity(n, n))?;
        Some(Self { g: g.clone(), l_inv })
    }

    pub fn metric(&self) -> &HermitianMat {
        &self.g
    }

    /// `g^{-1}` as a matrix inverse, `L^{-*} L^{-1}`.
    pub fn inverse(&self) -> HermitianMat {
        HermitianMat::new(self.l_inv.adjoint() * &self.l_inv)
    }

    /// `L^{-1} A L^{-*}`, whose eigenvalues are those of the pencil `(A, g)`.
    pub fn reduce(&self, a: &HermitianMat) -> HermitianMat {
        HermitianMat::new(&self.l_inv * a.as_matrix() * self.l_inv.adjoint())
    }

    pub fn pencil(&self, a: &HermitianMat) -> Pencil {
        Pencil { lambdas: self.reduce(a).eigenvalues() }
    }
}

/// Generalized eigenvalues of `A` relative to `g`, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Pencil {
    lambdas: Vec<f64>,
}

impl Pencil {
    /// Cholesky-reduces the pencil to a standard Hermitian eigenproblem;
    /// `None` if `g` is not positive definite.
    pub fn new(a: &HermitianMat, g: &HermitianMat) -> Option<Self> {
        Some(MetricFrame::new(g)?.pencil(a))
    }

    pub fn from_eigenvalues(mut lambdas: Vec<f64>) -> Self {
        lambdas.sort_by(f64::total_cmp);
        Self { lambdas }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn min(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn max(&self) -> f64 {
        *self.lambdas.last().expect("non-empty pencil")
    }

    /// `tr_g A`
    pub fn trace(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// `det(g^{-1} A)`
    pub fn product(&self) -> f64 {
        self.lambdas.iter().product()
    }
}
