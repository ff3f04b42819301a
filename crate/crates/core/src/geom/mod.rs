//! Hermitian background geometry on a coordinate chart.
//!
//! Coordinates are real `(x_1, y_1, ..., x_n, y_n)` with `z_j = x_j + i y_j`,
//! `d_j = (d/dx_j - i d/dy_j)/2` and `dbar_j = (d/dx_j + i d/dy_j)/2`.
//! Index conventions: a metric matrix `G[i][j] = g_{i jbar}`; the inverse
//! metric `g^{i jbar}` is `(G^{-1})[j][i]`, so that a contraction
//! `F^{i jbar} A_{i jbar}` of "upper" and "lower" tensors stored as matrices
//! is `Re tr(F A)`.

mod connection;
mod metric;

pub use connection::{
    chern_connection, commutation_residual, curvature, torsion, ConnectionCoeffs,
    CurvatureTensor, TorsionTensor,
};
pub use metric::{ChiForm, MetricField, MetricFamily};

/// Real-axis expansions of the Wirtinger derivatives.
pub mod wirtinger {
    use crate::{CMat, Complex64};

    /// `d_k = 1/2 d/dx_k - i/2 d/dy_k` as `(real axis, coefficient)` pairs.
    pub fn holomorphic(k: usize) -> [(usize, Complex64); 2] {
        [(2 * k, Complex64::new(0.5, 0.0)), (2 * k + 1, Complex64::new(0.0, -0.5))]
    }

    /// `dbar_k = 1/2 d/dx_k + i/2 d/dy_k`.
    pub fn antiholomorphic(k: usize) -> [(usize, Complex64); 2] {
        [(2 * k, Complex64::new(0.5, 0.0)), (2 * k + 1, Complex64::new(0.0, 0.5))]
    }

    /// Combine real-axis derivatives of a matrix-valued function.
    pub fn combine(terms: [(usize, Complex64); 2], real: &[CMat]) -> CMat {
        real[terms[0].0].map(|v| v * terms[0].1) + real[terms[1].0].map(|v| v * terms[1].1)
    }
}
