//! Sparse linear algebra for the Newton systems: CSR storage, ILU(0) and
//! right-preconditioned restarted GMRES.
//!
//! Reductions (dot products, norms) are sequential so results do not depend
//! on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed sparse rows with sorted column indices per row.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k] as usize];
            }
            *yi = s;
        });
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&(j as u32)) {
            Ok(k) => self.val[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col[k] as usize == i {
                    *d = k;
                }
            }
            if *d == usize::MAX {
                return Err(Error::Precondition(format!("ILU(0): row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col[k] as usize] = k;
            }
            for kk in start..diag[i] {
                let k = lu.col[kk] as usize;
                let pivot = lu.val[diag[k]];
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(Error::Precondition(format!("ILU(0): zero pivot at row {k}")));
                }
                let l = lu.val[kk] / pivot;
                lu.val[kk] = l;
                for jj in diag[k] + 1..lu.row_ptr[k + 1] {
                    let p = pos[lu.col[jj] as usize];
                    if p != usize::MAX {
                        lu.val[p] -= l * lu.val[jj];
                    }
                }
            }
            for k in start..end {
                pos[lu.col[k] as usize] = usize::MAX;
            }
            if lu.val[diag[i]] == 0.0 {
                return Err(Error::Precondition(format!("ILU(0): zero pivot at row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `LU x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.nrows {
            let mut s = x[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.val[k] * x[lu.col[k] as usize];
            }
            x[i] = s;
        }
        for i in (0..lu.nrows).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.val[k] * x[lu.col[k] as usize];
            }
            x[i] = s / lu.val[self.diag[i]];
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub rtol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct GmresStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &Csr, x: &[f64], b: &[f64], scratch: &mut [f64]) -> f64 {
    a.matvec(x, scratch);
    b.iter().zip(scratch.iter()).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt()
}

/// Solves `A x = b` from `x = 0`, right-preconditioned by `m`, until the true
/// residual satisfies `|b - A x| <= rtol |b|`.
pub fn gmres(a: &Csr, b: &[f64], m: &Ilu0, opts: GmresOptions) -> Result<(Vec<f64>, GmresStats)> {
    let n = a.nrows;
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, GmresStats { iterations: 0, relative_residual: 0.0 }));
    }
    let target = opts.rtol * b_norm;
    let restart = opts.restart.max(1);
    let mut scratch = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut r_norm = b_norm;

    while iterations < opts.max_iters {
        basis.clear();
        basis.push(r.iter().map(|v| v / r_norm).collect());
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = r_norm;
        let mut k_used = 0;
        for j in 0..restart {
            if iterations >= opts.max_iters {
                break;
            }
            iterations += 1;
            scratch.copy_from_slice(&basis[j]);
            m.solve_in_place(&mut scratch);
            a.matvec(&scratch, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let w_norm = norm(&w);
            h[j + 1][j] = w_norm;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                return Err(Error::LinearSolver { iterations, relative_residual: r_norm / b_norm });
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            if g[j + 1].abs() <= 0.5 * target || w_norm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut z = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            z.iter_mut().zip(v).for_each(|(zk, vk)| *zk += yi * vk);
        }
        m.solve_in_place(&mut z);
        x.iter_mut().zip(&z).for_each(|(xk, zk)| *xk += zk);

        r_norm = true_residual(a, &x, b, &mut scratch);
        if r_norm <= target {
            return Ok((x, GmresStats { iterations, relative_residual: r_norm / b_norm }));
        }
        a.matvec(&x, &mut scratch);
        r.iter_mut().zip(b.iter().zip(&scratch)).for_each(|(ri, (bi, ai))| *ri = bi - ai);
    }
    Err(Error::LinearSolver { iterations, relative_residual: r_norm / b_norm })
}
