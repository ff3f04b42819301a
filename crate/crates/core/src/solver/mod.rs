//! Damped Newton with an admissibility-preserving line search, embedded in a
//! continuation `psi_t = (1 - t) psi_0 + t psi` that starts from the
//! subsolution, plus the manufactured-solution generator.
//!
//! The discrete residual at an interior node is the log form
//! `sum log(lambda) - log(sum lambda) - log(psi/n)` of the pencil of
//! `chi + Hess_h u` relative to `g`. Boundary nodes carry Dirichlet data and
//! are never unknowns.

pub mod linear;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::AnalyticFn;
use crate::geom::{ChiForm, MetricField};
use crate::grid::{copy_boundary, GridSpec, HessianStencil, ScalarField};
use crate::pointwise::{is_admissible_pencil, psi_from_pencil, residual_from_pencil, HermitianMat, MetricFrame, Pencil};
use linear::{gmres, Csr, GmresOptions, Ilu0};

/// Everything needed to pose the discrete Dirichlet problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub metric: MetricField,
    pub chi: ChiForm,
    pub psi: ScalarField,
    /// Only the boundary samples are used.
    pub phi: ScalarField,
    pub usub: ScalarField,
}

impl ProblemSpec {
    /// Checks `psi > 0` everywhere, `usub = phi` on the boundary (to 1e-12)
    /// and admissibility of `usub` at every interior node.
    pub fn new(metric: MetricField, chi: ChiForm, psi: ScalarField, phi: ScalarField, usub: ScalarField) -> Result<Self> {
        let grid = psi.spec().clone();
        psi.check_same_grid(&phi)?;
        psi.check_same_grid(&usub)?;
        if metric.n() != grid.n() {
            return Err(Error::DimensionMismatch { expected: grid.n(), got: metric.n() });
        }
        if let Some(p) = psi.values().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Precondition(format!(
                "psi must be positive at every node (node {p}, multi-index {:?}, value {})",
                grid.multi_index(p),
                psi.get(p)
            )));
        }
        for p in grid.boundary_indices() {
            let d = (usub.get(p) - phi.get(p)).abs();
            if d > 1e-12 {
                return Err(Error::Precondition(format!(
                    "subsolution differs from boundary data by {d:e} at node {p} (multi-index {:?})",
                    grid.multi_index(p)
                )));
            }
        }
        let spec = Self { grid, metric, chi, psi, phi, usub };
        let disc = Discretization::new(&spec.grid, &spec.metric, &spec.chi)?;
        disc.admissible_pencils(spec.usub.values(), "subsolution")?;
        Ok(spec)
    }
}

/// Solver controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Stop when the max-norm of the discrete residual is at most this.
    pub tol_residual: f64,
    /// Newton iterations allowed per continuation step.
    pub max_newton: usize,
    /// Backtracking factor of the line search.
    pub damping: f64,
    pub min_step: f64,
    /// Initial number of continuation steps on `[0, 1]`.
    pub continuation_steps: usize,
    /// Step halving stops once the step count would exceed this.
    pub max_continuation_steps: usize,
    /// Relative residual required of every linear solve.
    pub linear_rtol: f64,
    pub gmres_restart: usize,
    pub max_linear_iters: usize,
    /// Run on a single thread.
    pub serial: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_newton: 50,
            damping: 0.5,
            min_step: 0.5f64.powi(20),
            continuation_steps: 4,
            max_continuation_steps: 64,
            linear_rtol: 1e-12,
            gmres_restart: 60,
            max_linear_iters: 20_000,
            serial: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.tol_residual > 0.0) {
            bad.push("tol_residual must be positive".to_string());
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            bad.push("damping must lie in (0, 1)".to_string());
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            bad.push("min_step must lie in (0, 1]".to_string());
        }
        if !(self.linear_rtol > 0.0 && self.linear_rtol < 1.0) {
            bad.push("linear_rtol must lie in (0, 1)".to_string());
        }
        for (name, v) in [
            ("max_newton", self.max_newton),
            ("continuation_steps", self.continuation_steps),
            ("gmres_restart", self.gmres_restart),
            ("max_linear_iters", self.max_linear_iters),
        ] {
            if v == 0 {
                bad.push(format!("{name} must be positive"));
            }
        }
        if self.max_continuation_steps < self.continuation_steps {
            bad.push("max_continuation_steps must be at least continuation_steps".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveState {
    pub u: ScalarField,
    pub t: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub admissible: bool,
}

/// One accepted continuation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
    /// Residual max-norm before each Newton update and after the last.
    pub residual_history: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub linear_iters: usize,
}

/// A continuation step that was rejected and retried with a smaller increment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedStep {
    pub from_t: f64,
    pub to_t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps: Vec<StepRecord>,
    pub rejected: Vec<RejectedStep>,
    pub total_newton_iters: usize,
    pub total_linear_iters: usize,
    pub final_residual: f64,
}

/// Per-grid data shared by residual and Jacobian assembly: the stencil,
/// interior numbering, and `g`, `g^{-1}`, `chi` at every interior node.
#[derive(Clone, Debug)]
pub struct Discretization {
    grid: GridSpec,
    stencil: HessianStencil,
    interior: Vec<usize>,
    frames: Vec<MetricFrame>,
    g_inv: Vec<HermitianMat>,
    chi: Vec<HermitianMat>,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    entry: Vec<u16>,
}

impl Discretization {
    pub fn new(grid: &GridSpec, metric: &MetricField, chi: &ChiForm) -> Result<Self> {
        if metric.n() != grid.n() {
            return Err(Error::DimensionMismatch { expected: grid.n(), got: metric.n() });
        }
        let stencil = HessianStencil::new(grid);
        let interior = grid.interior_indices();
        let geo: Vec<(MetricFrame, HermitianMat, HermitianMat)> = interior
            .par_iter()
            .map(|&p| {
                let z = grid.coords(p);
                let frame = MetricFrame::new(&metric.value(&z)).ok_or(Error::NotPositiveDefinite("metric"))?;
                let g_inv = frame.inverse();
                Ok((frame, g_inv, chi.value(metric, &z)))
            })
            .collect::<Result<_>>()?;
        let (mut frames, mut g_inv, mut chis) = (Vec::new(), Vec::new(), Vec::new());
        for (f, gi, c) in geo {
            frames.push(f);
            g_inv.push(gi);
            chis.push(c);
        }

        let mut row_of = vec![u32::MAX; grid.len()];
        for (k, &p) in interior.iter().enumerate() {
            row_of[p] = k as u32;
        }
        let mut order: Vec<usize> = (0..stencil.len()).collect();
        order.sort_by_key(|&e| stencil.entries()[e].flat_offset);
        let mut row_ptr = Vec::with_capacity(interior.len() + 1);
        row_ptr.push(0);
        let (mut col, mut entry) = (Vec::new(), Vec::new());
        for &p in &interior {
            for &e in &order {
                let q = (p as isize + stencil.entries()[e].flat_offset) as usize;
                if row_of[q] != u32::MAX {
                    col.push(row_of[q]);
                    entry.push(e as u16);
                }
            }
            row_ptr.push(col.len());
        }
        Ok(Self { grid: grid.clone(), stencil, interior, frames, g_inv, chi: chis, row_ptr, col, entry })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Flat indices of the unknowns, in row order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn unknowns(&self) -> usize {
        self.interior.len()
    }

    /// `chi + Hess_h u` at the `k`-th interior node.
    pub fn gtilde(&self, k: usize, u: &[f64]) -> HermitianMat {
        self.chi[k].add(&self.stencil.apply(u, self.interior[k]))
    }

    pub fn pencil(&self, k: usize, u: &[f64]) -> Pencil {
        self.frames[k].pencil(&self.gtilde(k, u))
    }

    pub fn metric_at(&self, k: usize) -> &HermitianMat {
        self.frames[k].metric()
    }

    pub fn chi_at(&self, k: usize) -> &HermitianMat {
        &self.chi[k]
    }

    pub fn pencils(&self, u: &[f64]) -> Vec<Pencil> {
        (0..self.unknowns()).into_par_iter().map(|k| self.pencil(k, u)).collect()
    }

    /// Pencils at every interior node, or an error naming the first
    /// inadmissible node.
    pub fn admissible_pencils(&self, u: &[f64], what: &'static str) -> Result<Vec<Pencil>> {
        let pencils = self.pencils(u);
        if let Some(k) = pencils.iter().position(|p| !is_admissible_pencil(p)) {
            let node = self.interior[k];
            return Err(Error::InadmissibleNode { what, node, index: self.grid.multi_index(node), margin: pencils[k].min() });
        }
        Ok(pencils)
    }

    /// Interior samples of a field, in row order.
    pub fn interior_values(&self, f: &ScalarField) -> Vec<f64> {
        self.interior.iter().map(|&p| f.get(p)).collect()
    }

    /// Discrete residual at every unknown; `psi` is given per unknown.
    pub fn residual(&self, u: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
        let pencils = self.admissible_pencils(u, "iterate")?;
        Ok(pencils.iter().zip(psi).map(|(p, &s)| residual_from_pencil(p, s)).collect())
    }

    /// Jacobian of [`Self::residual`] with respect to the interior values:
    /// row `p` has entries `F_p . E_q`, with `F = gt^{-1} - g^{-1}/W` and
    /// `E_q` the stencil coefficient of neighbor `q`.
    pub fn jacobian(&self, u: &[f64]) -> Result<Csr> {
        let rows: Vec<Vec<f64>> = (0..self.unknowns())
            .into_par_iter()
            .map(|k| {
                let (f, _) = self.linearization(k, u)?;
                Ok((self.row_ptr[k]..self.row_ptr[k + 1])
                    .map(|nz| f.contract(&self.stencil.entries()[self.entry[nz] as usize].coeff))
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(Csr { nrows: self.unknowns(), row_ptr: self.row_ptr.clone(), col: self.col.clone(), val: rows.concat() })
    }

    /// `F = gt^{-1} - g^{-1}/W` and `W` at the `k`-th interior node.
    pub fn linearization(&self, k: usize, u: &[f64]) -> Result<(HermitianMat, f64)> {
        let gt = self.gtilde(k, u);
        let pencil = self.frames[k].pencil(&gt);
        if !is_admissible_pencil(&pencil) {
            let node = self.interior[k];
            return Err(Error::InadmissibleNode { what: "iterate", node, index: self.grid.multi_index(node), margin: pencil.min() });
        }
        let w = pencil.trace();
        let gt_inv = gt.inverse().ok_or(Error::NotPositiveDefinite("gtilde"))?;
        Ok((gt_inv.sub(&self.g_inv[k].scale(1.0 / w)), w))
    }

    /// Discrete complex Hessian of `u` at the `k`-th interior node.
    pub fn hessian(&self, k: usize, u: &[f64]) -> HermitianMat {
        self.stencil.apply(u, self.interior[k])
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn run<T: Send>(serial: bool, f: impl FnOnce() -> T + Send) -> Result<T> {
    if serial {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Precondition(format!("cannot build serial thread pool: {e}")))?;
        Ok(pool.install(f))
    } else {
        Ok(f())
    }
}

/// Solver bound to one problem: caches the discretization and the
/// continuation endpoints.
pub struct Solver<'a> {
    problem: &'a ProblemSpec,
    disc: Discretization,
    opts: SolveOptions,
    psi0: Vec<f64>,
    psi1: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a ProblemSpec, opts: SolveOptions) -> Result<Self> {
        opts.validate()?;
        let disc = Discretization::new(&problem.grid, &problem.metric, &problem.chi)?;
        let psi0 = disc
            .admissible_pencils(problem.usub.values(), "subsolution")?
            .iter()
            .map(psi_from_pencil)
            .collect();
        let psi1 = disc.interior_values(&problem.psi);
        Ok(Self { problem, disc, opts, psi0, psi1 })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// `psi_0` at the unknowns: the `psi` for which the subsolution solves the equation.
    pub fn psi0(&self) -> &[f64] {
        &self.psi0
    }

    /// `(1 - t) psi_0 + t psi` at the unknowns.
    pub fn psi_at(&self, t: f64) -> Vec<f64> {
        if t == 1.0 {
            return self.psi1.clone();
        }
        self.psi0.iter().zip(&self.psi1).map(|(a, b)| (1.0 - t) * a + t * b).collect()
    }

    /// State at `t = 0`: the subsolution with boundary values copied from `phi`.
    pub fn initial_state(&self) -> Result<SolveState> {
        let u = copy_boundary(&self.problem.usub, &self.problem.phi)?;
        let r = self.disc.residual(u.values(), &self.psi0)?;
        Ok(SolveState { u, t: 0.0, residual_norm: max_abs(&r), newton_iters: 0, admissible: true })
    }

    /// Newton direction `J d = -r` (zero on the boundary), the predicted
    /// max-norm decrease of a full step, and the GMRES iteration count.
    pub fn newton_step(&self, state: &SolveState, psi_t: &[f64]) -> Result<(ScalarField, f64, usize)> {
        let u = state.u.values();
        let r = self.disc.residual(u, psi_t)?;
        let jac = self.disc.jacobian(u)?;
        let ilu = Ilu0::new(&jac)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let gopts = GmresOptions {
            rtol: self.opts.linear_rtol,
            restart: self.opts.gmres_restart,
            max_iters: self.opts.max_linear_iters,
        };
        let (d, stats) = gmres(&jac, &rhs, &ilu, gopts)?;
        let mut dir = vec![0.0; self.problem.grid.len()];
        for (&p, &v) in self.disc.interior().iter().zip(&d) {
            dir[p] = v;
        }
        Ok((ScalarField::new(self.problem.grid.clone(), dir)?, max_abs(&r), stats.iterations))
    }

    /// Largest `s` in `{1, damping, damping^2, ..., min_step}` keeping every
    /// interior node admissible and strictly decreasing the residual max-norm.
    pub fn line_search(&self, state: &SolveState, direction: &ScalarField, psi_t: &[f64]) -> Result<(SolveState, f64)> {
        let r0 = max_abs(&self.disc.residual(state.u.values(), psi_t)?);
        if direction.values().iter().all(|&v| v == 0.0) {
            let mut same = state.clone();
            same.residual_norm = r0;
            return Ok((same, 1.0));
        }
        let mut s = 1.0;
        while s >= self.opts.min_step {
            let trial = state.u.axpy(s, direction)?;
            if let Ok(r) = self.disc.residual(trial.values(), psi_t) {
                let rn = max_abs(&r);
                if rn < r0 {
                    let next = SolveState {
                        u: trial,
                        t: state.t,
                        residual_norm: rn,
                        newton_iters: state.newton_iters + 1,
                        admissible: true,
                    };
                    return Ok((next, s));
                }
            }
            s *= self.opts.damping;
        }
        Err(Error::LineSearchFailed { min_step: self.opts.min_step })
    }

    /// Newton iterations at fixed `t` until the residual tolerance is met.
    fn newton_solve(&self, start: &SolveState, t: f64) -> Result<(SolveState, StepRecord)> {
        let psi_t = self.psi_at(t);
        let mut state = start.clone();
        state.t = t;
        state.residual_norm = max_abs(&self.disc.residual(state.u.values(), &psi_t)?);
        let mut rec = StepRecord {
            t,
            newton_iters: 0,
            residual: state.residual_norm,
            residual_history: vec![state.residual_norm],
            step_sizes: Vec::new(),
            linear_iters: 0,
        };
        while state.residual_norm > self.opts.tol_residual {
            if rec.newton_iters >= self.opts.max_newton {
                return Err(Error::Precondition(format!(
                    "Newton did not converge in {} iterations (residual {:e})",
                    self.opts.max_newton, state.residual_norm
                )));
            }
            let (dir, _, lin) = self.newton_step(&state, &psi_t)?;
            let (next, s) = self.line_search(&state, &dir, &psi_t)?;
            state = next;
            rec.newton_iters += 1;
            rec.linear_iters += lin;
            rec.step_sizes.push(s);
            rec.residual_history.push(state.residual_norm);
        }
        rec.residual = state.residual_norm;
        Ok((state, rec))
    }

    /// Runs the continuation from `t = 0` to `t = 1`.
    pub fn solve(&self) -> Result<(SolveState, SolveReport)> {
        run(self.opts.serial, || self.solve_inner())?
    }

    fn solve_inner(&self) -> Result<(SolveState, SolveReport)> {
        let mut report = SolveReport::default();
        let mut state = self.initial_state()?;
        let dt_max = 1.0 / self.opts.continuation_steps as f64;
        let dt_min = 1.0 / self.opts.max_continuation_steps as f64;
        let mut dt = dt_max;
        while state.t < 1.0 {
            let target = if state.t + dt >= 1.0 - 1e-12 { 1.0 } else { state.t + dt };
            match self.newton_solve(&state, target) {
                Ok((next, rec)) => {
                    report.total_newton_iters += rec.newton_iters;
                    report.total_linear_iters += rec.linear_iters;
                    report.steps.push(rec);
                    state = next;
                    state.newton_iters = report.total_newton_iters;
                    dt = (2.0 * dt).min(dt_max);
                }
                Err(e) => {
                    report.rejected.push(RejectedStep { from_t: state.t, to_t: target, reason: e.to_string() });
                    dt *= 0.5;
                    if dt < dt_min * (1.0 - 1e-12) {
                        return Err(Error::ContinuationFailed { last_t: state.t, attempted_t: target, state: Box::new(state) });
                    }
                }
            }
        }
        report.final_residual = state.residual_norm;
        Ok((state, report))
    }
}

/// `psi_0` on the whole grid: `equation_psi` of the subsolution at interior
/// nodes, `psi` itself on the boundary (where it plays no role).
pub fn initial_psi(problem: &ProblemSpec) -> Result<ScalarField> {
    let solver = Solver::new(problem, SolveOptions::default())?;
    let mut values = problem.psi.values().to_vec();
    for (&p, &v) in solver.discretization().interior().iter().zip(solver.psi0()) {
        values[p] = v;
    }
    ScalarField::new(problem.grid.clone(), values)
}

/// `equation_psi` of `u` at every interior node; boundary nodes copy their
/// nearest interior node.
pub fn equation_psi_field(grid: &GridSpec, metric: &MetricField, chi: &ChiForm, u: &ScalarField) -> Result<ScalarField> {
    let disc = Discretization::new(grid, metric, chi)?;
    let psi: Vec<f64> = disc.admissible_pencils(u.values(), "subsolution")?.iter().map(psi_from_pencil).collect();
    let mut values = vec![0.0; grid.len()];
    for (&p, &v) in disc.interior().iter().zip(&psi) {
        values[p] = v;
    }
    for p in grid.boundary_indices() {
        let idx: Vec<usize> = grid.multi_index(p).iter().map(|&i| i.clamp(1, grid.m() - 2)).collect();
        values[p] = values[grid.flat_index(&idx)];
    }
    ScalarField::new(grid.clone(), values)
}

pub fn newton_step(state: &SolveState, problem: &ProblemSpec, psi_t: &ScalarField) -> Result<(ScalarField, f64)> {
    let solver = Solver::new(problem, SolveOptions::default())?;
    let psi = solver.discretization().interior_values(psi_t);
    let (d, pred, _) = solver.newton_step(state, &psi)?;
    Ok((d, pred))
}

pub fn line_search_admissible(
    state: &SolveState,
    direction: &ScalarField,
    problem: &ProblemSpec,
    psi_t: &ScalarField,
) -> Result<(SolveState, f64)> {
    let solver = Solver::new(problem, SolveOptions::default())?;
    let psi = solver.discretization().interior_values(psi_t);
    solver.line_search(state, direction, &psi)
}

pub fn solve_continuation(problem: &ProblemSpec, opts: &SolveOptions) -> Result<(SolveState, SolveReport)> {
    Solver::new(problem, opts.clone())?.solve()
}

/// A problem whose exact solution is known.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub problem: ProblemSpec,
    pub exact: ScalarField,
}

/// Builds `psi` from the analytic Hessian of `u_star` at every node, with
/// `phi = usub = u_star`.
pub fn mms_generate(metric: &MetricField, chi: &ChiForm, u_star: &AnalyticFn, grid: &GridSpec) -> Result<ManufacturedProblem> {
    if metric.n() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), got: metric.n() });
    }
    if grid.n() < u_star.min_dimension() {
        return Err(Error::InvalidParams(format!("{u_star:?} needs n >= {}", u_star.min_dimension())));
    }
    let psi: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let z = grid.coords(p);
            let g = metric.value(&z);
            let gt = chi.value(metric, &z).add(&u_star.complex_hessian(&z));
            let pencil = Pencil::new(&gt, &g).ok_or(Error::NotPositiveDefinite("metric"))?;
            if !is_admissible_pencil(&pencil) {
                return Err(Error::InadmissibleNode {
                    what: "manufactured solution",
                    node: p,
                    index: grid.multi_index(p),
                    margin: pencil.min(),
                });
            }
            Ok(psi_from_pencil(&pencil))
        })
        .collect::<Result<_>>()?;
    let exact = ScalarField::sample(grid.clone(), u_star)?;
    let psi = ScalarField::new(grid.clone(), psi)?;
    let problem = ProblemSpec::new(metric.clone(), chi.clone(), psi, exact.clone(), exact.clone())?;
    Ok(ManufacturedProblem { problem, exact })
}

#[cfg(test)]
mod tests;
