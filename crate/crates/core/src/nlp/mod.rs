//! Smooth nonlinear programming: minimize f(x) subject to c(x) = 0 and
//! lo ≤ x ≤ hi.
//!
//! Multiplier convention: the Lagrangian is
//! `L = f + λᵀc − z_loᵀ(x − lo) − z_hiᵀ(hi − x)` with `z_lo, z_hi ≥ 0`, so
//! at a solution `∇f + Jᵀλ − z_lo + z_hi = 0`.

mod bfgs;
mod ipm;
pub mod ldl;

pub use ipm::solve;

use crate::error::NlpError;

/// A problem with a fixed sparsity structure.
///
/// Jacobian and Hessian structures are lists of `(row, col)` pairs; the
/// value callbacks fill slices in the same order. Hessian entries must lie
/// in the lower triangle (`row >= col`).
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Variable bounds; use infinities for absent bounds.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], c: &mut [f64]);
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]);
    /// `None` selects a dense quasi-Newton approximation.
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        None
    }
    /// Values of `obj_factor·∇²f + Σ λ_i ∇²c_i` on the Hessian structure.
    fn hessian_values(&self, _x: &[f64], _obj_factor: f64, _lambda: &[f64], _vals: &mut [f64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpOptions {
    /// Tolerance on the scaled KKT error.
    pub tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Rescale the objective so its initial gradient has max norm ≤ 100.
    pub gradient_scaling: bool,
    /// Print one line per iteration at debug level.
    pub verbose: bool,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            mu_init: 0.1,
            gradient_scaling: true,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Unscaled KKT residual norms (max norms).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub lambda_eq: Vec<f64>,
    pub lambda_lo: Vec<f64>,
    pub lambda_hi: Vec<f64>,
    pub objective: f64,
    pub status: NlpStatus,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Starting point for [`solve`]: either a primal guess or a previous
/// solution whose multipliers are reused.
#[derive(Debug, Clone)]
pub enum StartPoint<'a> {
    Cold(&'a [f64]),
    Warm(&'a NlpSolution),
}

impl<'a> From<&'a [f64]> for StartPoint<'a> {
    fn from(x: &'a [f64]) -> Self {
        Self::Cold(x)
    }
}

impl<'a> From<&'a Vec<f64>> for StartPoint<'a> {
    fn from(x: &'a Vec<f64>) -> Self {
        Self::Cold(x)
    }
}

impl<'a> From<&'a NlpSolution> for StartPoint<'a> {
    fn from(s: &'a NlpSolution) -> Self {
        Self::Warm(s)
    }
}

/// Unscaled KKT residuals of a primal-dual point.
pub fn kkt_residuals<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    lambda: &[f64],
    z_lo: &[f64],
    z_hi: &[f64],
) -> KktResiduals {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let (lo, hi) = problem.bounds();
    let mut g = vec![0.0; n];
    problem.gradient(x, &mut g);
    let structure = problem.jacobian_structure();
    let mut jv = vec![0.0; structure.len()];
    problem.jacobian_values(x, &mut jv);
    for (&(i, j), v) in structure.iter().zip(&jv) {
        g[j] += v * lambda[i];
    }
    let mut stationarity: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for j in 0..n {
        stationarity = stationarity.max((g[j] - z_lo[j] + z_hi[j]).abs());
        if lo[j].is_finite() {
            complementarity = complementarity.max((z_lo[j] * (x[j] - lo[j])).abs());
        }
        if hi[j].is_finite() {
            complementarity = complementarity.max((z_hi[j] * (hi[j] - x[j])).abs());
        }
    }
    let mut c = vec![0.0; m];
    problem.constraints(x, &mut c);
    let mut feasibility = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for j in 0..n {
        feasibility = feasibility.max(lo[j] - x[j]).max(x[j] - hi[j]);
    }
    KktResiduals {
        stationarity,
        feasibility,
        complementarity,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn fd_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

/// Worst relative discrepancy between the analytic gradient and Jacobian
/// and central finite differences at `x`.
pub fn check_derivatives<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> f64 {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let mut grad = vec![0.0; n];
    problem.gradient(x, &mut grad);
    let structure = problem.jacobian_structure();
    let mut jv = vec![0.0; structure.len()];
    problem.jacobian_values(x, &mut jv);
    let mut jac = vec![std::collections::BTreeMap::new(); n];
    for (&(i, j), v) in structure.iter().zip(&jv) {
        *jac[j].entry(i).or_insert(0.0) += v;
    }

    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    let mut cp = vec![0.0; m];
    let mut cm = vec![0.0; m];
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let fp = problem.objective(&xp);
        problem.constraints(&xp, &mut cp);
        xp[j] = x[j] - h;
        let fm = problem.objective(&xp);
        problem.constraints(&xp, &mut cm);
        xp[j] = x[j];
        // divide by the actual step so rounding in x ± h does not leak in
        let width = (x[j] + h) - (x[j] - h);
        worst = worst.max(rel_err(grad[j], (fp - fm) / width));
        for i in 0..m {
            let fd = (cp[i] - cm[i]) / width;
            let analytic = jac[j].get(&i).copied().unwrap_or(0.0);
            worst = worst.max(rel_err(analytic, fd));
        }
    }
    worst
}

/// Worst relative discrepancy between the analytic Lagrangian Hessian and
/// central differences of the Lagrangian gradient. Returns `None` when the
/// problem has no Hessian.
pub fn check_hessian<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    obj_factor: f64,
    lambda: &[f64],
) -> Option<f64> {
    let structure = problem.hessian_structure()?;
    let n = problem.num_variables();
    let mut hv = vec![0.0; structure.len()];
    problem.hessian_values(x, obj_factor, lambda, &mut hv);
    let mut dense = vec![vec![0.0; n]; n];
    for (&(r, c), v) in structure.iter().zip(&hv) {
        dense[r][c] += v;
        if r != c {
            dense[c][r] += v;
        }
    }
    let jstruct = problem.jacobian_structure();
    let lag_grad = |x: &[f64]| {
        let mut g = vec![0.0; n];
        problem.gradient(x, &mut g);
        g.iter_mut().for_each(|v| *v *= obj_factor);
        let mut jv = vec![0.0; jstruct.len()];
        problem.jacobian_values(x, &mut jv);
        for (&(i, j), v) in jstruct.iter().zip(&jv) {
            g[j] += v * lambda[i];
        }
        g
    };
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let gp = lag_grad(&xp);
        xp[j] = x[j] - h;
        let gm = lag_grad(&xp);
        xp[j] = x[j];
        let width = (x[j] + h) - (x[j] - h);
        for i in 0..n {
            worst = worst.max(rel_err(dense[i][j], (gp[i] - gm[i]) / width));
        }
    }
    Some(worst)
}

pub(crate) fn check_finite(what: &'static str, v: &[f64]) -> Result<(), NlpError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(NlpError::Evaluation { what, index }),
        None => Ok(()),
    }
}
