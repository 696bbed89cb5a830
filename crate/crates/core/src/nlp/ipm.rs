//! Primal-dual interior-point method with a filter line search.
//!
//! Fixed variables (lo = hi) are removed from the iteration and their bound
//! multipliers are recovered from stationarity at the end. The search
//! direction comes from the reduced KKT system
//!
//! ```text
//! [ W + Σ + δw I    Jᵀ   ] [dx]     [∇φμ + Jᵀλ]
//! [ J             −δc I  ] [dλ] = − [    c    ]
//! ```
//!
//! with inertia correction (δw) and dual regularization (δc) when the
//! factorization reports the wrong inertia or a singular matrix. A small
//! static regularization (+ρ on the primal diagonal, −ρ on the dual one)
//! makes the factored matrix quasi-definite, so the fill-reducing ordering
//! never meets a zero pivot; iterative refinement against the
//! unregularized matrix removes its effect on the step.

use super::bfgs::DampedBfgs;
use super::ldl::{LdlError, LdlSolver};
use super::{
    check_finite, kkt_residuals, NlpOptions, NlpProblem, NlpSolution, NlpStatus, StartPoint,
};
use crate::error::NlpError;

const KAPPA1: f64 = 1e-2;
const KAPPA2: f64 = 1e-2;
const KAPPA_EPS: f64 = 10.0;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;
// filter line search constants
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const ETA_PHI: f64 = 1e-8;
const DELTA_SW: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const ALPHA_MIN_FRAC: f64 = 0.05;
const MAX_SOC: usize = 4;
const KAPPA_SOC: f64 = 0.99;
const MIN_STEP: f64 = 1e-14;
const MAX_LS_FAILURES: usize = 8;
const STATIC_REG: f64 = 1e-9;

/// Reduced problem data over the free variables.
struct Reduced<'p, P: ?Sized> {
    problem: &'p P,
    n: usize,
    m: usize,
    free: Vec<usize>,
    /// Position of each variable among the free ones.
    free_pos: Vec<Option<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    jac_structure: Vec<(usize, usize)>,
    hess_structure: Option<Vec<(usize, usize)>>,
    obj_scale: f64,
}

struct Eval {
    f: f64,
    /// Scaled gradient over the free variables.
    g: Vec<f64>,
    c: Vec<f64>,
    jac: Vec<f64>,
}

impl<'p, P: NlpProblem + ?Sized> Reduced<'p, P> {
    fn full_x(&self, base: &[f64], xf: &[f64]) -> Vec<f64> {
        let mut x = base.to_vec();
        for (k, &j) in self.free.iter().enumerate() {
            x[j] = xf[k];
        }
        x
    }

    fn eval_fc(&self, x: &[f64]) -> Result<(f64, Vec<f64>), NlpError> {
        let f = self.problem.objective(x);
        if !f.is_finite() {
            return Err(NlpError::Evaluation {
                what: "objective",
                index: 0,
            });
        }
        let mut c = vec![0.0; self.m];
        self.problem.constraints(x, &mut c);
        check_finite("constraint", &c)?;
        Ok((f, c))
    }

    fn eval(&self, x: &[f64]) -> Result<Eval, NlpError> {
        let (f, c) = self.eval_fc(x)?;
        let mut g_full = vec![0.0; self.n];
        self.problem.gradient(x, &mut g_full);
        check_finite("gradient", &g_full)?;
        let mut jac = vec![0.0; self.jac_structure.len()];
        self.problem.jacobian_values(x, &mut jac);
        check_finite("jacobian entry", &jac)?;
        let g = self
            .free
            .iter()
            .map(|&j| self.obj_scale * g_full[j])
            .collect();
        Ok(Eval { f, g, c, jac })
    }

    /// `Jᵀλ` restricted to the free variables.
    fn jt_lambda(&self, jac: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.free.len()];
        for (&(i, j), v) in self.jac_structure.iter().zip(jac) {
            if let Some(k) = self.free_pos[j] {
                out[k] += v * lambda[i];
            }
        }
        out
    }
}

/// Fraction-to-the-boundary step for `v + α dv ≥ (1 − τ) v` style bounds.
fn max_step(x: &[f64], dx: &[f64], lo: &[f64], hi: &[f64], tau: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for j in 0..x.len() {
        if dx[j] < 0.0 && lo[j].is_finite() {
            alpha = alpha.min(-tau * (x[j] - lo[j]) / dx[j]);
        }
        if dx[j] > 0.0 && hi[j].is_finite() {
            alpha = alpha.min(tau * (hi[j] - x[j]) / dx[j]);
        }
    }
    alpha
}

fn max_step_dual(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (zi, di) in z.iter().zip(dz) {
        if *di < 0.0 {
            alpha = alpha.min(-tau * zi / di);
        }
    }
    alpha
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Solves `problem` starting from `start` (a primal guess or a previous
/// solution to warm start from).
pub fn solve<'a, P: NlpProblem + ?Sized>(
    problem: &P,
    start: impl Into<StartPoint<'a>>,
    options: &NlpOptions,
) -> Result<NlpSolution, NlpError> {
    let start = start.into();
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let (lo_full, hi_full) = problem.bounds();
    if lo_full.len() != n || hi_full.len() != n {
        return Err(NlpError::InvalidProblem(
            "bound vectors have wrong length".into(),
        ));
    }
    for j in 0..n {
        if lo_full[j].is_nan() || hi_full[j].is_nan() || lo_full[j] > hi_full[j] {
            return Err(NlpError::InvalidProblem(format!(
                "variable {j}: bounds [{}, {}]",
                lo_full[j], hi_full[j]
            )));
        }
    }
    let x_start: &[f64] = match &start {
        StartPoint::Cold(x) => x,
        StartPoint::Warm(s) => &s.x,
    };
    if x_start.len() != n {
        return Err(NlpError::InvalidProblem(format!(
            "initial point has length {}, expected {n}",
            x_start.len()
        )));
    }
    let jac_structure = problem.jacobian_structure();
    for &(i, j) in &jac_structure {
        if i >= m || j >= n {
            return Err(NlpError::InvalidProblem(format!(
                "jacobian entry ({i}, {j}) out of range"
            )));
        }
    }
    let hess_structure = problem.hessian_structure();
    if let Some(hs) = &hess_structure {
        for &(r, c) in hs {
            if r >= n || c > r {
                return Err(NlpError::InvalidProblem(format!(
                    "hessian entry ({r}, {c}) outside the lower triangle"
                )));
            }
        }
    }

    let free: Vec<usize> = (0..n).filter(|&j| lo_full[j] < hi_full[j]).collect();
    let mut free_pos = vec![None; n];
    for (k, &j) in free.iter().enumerate() {
        free_pos[j] = Some(k);
    }
    let nf = free.len();
    let lo: Vec<f64> = free.iter().map(|&j| lo_full[j]).collect();
    let hi: Vec<f64> = free.iter().map(|&j| hi_full[j]).collect();

    // base point with fixed variables at their value
    let mut base: Vec<f64> = x_start.to_vec();
    for j in 0..n {
        if free_pos[j].is_none() {
            base[j] = lo_full[j];
        }
    }

    let mut red = Reduced {
        problem,
        n,
        m,
        free,
        free_pos,
        lo,
        hi,
        jac_structure,
        hess_structure,
        obj_scale: 1.0,
    };

    // push the starting point into the interior
    let warm = matches!(start, StartPoint::Warm(_));
    let (k1, k2) = if warm {
        (1e-10, 1e-10)
    } else {
        (KAPPA1, KAPPA2)
    };
    let mut x: Vec<f64> = red.free.iter().map(|&j| base[j]).collect();
    for k in 0..nf {
        let (l, u) = (red.lo[k], red.hi[k]);
        let pl = if u.is_finite() {
            (k1 * l.abs().max(1.0)).min(k2 * (u - l))
        } else {
            k1 * l.abs().max(1.0)
        };
        let pu = if l.is_finite() {
            (k1 * u.abs().max(1.0)).min(k2 * (u - l))
        } else {
            k1 * u.abs().max(1.0)
        };
        if l.is_finite() && u.is_finite() {
            x[k] = x[k].clamp(l + pl, u - pu);
        } else if l.is_finite() {
            x[k] = x[k].max(l + pl);
        } else if u.is_finite() {
            x[k] = x[k].min(u - pu);
        }
    }

    let x_full = red.full_x(&base, &x);
    let mut ev = red.eval(&x_full)?;
    if options.gradient_scaling {
        let gmax = inf_norm(&ev.g);
        if gmax > S_MAX {
            red.obj_scale = S_MAX / gmax;
            ev.g.iter_mut().for_each(|v| *v *= red.obj_scale);
        }
    }
    let sf = red.obj_scale;

    // KKT pattern: diagonal, Hessian, Jacobian
    let dim = nf + m;
    let mut kkt_entries: Vec<(usize, usize)> = (0..dim).map(|k| (k, k)).collect();
    let mut bfgs = None;
    let hess_map: Vec<Option<(usize, usize)>> = match &red.hess_structure {
        Some(hs) => hs
            .iter()
            .map(|&(r, c)| match (red.free_pos[r], red.free_pos[c]) {
                (Some(a), Some(b)) => Some((a, b)),
                _ => None,
            })
            .collect(),
        None => {
            bfgs = Some(DampedBfgs::new(nf));
            DampedBfgs::structure(nf).into_iter().map(Some).collect()
        }
    };
    let hess_offset = kkt_entries.len();
    kkt_entries.extend(hess_map.iter().map(|e| e.unwrap_or((0, 0))));
    let jac_offset = kkt_entries.len();
    let jac_map: Vec<Option<usize>> = red
        .jac_structure
        .iter()
        .map(|&(_, j)| red.free_pos[j])
        .collect();
    for (&(i, _), fj) in red.jac_structure.iter().zip(&jac_map) {
        kkt_entries.push(match fj {
            Some(k) => (*k, nf + i),
            None => (nf + i, nf + i),
        });
    }
    let mut ldl = LdlSolver::new(dim, kkt_entries.clone());
    ldl.set_pivot_tolerance(1e-15);
    let mut kvals = vec![0.0; kkt_entries.len()];
    let mut kvals_reg = vec![0.0; kkt_entries.len()];

    let fill_jac = |kvals: &mut [f64], jac: &[f64]| {
        for (k, (fj, v)) in jac_map.iter().zip(jac).enumerate() {
            kvals[jac_offset + k] = if fj.is_some() { *v } else { 0.0 };
        }
    };

    // multipliers
    let mut zl: Vec<f64> = red
        .lo
        .iter()
        .map(|l| if l.is_finite() { 1.0 } else { 0.0 })
        .collect();
    let mut zu: Vec<f64> = red
        .hi
        .iter()
        .map(|u| if u.is_finite() { 1.0 } else { 0.0 })
        .collect();
    let mut lambda = vec![0.0; m];
    let mut mu = options.mu_init;

    match &start {
        StartPoint::Warm(sol) => {
            if sol.lambda_eq.len() == m {
                lambda = sol.lambda_eq.iter().map(|v| v * sf).collect();
            }
            for (k, &j) in red.free.iter().enumerate() {
                if red.lo[k].is_finite() {
                    zl[k] = (sol.lambda_lo.get(j).copied().unwrap_or(0.0) * sf).max(1e-12);
                }
                if red.hi[k].is_finite() {
                    zu[k] = (sol.lambda_hi.get(j).copied().unwrap_or(0.0) * sf).max(1e-12);
                }
            }
            let mut comp: f64 = 0.0;
            let mut count = 0usize;
            for k in 0..nf {
                if red.lo[k].is_finite() {
                    comp += zl[k] * (x[k] - red.lo[k]);
                    count += 1;
                }
                if red.hi[k].is_finite() {
                    comp += zu[k] * (red.hi[k] - x[k]);
                    count += 1;
                }
            }
            let avg = if count > 0 { comp / count as f64 } else { 0.0 };
            mu = avg.clamp(options.tol / 10.0, options.mu_init);
        }
        StartPoint::Cold(_) => {
            // least-squares multiplier estimate
            kvals.iter_mut().for_each(|v| *v = 0.0);
            kvals[..nf].iter_mut().for_each(|v| *v = 1.0);
            kvals[nf..dim].iter_mut().for_each(|v| *v = -STATIC_REG);
            fill_jac(&mut kvals, &ev.jac);
            if m > 0 && ldl.factor(&kvals).is_ok() {
                let mut rhs = vec![0.0; dim];
                for k in 0..nf {
                    rhs[k] = -(ev.g[k] - zl[k] + zu[k]);
                }
                let sol = ldl.solve(&rhs);
                let est = &sol[nf..];
                if est.iter().all(|v| v.is_finite()) && inf_norm(est) <= 1e3 {
                    lambda = est.to_vec();
                }
            }
        }
    }

    let n_bounds = red.lo.iter().filter(|l| l.is_finite()).count()
        + red.hi.iter().filter(|u| u.is_finite()).count();
    let error_at = |mu: f64, ev: &Eval, x: &[f64], lambda: &[f64], zl: &[f64], zu: &[f64]| {
        let jtl = red.jt_lambda(&ev.jac, lambda);
        let mut dual: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for k in 0..nf {
            dual = dual.max((ev.g[k] + jtl[k] - zl[k] + zu[k]).abs());
            if red.lo[k].is_finite() {
                comp = comp.max((zl[k] * (x[k] - red.lo[k]) - mu).abs());
            }
            if red.hi[k].is_finite() {
                comp = comp.max((zu[k] * (red.hi[k] - x[k]) - mu).abs());
            }
        }
        let zsum = one_norm(zl) + one_norm(zu);
        let s_d = (S_MAX.max((one_norm(lambda) + zsum) / ((m + nf).max(1) as f64))) / S_MAX;
        let s_c = (S_MAX.max(zsum / (n_bounds.max(1) as f64))) / S_MAX;
        (dual / s_d).max(inf_norm(&ev.c)).max(comp / s_c)
    };

    let theta_init = one_norm(&ev.c);
    let theta_max = 1e4 * theta_init.max(1.0);
    let theta_min = 1e-4 * theta_init.max(1.0);
    let mut filter: Vec<(f64, f64)> = Vec::new();
    let mut filter_mu = f64::NAN;
    let mut delta_w_last: f64 = 0.0;
    let mut ls_failures = 0usize;
    let mut iterations = 0usize;
    let mut last_step = (0.0, 0.0);
    let mut hv = vec![0.0; hess_map.len()];
    let mut raw_h = vec![0.0; red.hess_structure.as_ref().map_or(0, |h| h.len())];

    let status = loop {
        let e0 = error_at(0.0, &ev, &x, &lambda, &zl, &zu);
        if options.verbose {
            eprintln!(
                "ipm {iterations:4} f={:+.10e} err={e0:.3e} inf_pr={:.3e} mu={mu:.1e} step={:.2e}/{:.2e}",
                ev.f,
                inf_norm(&ev.c),
                last_step.0,
                last_step.1
            );
        }
        if e0 <= options.tol {
            break NlpStatus::Optimal;
        }
        if iterations >= options.max_iter {
            break NlpStatus::MaxIter;
        }
        if ls_failures >= MAX_LS_FAILURES {
            break if inf_norm(&ev.c) > options.tol {
                NlpStatus::Infeasible
            } else {
                NlpStatus::MaxIter
            };
        }
        let mu_min = options.tol / 10.0;
        while mu > mu_min && error_at(mu, &ev, &x, &lambda, &zl, &zu) <= KAPPA_EPS * mu {
            mu = mu_min.max((mu / 10.0).min(mu.powf(1.5)));
        }
        let tau = 0.99f64.max(1.0 - mu);

        // Hessian of the scaled Lagrangian
        let x_full = red.full_x(&base, &x);
        match &bfgs {
            Some(b) => b.values(&mut hv),
            None => {
                problem.hessian_values(&x_full, sf, &lambda, &mut raw_h);
                check_finite("hessian entry", &raw_h)?;
                for (k, e) in hess_map.iter().enumerate() {
                    hv[k] = if e.is_some() { raw_h[k] } else { 0.0 };
                }
            }
        }

        let sigma: Vec<f64> = (0..nf)
            .map(|k| {
                let mut s = 0.0;
                if red.lo[k].is_finite() {
                    s += zl[k] / (x[k] - red.lo[k]);
                }
                if red.hi[k].is_finite() {
                    s += zu[k] / (red.hi[k] - x[k]);
                }
                s
            })
            .collect();
        let grad_barrier: Vec<f64> = (0..nf)
            .map(|k| {
                let mut g = ev.g[k];
                if red.lo[k].is_finite() {
                    g -= mu / (x[k] - red.lo[k]);
                }
                if red.hi[k].is_finite() {
                    g += mu / (red.hi[k] - x[k]);
                }
                g
            })
            .collect();
        let jtl = red.jt_lambda(&ev.jac, &lambda);
        let mut rhs = vec![0.0; dim];
        for k in 0..nf {
            rhs[k] = -(grad_barrier[k] + jtl[k]);
        }
        for i in 0..m {
            rhs[nf + i] = -ev.c[i];
        }

        // factorization with inertia correction
        let mut delta_w: f64 = 0.0;
        let mut delta_c: f64 = 0.0;
        let mut attempts = 0;
        loop {
            kvals[..nf]
                .iter_mut()
                .zip(&sigma)
                .for_each(|(v, s)| *v = s + delta_w);
            kvals[nf..dim].iter_mut().for_each(|v| *v = -delta_c);
            kvals[hess_offset..jac_offset].copy_from_slice(&hv);
            fill_jac(&mut kvals, &ev.jac);
            kvals_reg.copy_from_slice(&kvals);
            kvals_reg[..nf].iter_mut().for_each(|v| *v += STATIC_REG);
            kvals_reg[nf..dim].iter_mut().for_each(|v| *v -= STATIC_REG);
            let ok = match ldl.factor(&kvals_reg) {
                Ok(inertia) if inertia.positive == nf && inertia.negative == m => true,
                Ok(_) => false,
                Err(LdlError::Singular { .. }) => {
                    if delta_c == 0.0 {
                        delta_c = 1e-8 * mu.powf(0.25);
                    }
                    false
                }
            };
            if ok {
                if delta_w > 0.0 {
                    delta_w_last = delta_w;
                }
                break;
            }
            attempts += 1;
            if attempts > 60 || delta_w > 1e40 {
                return Err(NlpError::Factorization(format!(
                    "no acceptable inertia at iteration {iterations} (delta_w {delta_w:.1e})"
                )));
            }
            delta_w = if delta_w == 0.0 {
                if delta_w_last == 0.0 {
                    1e-4
                } else {
                    (delta_w_last / 3.0).max(1e-20)
                }
            } else if delta_w_last == 0.0 {
                delta_w * 100.0
            } else {
                delta_w * 8.0
            };
        }

        let solve_refined = |ldl: &LdlSolver, kvals: &[f64], rhs: &[f64]| {
            let mut sol = ldl.solve(rhs);
            let scale = inf_norm(rhs).max(1.0);
            for _ in 0..5 {
                let ax = ldl.multiply(kvals, &sol);
                let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                if inf_norm(&r) <= 1e-15 * scale {
                    break;
                }
                let corr = ldl.solve(&r);
                sol.iter_mut().zip(&corr).for_each(|(s, c)| *s += c);
            }
            sol
        };
        let sol = solve_refined(&ldl, &kvals, &rhs);
        let mut dx = sol[..nf].to_vec();
        let mut dl = sol[nf..].to_vec();

        // filter line search on (θ, φ_μ), θ = ‖c‖₁, φ_μ the barrier objective
        let theta = one_norm(&ev.c);
        let barrier = |x: &[f64]| -> f64 {
            let mut b = 0.0;
            for k in 0..nf {
                if red.lo[k].is_finite() {
                    b -= (x[k] - red.lo[k]).ln();
                }
                if red.hi[k].is_finite() {
                    b -= (red.hi[k] - x[k]).ln();
                }
            }
            b
        };
        if mu != filter_mu {
            filter.clear();
            filter_mu = mu;
        }
        let phi0 = sf * ev.f + mu * barrier(&x);
        let gtd: f64 = grad_barrier.iter().zip(&dx).map(|(g, d)| g * d).sum();
        let switching =
            |alpha: f64| gtd < 0.0 && alpha * (-gtd).powf(S_PHI) > DELTA_SW * theta.powf(S_THETA);
        // returns Some(f_type) when the trial point is acceptable
        let acceptable =
            |alpha: f64, theta_t: f64, phi_t: f64, filter: &[(f64, f64)]| -> Option<bool> {
                if !phi_t.is_finite() || theta_t > theta_max {
                    return None;
                }
                if filter.iter().any(|&(tf, pf)| theta_t >= tf && phi_t >= pf) {
                    return None;
                }
                // comparisons of φ tolerate roundoff relative to φ0
                let le = |a: f64, b: f64| a - b <= 10.0 * f64::EPSILON * phi0.abs().max(1.0);
                if theta <= theta_min && switching(alpha) {
                    le(phi_t, phi0 + ETA_PHI * alpha * gtd).then_some(true)
                } else {
                    (theta_t <= (1.0 - GAMMA_THETA) * theta || le(phi_t, phi0 - GAMMA_PHI * theta))
                        .then_some(false)
                }
            };
        let alpha_min = {
            let mut a = GAMMA_THETA;
            if gtd < 0.0 {
                a = a.min(GAMMA_PHI * theta / -gtd);
                if theta <= theta_min {
                    a = a.min(DELTA_SW * theta.powf(S_THETA) / (-gtd).powf(S_PHI));
                }
            }
            (ALPHA_MIN_FRAC * a).max(MIN_STEP)
        };

        let alpha_max = max_step(&x, &dx, &red.lo, &red.hi, tau);
        let mut alpha = alpha_max;
        let mut accepted: Option<bool> = None;
        let mut x_new = x.clone();
        // a step below roundoff cannot be judged by the filter; take it
        let tiny = theta <= theta_min
            && dx
                .iter()
                .zip(&x)
                .all(|(d, xk)| d.abs() <= 10.0 * f64::EPSILON * (1.0 + xk.abs()));
        if tiny {
            for k in 0..nf {
                x_new[k] = x[k] + alpha * dx[k];
            }
            accepted = Some(true);
        }
        while accepted.is_none() && alpha >= alpha_min {
            for k in 0..nf {
                x_new[k] = x[k] + alpha * dx[k];
            }
            let trial = red.eval_fc(&red.full_x(&base, &x_new));
            if let Ok((ft, ct)) = trial {
                let theta_t = one_norm(&ct);
                let phi_t = sf * ft + mu * barrier(&x_new);
                accepted = acceptable(alpha, theta_t, phi_t, &filter);
                if accepted.is_some() {
                    break;
                }
                if alpha == alpha_max && theta_t >= theta {
                    // second-order corrections for the constraint curvature
                    let mut c_soc: Vec<f64> = (0..m).map(|i| alpha * ev.c[i] + ct[i]).collect();
                    let mut theta_prev = theta_t;
                    for _ in 0..MAX_SOC {
                        let mut rhs_soc = rhs.clone();
                        for i in 0..m {
                            rhs_soc[nf + i] = -c_soc[i];
                        }
                        let sol_soc = solve_refined(&ldl, &kvals, &rhs_soc);
                        let dx_soc = &sol_soc[..nf];
                        let a_soc = max_step(&x, dx_soc, &red.lo, &red.hi, tau);
                        let x_soc: Vec<f64> = (0..nf).map(|k| x[k] + a_soc * dx_soc[k]).collect();
                        let Ok((fs, cs)) = red.eval_fc(&red.full_x(&base, &x_soc)) else {
                            break;
                        };
                        let theta_s = one_norm(&cs);
                        let phi_s = sf * fs + mu * barrier(&x_soc);
                        accepted = acceptable(alpha_max, theta_s, phi_s, &filter);
                        if accepted.is_some() {
                            dx = dx_soc.to_vec();
                            dl = sol_soc[nf..].to_vec();
                            alpha = a_soc;
                            x_new = x_soc;
                            break;
                        }
                        if theta_s > KAPPA_SOC * theta_prev {
                            break;
                        }
                        theta_prev = theta_s;
                        for i in 0..m {
                            c_soc[i] = a_soc * c_soc[i] + cs[i];
                        }
                    }
                    if accepted.is_some() {
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(f_type) => {
                ls_failures = 0;
                if !f_type {
                    filter.push(((1.0 - GAMMA_THETA) * theta, phi0 - GAMMA_PHI * theta));
                }
            }
            None => {
                // no restoration phase: take a short step so that the
                // barrier keeps moving; repeated failures end the solve
                ls_failures += 1;
                alpha = alpha_max.min(1e-2);
                for k in 0..nf {
                    x_new[k] = x[k] + alpha * dx[k];
                }
            }
        }
        last_step = (alpha, alpha_max);

        // dual updates
        let dzl: Vec<f64> = (0..nf)
            .map(|k| {
                if red.lo[k].is_finite() {
                    let s = x[k] - red.lo[k];
                    mu / s - zl[k] - zl[k] / s * dx[k]
                } else {
                    0.0
                }
            })
            .collect();
        let dzu: Vec<f64> = (0..nf)
            .map(|k| {
                if red.hi[k].is_finite() {
                    let s = red.hi[k] - x[k];
                    mu / s - zu[k] + zu[k] / s * dx[k]
                } else {
                    0.0
                }
            })
            .collect();
        let alpha_z = max_step_dual(&zl, &dzl, tau).min(max_step_dual(&zu, &dzu, tau));
        let old_jac = std::mem::take(&mut ev.jac);
        let old_g = std::mem::take(&mut ev.g);
        let x_old = std::mem::replace(&mut x, x_new);
        for i in 0..m {
            lambda[i] += alpha * dl[i];
        }
        for k in 0..nf {
            if red.lo[k].is_finite() {
                zl[k] += alpha_z * dzl[k];
                let s = x[k] - red.lo[k];
                zl[k] = zl[k].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            if red.hi[k].is_finite() {
                zu[k] += alpha_z * dzu[k];
                let s = red.hi[k] - x[k];
                zu[k] = zu[k].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
        }
        ev = red.eval(&red.full_x(&base, &x))?;
        if let Some(b) = bfgs.as_mut() {
            let s: Vec<f64> = x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
            let g_new = red.jt_lambda(&ev.jac, &lambda);
            let g_old = red.jt_lambda(&old_jac, &lambda);
            let y: Vec<f64> = (0..nf)
                .map(|k| (ev.g[k] + g_new[k]) - (old_g[k] + g_old[k]))
                .collect();
            b.update(&s, &y);
        }
        iterations += 1;
    };
    if options.verbose {
        eprintln!(
            "ipm done: {iterations} iterations, {} ordering repairs, factor nnz {}",
            ldl.repairs,
            ldl.nnz_factor()
        );
    }

    // unscale and restore full vectors
    let x_full = red.full_x(&base, &x);
    let lambda_eq: Vec<f64> = lambda.iter().map(|v| v / sf).collect();
    let mut lambda_lo = vec![0.0; n];
    let mut lambda_hi = vec![0.0; n];
    for (k, &j) in red.free.iter().enumerate() {
        lambda_lo[j] = zl[k] / sf;
        lambda_hi[j] = zu[k] / sf;
    }
    if nf < n {
        let mut g = vec![0.0; n];
        problem.gradient(&x_full, &mut g);
        for (&(i, j), v) in red.jac_structure.iter().zip(&ev.jac) {
            g[j] += v * lambda_eq[i];
        }
        for j in 0..n {
            if red.free_pos[j].is_none() {
                if g[j] >= 0.0 {
                    lambda_lo[j] = g[j];
                } else {
                    lambda_hi[j] = -g[j];
                }
            }
        }
    }
    let kkt = kkt_residuals(problem, &x_full, &lambda_eq, &lambda_lo, &lambda_hi);
    log::debug!(
        "ipm finished: {status:?} after {iterations} iterations, kkt {:.3e}, {} ordering repairs",
        kkt.max(),
        ldl.repairs
    );
    Ok(NlpSolution {
        objective: problem.objective(&x_full),
        x: x_full,
        lambda_eq,
        lambda_lo,
        lambda_hi,
        status,
        iterations,
        kkt,
    })
}
