//! Deterministic and chance-constrained optimal gas flow.
//!
//! Both problems share one NLP formulation ([`OgfProblem`]): physics blocks
//! are replicated per stochastic cell while compressor ratios are shared.
//! The deterministic problem is the single-cell case with hard pressure
//! bounds everywhere. In the chance-constrained problem, optimized demands
//! and supplies are recourse decisions (one value per cell), and the
//! minimum pressure of each chance node is enforced in expectation through
//! the penalty Γ(z) = γ·max(z, 0)², represented by a cubic spline whose
//! coefficients are decision variables.

mod problem;

pub use problem::{OgfLayout, OgfProblem};

use nalgebra::{Matrix3, Vector3};

use crate::error::{OgfError, SteadyError};
use crate::network::Network;
use crate::nlp::{self, NlpOptions, NlpSolution, NlpStatus};
use crate::scaling::{nondimensionalize, Scaling};
use crate::steady::solve_steady;
use crate::stochastic::StochasticGrid;

/// One-sided quadratic penalty and flow smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// Curvature γ of Γ(z) = γ·max(z, 0)², z in units of the slack squared
    /// pressure.
    pub gamma: f64,
    /// Smoothing δ (kg/s) in |φ| ≈ √(φ² + δ²).
    pub delta: f64,
    /// Optional half-width of a C² blend of Γ around z = 0.
    pub blend: Option<f64>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            delta: 1e-3,
            blend: None,
        }
    }
}

impl PenaltyConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OgfError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(OgfError::Penalty(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(OgfError::Penalty(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if let Some(w) = self.blend {
            if !(w > 0.0 && w.is_finite()) {
                return Err(OgfError::Penalty(format!(
                    "blend width must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// Quintic p(u) = c3 u³ + c4 u⁴ + c5 u⁵ on u = z + w ∈ [0, 2w] joining
    /// zero (C²) at z = −w with z² (C²) at z = w.
    fn blend_coefficients(w: f64) -> [f64; 3] {
        let l = 2.0 * w;
        let m = Matrix3::new(
            l.powi(3),
            l.powi(4),
            l.powi(5),
            3.0 * l * l,
            4.0 * l.powi(3),
            5.0 * l.powi(4),
            6.0 * l,
            12.0 * l * l,
            20.0 * l.powi(3),
        );
        let c = m
            .lu()
            .solve(&Vector3::new(w * w, 2.0 * w, 2.0))
            .expect("blend system is regular");
        [c[0], c[1], c[2]]
    }

    /// Γ(z).
    pub fn value(&self, z: f64) -> f64 {
        match self.blend {
            Some(w) if z.abs() < w => {
                let [c3, c4, c5] = Self::blend_coefficients(w);
                let u = z + w;
                self.gamma * u * u * u * (c3 + u * (c4 + u * c5))
            }
            _ => {
                let p = z.max(0.0);
                self.gamma * p * p
            }
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self.blend {
            Some(w) if z.abs() < w => {
                let [c3, c4, c5] = Self::blend_coefficients(w);
                let u = z + w;
                self.gamma * u * u * (3.0 * c3 + u * (4.0 * c4 + 5.0 * c5 * u))
            }
            _ => 2.0 * self.gamma * z.max(0.0),
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        match self.blend {
            Some(w) if z.abs() < w => {
                let [c3, c4, c5] = Self::blend_coefficients(w);
                let u = z + w;
                self.gamma * u * (6.0 * c3 + u * (12.0 * c4 + 20.0 * c5 * u))
            }
            _ => {
                if z > 0.0 {
                    2.0 * self.gamma
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OgfOptions {
    pub penalty: PenaltyConfig,
    pub nlp: NlpOptions,
}

/// Decoded state of one stochastic cell (physical units).
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// Perturbation r(ω_k) of the uncertain withdrawal (kg/s).
    pub omega: f64,
    pub mass: f64,
    /// Squared pressures (Pa²), indexed like `Network::nodes`.
    pub pi: Vec<f64>,
    /// Edge flows (kg/s), pipes then compressors.
    pub phi: Vec<f64>,
    /// Total withdrawal per node q_j(ω_k) (kg/s).
    pub q: Vec<f64>,
    /// Optimized demand per entry of `demand_nodes` (kg/s).
    pub d: Vec<f64>,
    /// Optimized supply per entry of `supply_nodes` (kg/s).
    pub s: Vec<f64>,
    /// Locational price: minus the multiplier of the nodal balance row
    /// (currency per kg/s, per cell). Zero at the slack node.
    pub lambda_q: Vec<f64>,
    /// Upper-minus-lower bound multiplier of each optimized demand.
    pub lambda_d: Vec<f64>,
    /// Upper-minus-lower bound multiplier of each optimized supply.
    pub lambda_s: Vec<f64>,
}

impl CellSolution {
    pub fn pressures(&self) -> Vec<f64> {
        self.pi.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceSolution {
    pub node: usize,
    pub epsilon: f64,
    /// Σ a_m ∫ b_m dμ.
    pub sfv_expectation: f64,
    /// Multiplier of the expectation bound.
    pub lambda_cc: f64,
    /// Spline coefficients of Γ(Π_min − Π(ω)).
    pub coefficients: Vec<f64>,
}

/// Decoded optimization result.
#[derive(Debug, Clone, PartialEq)]
pub struct OgfSolution {
    pub status: NlpStatus,
    pub iterations: usize,
    /// E[W_c] − E[W_e].
    pub objective: f64,
    pub expected_compressor_power: f64,
    pub expected_economic_value: f64,
    pub alpha: Vec<f64>,
    pub demand_nodes: Vec<usize>,
    pub supply_nodes: Vec<usize>,
    pub cells: Vec<CellSolution>,
    pub chance: Vec<ChanceSolution>,
    /// Uncertain node index, if the problem carries one.
    pub uncertain_node: Option<usize>,
    /// Largest absolute residual of the physics rows over all cells
    /// (pipe/compressor rows in Pa², balance rows in kg/s, relative).
    pub physics_residual: f64,
    /// Penalty and scaling the problem was assembled with.
    pub penalty: PenaltyConfig,
    pub scaling: Scaling,
    /// Minimum squared pressure per node (Pa²) used by the problem.
    pub pi_min: Vec<f64>,
    pub nlp: NlpSolution,
}

impl OgfSolution {
    /// Expected optimized demand at demand node `i` (index into
    /// `demand_nodes`).
    pub fn expected_demand(&self, i: usize) -> f64 {
        self.cells.iter().map(|c| c.mass * c.d[i]).sum()
    }

    pub fn expected_supply(&self, i: usize) -> f64 {
        self.cells.iter().map(|c| c.mass * c.s[i]).sum()
    }

    pub fn is_optimal(&self) -> bool {
        self.status == NlpStatus::Optimal
    }
}

fn check_boxes(net: &Network) -> Result<(), OgfError> {
    for n in &net.nodes {
        if n.pressure_min >= n.pressure_max {
            return Err(OgfError::InfeasibleBox {
                node: n.id.clone(),
                min: n.pressure_min,
                max: n.pressure_max,
            });
        }
    }
    Ok(())
}

/// Deterministic OGF. Uncertain withdrawals (if any) are placed at their
/// mean and every node keeps its hard pressure bounds.
pub fn assemble_deterministic(
    net: &Network,
    penalty: PenaltyConfig,
) -> Result<OgfProblem, OgfError> {
    assemble_deterministic_with_bounds(net, penalty, None)
}

/// Deterministic OGF with replaced minimum pressures (Pa) per node.
pub fn assemble_deterministic_with_bounds(
    net: &Network,
    penalty: PenaltyConfig,
    pressure_min: Option<&[f64]>,
) -> Result<OgfProblem, OgfError> {
    let mean = net
        .uncertain_nodes()
        .first()
        .and_then(|&j| net.nodes[j].uncertainty.as_ref())
        .map_or(0.0, |u| u.mean());
    assemble_deterministic_at(net, penalty, pressure_min, mean)
}

/// Deterministic OGF with the uncertain withdrawal perturbation fixed at
/// `r` (kg/s).
fn assemble_deterministic_at(
    net: &Network,
    penalty: PenaltyConfig,
    pressure_min: Option<&[f64]>,
    r: f64,
) -> Result<OgfProblem, OgfError> {
    penalty.validate()?;
    check_boxes(net)?;
    let pi_min: Option<Vec<f64>> = pressure_min.map(|p| p.iter().map(|v| v * v).collect());
    if let Some(p) = pressure_min {
        for (j, n) in net.nodes.iter().enumerate() {
            if p[j] >= n.pressure_max {
                return Err(OgfError::InfeasibleBox {
                    node: n.id.clone(),
                    min: p[j],
                    max: n.pressure_max,
                });
            }
        }
    }
    let scaling = nondimensionalize(net);
    let uncertain_node = net.uncertain_nodes().first().copied();
    Ok(problem::build(
        net,
        scaling,
        penalty,
        vec![r],
        vec![1.0],
        uncertain_node,
        r,
        Vec::new(),
        None,
        Vec::new(),
        pi_min.as_deref(),
    ))
}

/// Chance-constrained OGF over the cells of `grids` (exactly one grid, for
/// the single uncertain node).
pub fn assemble_chance_constrained(
    net: &Network,
    grids: &[StochasticGrid],
    penalty: PenaltyConfig,
) -> Result<OgfProblem, OgfError> {
    penalty.validate()?;
    check_boxes(net)?;
    let uncertain = net.uncertain_nodes();
    if uncertain.len() != 1 || grids.len() != 1 {
        let mut ids: Vec<String> = uncertain.iter().map(|&j| net.nodes[j].id.clone()).collect();
        if uncertain.len() == 1 {
            ids.extend(grids.iter().map(|g| g.node_id.clone()));
        }
        return Err(OgfError::UnsupportedUncertainty(ids));
    }
    let node = uncertain[0];
    let grid = &grids[0];
    if grid.node_id != net.nodes[node].id {
        return Err(OgfError::MissingGrid(net.nodes[node].id.clone()));
    }
    let chance_nodes: Vec<usize> = (0..net.nodes.len())
        .filter(|&j| net.nodes[j].is_chance_constrained())
        .collect();
    let mut epsilon = Vec::new();
    for &j in &chance_nodes {
        match net.nodes[j].epsilon {
            Some(e) => epsilon.push(e),
            None => return Err(OgfError::MissingEpsilon(net.nodes[j].id.clone())),
        }
    }
    let scaling = nondimensionalize(net);
    Ok(problem::build(
        net,
        scaling,
        penalty,
        grid.collocation_points(),
        grid.cell_mass().to_vec(),
        Some(node),
        grid.mean_value(),
        chance_nodes,
        Some(grid),
        epsilon,
        None,
    ))
}

/// Physical-unit helper: steady state for fixed controls at one cell.
fn steady_guess(
    net: &Network,
    alpha: &[f64],
    q: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), SteadyError> {
    let state = solve_steady(net, alpha, q)?;
    Ok((state.pi, state.phi))
}

/// Physical withdrawal vector for cell `k` given optimized flows.
fn cell_q(problem: &OgfProblem, k: usize, d: &[f64], s: &[f64]) -> Vec<f64> {
    let sc = &problem.scaling;
    let l = &problem.layout;
    let mut q: Vec<f64> = problem.fixed_q[k]
        .iter()
        .map(|v| sc.flow_from_nd(*v))
        .collect();
    for (i, &j) in l.demand_nodes.iter().enumerate() {
        q[j] += d[i];
    }
    for (i, &j) in l.supply_nodes.iter().enumerate() {
        q[j] -= s[i];
    }
    q
}

/// Fills the per-cell block of `x` from a physical state.
fn write_cell(
    problem: &OgfProblem,
    x: &mut [f64],
    k: usize,
    pi: &[f64],
    phi: &[f64],
    d: &[f64],
    s: &[f64],
) {
    let l = &problem.layout;
    let sc = &problem.scaling;
    for (j, v) in pi.iter().enumerate() {
        x[l.pi(k, j)] = sc.pi_to_nd(*v);
    }
    for (e, v) in phi.iter().enumerate() {
        x[l.phi(k, e)] = sc.flow_to_nd(*v);
    }
    for (i, v) in d.iter().enumerate() {
        x[l.d(k, i)] = sc.flow_to_nd(*v);
    }
    for (i, v) in s.iter().enumerate() {
        x[l.s(k, i)] = sc.flow_to_nd(*v);
    }
}

/// Starting point for the deterministic problem: α = 1 (or α_max if that
/// is infeasible) with steady flows at the base nominations.
pub fn initial_point(net: &Network, problem: &OgfProblem) -> Vec<f64> {
    let l = &problem.layout;
    let mut x = vec![0.0; l.num_variables()];
    let d: Vec<f64> = l
        .demand_nodes
        .iter()
        .map(|&j| net.nodes[j].demand.min(net.nodes[j].demand_max))
        .collect();
    let s: Vec<f64> = l
        .supply_nodes
        .iter()
        .map(|&j| net.nodes[j].supply.min(net.nodes[j].supply_max))
        .collect();
    let candidates = [
        vec![1.0; l.num_compressors],
        net.compressors
            .iter()
            .map(|c| 0.5 * (1.0 + c.alpha_max))
            .collect(),
        net.compressors
            .iter()
            .map(|c| c.alpha_max)
            .collect::<Vec<f64>>(),
    ];
    let mut chosen = None;
    for alpha in &candidates {
        let ok =
            (0..l.num_cells).all(|k| steady_guess(net, alpha, &cell_q(problem, k, &d, &s)).is_ok());
        if ok {
            chosen = Some(alpha.clone());
            break;
        }
    }
    let alpha = chosen.unwrap_or_else(|| candidates[0].clone());
    for (c, a) in alpha.iter().enumerate() {
        x[l.alpha(c)] = *a;
    }
    let slack = net.slack_index();
    let p0 = net.nodes[slack].slack_pressure.expect("slack pressure");
    for k in 0..l.num_cells {
        let (pi, phi) = steady_guess(net, &alpha, &cell_q(problem, k, &d, &s))
            .unwrap_or_else(|_| (vec![p0 * p0; l.num_nodes], vec![0.0; l.num_edges]));
        write_cell(problem, &mut x, k, &pi, &phi, &d, &s);
    }
    fill_spline_variables(problem, &mut x);
    x
}

/// Sets spline coefficients and expectation slacks consistent with the
/// per-cell pressures already in `x`.
fn fill_spline_variables(problem: &OgfProblem, x: &mut [f64]) {
    let l = &problem.layout;
    if problem.chance.is_none() {
        return;
    }
    let data = problem.chance.as_ref().expect("chance data");
    // interpolation of Γ values at the Greville points: solve B a = Γ
    let n = l.num_basis;
    let mut b = nalgebra::DMatrix::zeros(n, n);
    for (i, row) in data.basis_rows.iter().enumerate() {
        for &(m, v) in row {
            b[(i, m)] = v;
        }
    }
    let lu = b.lu();
    for c in 0..l.chance_nodes.len() {
        let z = problem.shortfalls(x, c);
        let g = nalgebra::DVector::from_iterator(n, z.iter().map(|zi| problem.penalty.value(*zi)));
        let a = lu.solve(&g).unwrap_or_else(|| nalgebra::DVector::zeros(n));
        for m in 0..n {
            x[l.a(c, m)] = a[m];
        }
        let expectation: f64 = (0..n).map(|m| data.integrals[m] * a[m]).sum();
        x[l.t(c)] = expectation;
    }
}

/// Solves an assembled problem from `x0` and decodes the result.
pub fn solve_problem(
    problem: &OgfProblem,
    x0: &[f64],
    options: &NlpOptions,
) -> Result<OgfSolution, OgfError> {
    let sol = nlp::solve(problem, x0, options)?;
    Ok(decode(problem, sol))
}

pub fn solve_deterministic(net: &Network, options: &OgfOptions) -> Result<OgfSolution, OgfError> {
    if !net.uncertain_nodes().is_empty() {
        log::warn!("deterministic mode: uncertain withdrawals are replaced by their means");
    }
    let problem = assemble_deterministic(net, options.penalty)?;
    let x0 = initial_point(net, &problem);
    solve_problem(&problem, &x0, &options.nlp)
}

/// Chance-constrained solve, warm started by [`chance_initial_point`].
pub fn solve_chance_constrained(
    net: &Network,
    grid: &StochasticGrid,
    options: &OgfOptions,
) -> Result<OgfSolution, OgfError> {
    let problem = assemble_chance_constrained(net, std::slice::from_ref(grid), options.penalty)?;
    let x0 = chance_initial_point(net, &problem, options);
    solve_problem(&problem, &x0, &options.nlp)
}

/// Warm start for the chance-constrained problem.
///
/// The deterministic problem is solved at the largest withdrawal in the
/// support (falling back to the mean when that is infeasible), so every
/// cell typically starts with Γ = 0 and the expectation bound inactive.
/// Each cell's state is then made consistent with a steady solve at its
/// own withdrawal under those controls.
pub fn chance_initial_point(net: &Network, problem: &OgfProblem, options: &OgfOptions) -> Vec<f64> {
    let l = &problem.layout;
    let (lo, hi) = match problem
        .omega
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, f64)>, w| {
            Some(acc.map_or((w, w), |(a, b)| (a.min(w), b.max(w))))
        }) {
        Some(v) => v,
        None => return initial_point(net, problem),
    };
    let mean: f64 = problem
        .omega
        .iter()
        .zip(&problem.mass)
        .map(|(w, m)| w * m)
        .sum();
    let mut det = None;
    for r in [hi.max(lo), mean] {
        let attempt = assemble_deterministic_at(net, options.penalty, None, r)
            .ok()
            .and_then(|p| {
                let x0 = initial_point(net, &p);
                nlp::solve(&p, &x0, &options.nlp)
                    .ok()
                    .map(|s| decode(&p, s))
            });
        if let Some(sol) = attempt.filter(|s| s.status == NlpStatus::Optimal) {
            det = Some(sol);
            break;
        }
    }
    let det = match det {
        Some(sol) => sol,
        None => {
            log::debug!("deterministic warm start unavailable; using default controls");
            return initial_point(net, problem);
        }
    };
    let alpha = det.alpha.clone();
    let (d, s) = (det.cells[0].d.clone(), det.cells[0].s.clone());
    let mut x = vec![0.0; l.num_variables()];
    for (c, a) in alpha.iter().enumerate() {
        x[l.alpha(c)] = a.clamp(1.0, net.compressors[c].alpha_max);
    }
    for k in 0..l.num_cells {
        let q = cell_q(problem, k, &d, &s);
        let (pi, phi) = steady_guess(net, &alpha, &q)
            .unwrap_or_else(|_| (det.cells[0].pi.clone(), det.cells[0].phi.clone()));
        write_cell(problem, &mut x, k, &pi, &phi, &d, &s);
    }
    fill_spline_variables(problem, &mut x);
    x
}

/// Maps an NLP solution back to physical quantities and prices.
pub fn decode(problem: &OgfProblem, sol: NlpSolution) -> OgfSolution {
    let l = &problem.layout;
    let sc = &problem.scaling;
    let x = &sol.x;
    let s_obj = problem.objective_scale;
    // multiplier of a row in flow units, converted to currency per kg/s
    let flow_dual = s_obj / sc.flow;
    let alpha: Vec<f64> = (0..l.num_compressors).map(|c| x[l.alpha(c)]).collect();

    let mut c_nd = vec![0.0; l.num_constraints()];
    nlp::NlpProblem::constraints(problem, x, &mut c_nd);
    let mut physics_residual: f64 = 0.0;

    let cells: Vec<CellSolution> = (0..l.num_cells)
        .map(|k| {
            let pi: Vec<f64> = (0..l.num_nodes)
                .map(|j| sc.pi_from_nd(x[l.pi(k, j)]))
                .collect();
            let phi: Vec<f64> = (0..l.num_edges)
                .map(|e| sc.flow_from_nd(x[l.phi(k, e)]))
                .collect();
            let d: Vec<f64> = (0..l.demand_nodes.len())
                .map(|i| sc.flow_from_nd(x[l.d(k, i)]))
                .collect();
            let s: Vec<f64> = (0..l.supply_nodes.len())
                .map(|i| sc.flow_from_nd(x[l.s(k, i)]))
                .collect();
            let q = cell_q(problem, k, &d, &s);
            let lambda_q: Vec<f64> = (0..l.num_nodes)
                .map(|j| {
                    l.balance_row(k, j)
                        .map_or(0.0, |r| -flow_dual * sol.lambda_eq[r])
                })
                .collect();
            let lambda_d = (0..l.demand_nodes.len())
                .map(|i| flow_dual * (sol.lambda_hi[l.d(k, i)] - sol.lambda_lo[l.d(k, i)]))
                .collect();
            let lambda_s = (0..l.supply_nodes.len())
                .map(|i| flow_dual * (sol.lambda_hi[l.s(k, i)] - sol.lambda_lo[l.s(k, i)]))
                .collect();
            for e in 0..l.num_edges {
                physics_residual = physics_residual.max(c_nd[l.edge_row(k, e)].abs());
            }
            for j in 0..l.num_nodes {
                if let Some(r) = l.balance_row(k, j) {
                    physics_residual = physics_residual.max(c_nd[r].abs());
                }
            }
            CellSolution {
                omega: problem.omega[k],
                mass: problem.mass[k],
                pi,
                phi,
                q,
                d,
                s,
                lambda_q,
                lambda_d,
                lambda_s,
            }
        })
        .collect();

    let chance = match &problem.chance {
        Some(data) => l
            .chance_nodes
            .iter()
            .enumerate()
            .map(|(c, &node)| {
                let coefficients: Vec<f64> = (0..l.num_basis).map(|m| x[l.a(c, m)]).collect();
                ChanceSolution {
                    node,
                    epsilon: data.epsilon[c],
                    sfv_expectation: coefficients
                        .iter()
                        .zip(&data.integrals)
                        .map(|(a, i)| a * i)
                        .sum(),
                    lambda_cc: s_obj * (sol.lambda_hi[l.t(c)] - sol.lambda_lo[l.t(c)]),
                    coefficients,
                }
            })
            .collect(),
        None => Vec::new(),
    };

    let (power, value) = problem.objective_parts(x);
    OgfSolution {
        status: sol.status,
        iterations: sol.iterations,
        objective: s_obj * (power - value),
        expected_compressor_power: s_obj * power,
        expected_economic_value: s_obj * value,
        alpha,
        demand_nodes: l.demand_nodes.clone(),
        supply_nodes: l.supply_nodes.clone(),
        cells,
        chance,
        uncertain_node: problem.uncertain_node,
        physics_residual,
        penalty: problem.penalty,
        scaling: problem.scaling,
        pi_min: problem.pi_min.iter().map(|v| sc.pi_from_nd(*v)).collect(),
        nlp: sol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_is_one_sided_quadratic() {
        let p = PenaltyConfig::with_gamma(3.0);
        assert_eq!(p.value(-1.0), 0.0);
        assert_eq!(p.value(2.0), 12.0);
        assert_eq!(p.derivative(2.0), 12.0);
        assert_eq!(p.second_derivative(2.0), 6.0);
        assert_eq!(p.second_derivative(-2.0), 0.0);
    }

    #[test]
    fn blended_penalty_is_c2() {
        let w = 1e-2;
        let p = PenaltyConfig {
            gamma: 2.0,
            delta: 0.0,
            blend: Some(w),
        };
        let exact = PenaltyConfig::with_gamma(2.0);
        let eps = 1e-12;
        for z in [-w, w] {
            assert!((p.value(z - eps) - p.value(z + eps)).abs() < 1e-9);
            assert!((p.derivative(z - eps) - p.derivative(z + eps)).abs() < 1e-8);
            assert!((p.second_derivative(z - eps) - p.second_derivative(z + eps)).abs() < 1e-6);
        }
        assert!((p.value(2.0 * w) - exact.value(2.0 * w)).abs() < 1e-15);
        assert!(p.value(0.0) >= 0.0);
    }

    #[test]
    fn rejects_bad_penalty() {
        assert!(PenaltyConfig::with_gamma(0.0).validate().is_err());
        let p = PenaltyConfig {
            gamma: 1.0,
            delta: -1.0,
            blend: None,
        };
        assert!(p.validate().is_err());
    }
}
