//! Variable layout and the assembled optimal gas flow NLP.
//!
//! Everything inside the problem is nondimensional (see [`Scaling`]); the
//! objective is additionally divided by `objective_scale`.
//!
//! Variable order:
//! `[α (per compressor)] [per cell: Π (all nodes), φ (all edges), d, s]
//! [per chance node: a (spline coefficients), t]`.
//!
//! Constraint order:
//! `[per cell: edge rows, balance rows of non-slack nodes]
//! [per chance node: collocation rows, expectation row]`.

use nalgebra::DMatrix;

use super::PenaltyConfig;
use crate::network::{EdgeRef, Network};
use crate::nlp::NlpProblem;
use crate::scaling::Scaling;
use crate::stochastic::StochasticGrid;

/// Index bookkeeping for the flattened variable and constraint vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OgfLayout {
    pub num_cells: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_compressors: usize,
    /// Nodes whose demand is a decision (per cell).
    pub demand_nodes: Vec<usize>,
    /// Nodes whose supply is a decision (per cell).
    pub supply_nodes: Vec<usize>,
    /// Nodes whose minimum pressure is enforced through the chance
    /// constraint.
    pub chance_nodes: Vec<usize>,
    /// Spline coefficients per chance node (0 for deterministic problems).
    pub num_basis: usize,
    pub slack: usize,
    /// Balance-row position within a cell block for each node (`None` for
    /// the slack node).
    balance_pos: Vec<Option<usize>>,
    cell_stride: usize,
    spline_offset: usize,
    rows_per_cell: usize,
}

impl OgfLayout {
    pub fn new(
        net: &Network,
        num_cells: usize,
        chance_nodes: Vec<usize>,
        num_basis: usize,
    ) -> Self {
        let num_nodes = net.nodes.len();
        let num_edges = net.num_edges();
        let demand_nodes: Vec<usize> = (0..num_nodes)
            .filter(|&j| net.nodes[j].demand_optimized)
            .collect();
        let supply_nodes: Vec<usize> = (0..num_nodes)
            .filter(|&j| net.nodes[j].supply_optimized)
            .collect();
        let slack = net.slack_index();
        let mut balance_pos = vec![None; num_nodes];
        let mut next = 0;
        for (j, pos) in balance_pos.iter_mut().enumerate() {
            if j != slack {
                *pos = Some(next);
                next += 1;
            }
        }
        let cell_stride = num_nodes + num_edges + demand_nodes.len() + supply_nodes.len();
        let num_compressors = net.compressors.len();
        Self {
            num_cells,
            num_nodes,
            num_edges,
            num_compressors,
            spline_offset: num_compressors + num_cells * cell_stride,
            rows_per_cell: num_edges + num_nodes - 1,
            demand_nodes,
            supply_nodes,
            chance_nodes,
            num_basis,
            slack,
            balance_pos,
            cell_stride,
        }
    }

    pub fn num_variables(&self) -> usize {
        self.spline_offset + self.chance_nodes.len() * (self.num_basis + 1)
    }

    pub fn num_constraints(&self) -> usize {
        self.num_cells * self.rows_per_cell + self.chance_nodes.len() * (self.num_basis + 1)
    }

    pub fn alpha(&self, c: usize) -> usize {
        c
    }

    fn cell_base(&self, k: usize) -> usize {
        self.num_compressors + k * self.cell_stride
    }

    pub fn pi(&self, k: usize, j: usize) -> usize {
        self.cell_base(k) + j
    }

    pub fn phi(&self, k: usize, e: usize) -> usize {
        self.cell_base(k) + self.num_nodes + e
    }

    /// `i` indexes `demand_nodes`.
    pub fn d(&self, k: usize, i: usize) -> usize {
        self.cell_base(k) + self.num_nodes + self.num_edges + i
    }

    /// `i` indexes `supply_nodes`.
    pub fn s(&self, k: usize, i: usize) -> usize {
        self.cell_base(k) + self.num_nodes + self.num_edges + self.demand_nodes.len() + i
    }

    /// `c` indexes `chance_nodes`.
    pub fn a(&self, c: usize, m: usize) -> usize {
        self.spline_offset + c * (self.num_basis + 1) + m
    }

    pub fn t(&self, c: usize) -> usize {
        self.spline_offset + c * (self.num_basis + 1) + self.num_basis
    }

    pub fn edge_row(&self, k: usize, e: usize) -> usize {
        k * self.rows_per_cell + e
    }

    /// Balance row of node `j` in cell `k`; `None` for the slack node.
    pub fn balance_row(&self, k: usize, j: usize) -> Option<usize> {
        self.balance_pos[j].map(|p| k * self.rows_per_cell + self.num_edges + p)
    }

    pub fn collocation_row(&self, c: usize, i: usize) -> usize {
        self.num_cells * self.rows_per_cell + c * (self.num_basis + 1) + i
    }

    pub fn expectation_row(&self, c: usize) -> usize {
        self.num_cells * self.rows_per_cell + c * (self.num_basis + 1) + self.num_basis
    }
}

/// Spline data for the chance constraint rows.
#[derive(Debug, Clone)]
pub(crate) struct ChanceData {
    /// `W[i][k]`: weight of cell k in the Π interpolant at Greville point i.
    pub weights: DMatrix<f64>,
    /// Nonzero basis values `(m, b_m(g_i))` per Greville point.
    pub basis_rows: Vec<Vec<(usize, f64)>>,
    pub integrals: Vec<f64>,
    pub epsilon: Vec<f64>,
}

/// The assembled NLP. Build it with
/// [`assemble_deterministic`](super::assemble_deterministic) or
/// [`assemble_chance_constrained`](super::assemble_chance_constrained).
#[derive(Debug, Clone)]
pub struct OgfProblem {
    pub layout: OgfLayout,
    pub scaling: Scaling,
    /// Objective unit: physical objective = `objective_scale` × NLP objective.
    pub objective_scale: f64,
    pub penalty: PenaltyConfig,
    pub(crate) from_to: Vec<(usize, usize)>,
    /// Nondimensional resistance per pipe edge (0 for compressors).
    pub(crate) kappa: Vec<f64>,
    pub(crate) num_pipes: usize,
    pub(crate) eta: Vec<f64>,
    pub(crate) exponent: Vec<f64>,
    pub(crate) alpha_max: Vec<f64>,
    pub(crate) pi_lo: Vec<f64>,
    pub(crate) pi_hi: Vec<f64>,
    pub(crate) slack_pi: f64,
    /// Fixed nondimensional withdrawal per cell and node.
    pub(crate) fixed_q: Vec<Vec<f64>>,
    /// Per-cell perturbation r(ω_k) of the uncertain node (kg/s).
    pub(crate) omega: Vec<f64>,
    pub(crate) uncertain_node: Option<usize>,
    pub(crate) mass: Vec<f64>,
    pub(crate) demand_price: Vec<f64>,
    pub(crate) supply_price: Vec<f64>,
    pub(crate) d_max: Vec<f64>,
    pub(crate) s_max: Vec<f64>,
    pub(crate) delta: f64,
    /// Constant part of the nondimensional objective (fixed trades and the
    /// value of the expected uncertain withdrawal).
    pub(crate) constant: f64,
    pub(crate) chance: Option<ChanceData>,
    /// Nondimensional minimum squared pressure per node.
    pub(crate) pi_min: Vec<f64>,
}

fn smooth_abs(phi: f64, delta: f64) -> f64 {
    (phi * phi + delta * delta).sqrt()
}

impl OgfProblem {
    pub fn grid_cells(&self) -> usize {
        self.layout.num_cells
    }

    /// Cell perturbation values r(ω_k) (kg/s).
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.mass
    }

    fn cell_withdrawal(&self, x: &[f64], k: usize, j: usize) -> f64 {
        let l = &self.layout;
        let mut q = self.fixed_q[k][j];
        if let Some(i) = l.demand_nodes.iter().position(|&n| n == j) {
            q += x[l.d(k, i)];
        }
        if let Some(i) = l.supply_nodes.iter().position(|&n| n == j) {
            q -= x[l.s(k, i)];
        }
        q
    }

    /// Interpolated nondimensional Π of chance node `c` at every Greville
    /// point.
    fn greville_pi(&self, x: &[f64], c: usize) -> Vec<f64> {
        let data = self.chance.as_ref().expect("chance data");
        let j = self.layout.chance_nodes[c];
        let cells: Vec<f64> = (0..self.layout.num_cells)
            .map(|k| x[self.layout.pi(k, j)])
            .collect();
        (0..data.weights.nrows())
            .map(|i| {
                (0..cells.len())
                    .map(|k| data.weights[(i, k)] * cells[k])
                    .sum()
            })
            .collect()
    }

    /// Shortfall z = Π̂_min − Π̂ at each Greville point for chance node `c`.
    pub(crate) fn shortfalls(&self, x: &[f64], c: usize) -> Vec<f64> {
        let j = self.layout.chance_nodes[c];
        self.greville_pi(x, c)
            .into_iter()
            .map(|p| self.pi_min[j] - p)
            .collect()
    }

    /// Expected compressor power and expected economic value in NLP units.
    pub(crate) fn objective_parts(&self, x: &[f64]) -> (f64, f64) {
        let l = &self.layout;
        let mut power = 0.0;
        let mut value = self.constant;
        for k in 0..l.num_cells {
            let mk = self.mass[k];
            for c in 0..l.num_compressors {
                let a = x[l.alpha(c)];
                let phi = x[l.phi(k, self.num_pipes + c)];
                power += mk
                    * self.eta[c]
                    * (a.powf(self.exponent[c]) - 1.0)
                    * smooth_abs(phi, self.delta);
            }
            for (i, _) in l.demand_nodes.iter().enumerate() {
                value += mk * self.demand_price[i] * x[l.d(k, i)];
            }
            for (i, _) in l.supply_nodes.iter().enumerate() {
                value -= mk * self.supply_price[i] * x[l.s(k, i)];
            }
        }
        (power, value)
    }

    /// Emits `(row, col, value)` for every Jacobian entry in a fixed order.
    fn jacobian_terms(&self, x: &[f64], mut emit: impl FnMut(usize, usize, f64)) {
        let l = &self.layout;
        for k in 0..l.num_cells {
            for (e, &(from, to)) in self.from_to.iter().enumerate() {
                let row = l.edge_row(k, e);
                if e < self.num_pipes {
                    let phi = x[l.phi(k, e)];
                    let s = smooth_abs(phi, self.delta);
                    emit(row, l.pi(k, from), 1.0);
                    emit(row, l.pi(k, to), -1.0);
                    emit(
                        row,
                        l.phi(k, e),
                        -self.kappa[e] * (2.0 * phi * phi + self.delta * self.delta) / s,
                    );
                } else {
                    let c = e - self.num_pipes;
                    emit(row, l.pi(k, to), 1.0);
                    emit(row, l.pi(k, from), -x[l.alpha(c)]);
                    emit(row, l.alpha(c), -x[l.pi(k, from)]);
                }
            }
            for (e, &(from, to)) in self.from_to.iter().enumerate() {
                if let Some(row) = l.balance_row(k, from) {
                    emit(row, l.phi(k, e), -1.0);
                }
                if let Some(row) = l.balance_row(k, to) {
                    emit(row, l.phi(k, e), 1.0);
                }
            }
            for (i, &j) in l.demand_nodes.iter().enumerate() {
                if let Some(row) = l.balance_row(k, j) {
                    emit(row, l.d(k, i), -1.0);
                }
            }
            for (i, &j) in l.supply_nodes.iter().enumerate() {
                if let Some(row) = l.balance_row(k, j) {
                    emit(row, l.s(k, i), 1.0);
                }
            }
        }
        if let Some(data) = &self.chance {
            for (c, &j) in l.chance_nodes.iter().enumerate() {
                let z = self.shortfalls(x, c);
                for (i, zi) in z.iter().enumerate() {
                    let row = l.collocation_row(c, i);
                    let dg = self.penalty.derivative(*zi);
                    for k in 0..l.num_cells {
                        emit(row, l.pi(k, j), -dg * data.weights[(i, k)]);
                    }
                    for &(m, b) in &data.basis_rows[i] {
                        emit(row, l.a(c, m), -b);
                    }
                }
                let row = l.expectation_row(c);
                for m in 0..l.num_basis {
                    emit(row, l.a(c, m), data.integrals[m]);
                }
                emit(row, l.t(c), -1.0);
            }
        }
    }

    /// Emits lower-triangle Hessian entries of
    /// `obj_factor·∇²f + Σ λ_i ∇²c_i` in a fixed order.
    fn hessian_terms(
        &self,
        x: &[f64],
        obj_factor: f64,
        lambda: &[f64],
        mut emit: impl FnMut(usize, usize, f64),
    ) {
        let l = &self.layout;
        let mut lower = |r: usize, c: usize, v: f64| {
            if r >= c {
                emit(r, c, v)
            } else {
                emit(c, r, v)
            }
        };
        for c in 0..l.num_compressors {
            let a = x[l.alpha(c)];
            let m = self.exponent[c];
            let mut haa = 0.0;
            for k in 0..l.num_cells {
                let phi = x[l.phi(k, self.num_pipes + c)];
                haa += self.mass[k]
                    * self.eta[c]
                    * m
                    * (m - 1.0)
                    * a.powf(m - 2.0)
                    * smooth_abs(phi, self.delta);
            }
            lower(l.alpha(c), l.alpha(c), obj_factor * haa);
        }
        for k in 0..l.num_cells {
            let mk = self.mass[k];
            for (e, &(from, _)) in self.from_to.iter().enumerate() {
                let row = l.edge_row(k, e);
                let phi = x[l.phi(k, e)];
                let s = smooth_abs(phi, self.delta);
                let d2 = self.delta * self.delta;
                if e < self.num_pipes {
                    let g2 = phi * (2.0 * phi * phi + 3.0 * d2) / (s * s * s);
                    lower(l.phi(k, e), l.phi(k, e), -lambda[row] * self.kappa[e] * g2);
                } else {
                    let c = e - self.num_pipes;
                    let a = x[l.alpha(c)];
                    let m = self.exponent[c];
                    let w = obj_factor * mk * self.eta[c];
                    lower(
                        l.phi(k, e),
                        l.phi(k, e),
                        w * (a.powf(m) - 1.0) * d2 / (s * s * s),
                    );
                    lower(l.phi(k, e), l.alpha(c), w * m * a.powf(m - 1.0) * phi / s);
                    lower(l.pi(k, from), l.alpha(c), -lambda[row]);
                }
            }
        }
        if let Some(data) = &self.chance {
            for (c, &j) in l.chance_nodes.iter().enumerate() {
                let z = self.shortfalls(x, c);
                let coef: Vec<f64> = z
                    .iter()
                    .enumerate()
                    .map(|(i, zi)| {
                        lambda[l.collocation_row(c, i)] * self.penalty.second_derivative(*zi)
                    })
                    .collect();
                for k1 in 0..l.num_cells {
                    for k2 in 0..=k1 {
                        let v: f64 = coef
                            .iter()
                            .enumerate()
                            .map(|(i, ci)| ci * data.weights[(i, k1)] * data.weights[(i, k2)])
                            .sum();
                        lower(l.pi(k1, j), l.pi(k2, j), v);
                    }
                }
            }
        }
    }
}

impl NlpProblem for OgfProblem {
    fn num_variables(&self) -> usize {
        self.layout.num_variables()
    }

    fn num_constraints(&self) -> usize {
        self.layout.num_constraints()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let l = &self.layout;
        let n = l.num_variables();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for c in 0..l.num_compressors {
            lo[l.alpha(c)] = 1.0;
            hi[l.alpha(c)] = self.alpha_max[c];
        }
        for k in 0..l.num_cells {
            for j in 0..l.num_nodes {
                lo[l.pi(k, j)] = self.pi_lo[j];
                hi[l.pi(k, j)] = self.pi_hi[j];
            }
            lo[l.pi(k, l.slack)] = self.slack_pi;
            hi[l.pi(k, l.slack)] = self.slack_pi;
            for i in 0..l.demand_nodes.len() {
                lo[l.d(k, i)] = 0.0;
                hi[l.d(k, i)] = self.d_max[i];
            }
            for i in 0..l.supply_nodes.len() {
                lo[l.s(k, i)] = 0.0;
                hi[l.s(k, i)] = self.s_max[i];
            }
        }
        if let Some(data) = &self.chance {
            for c in 0..l.chance_nodes.len() {
                hi[l.t(c)] = data.epsilon[c];
            }
        }
        (lo, hi)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let (power, value) = self.objective_parts(x);
        power - value
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        let l = &self.layout;
        for k in 0..l.num_cells {
            let mk = self.mass[k];
            for c in 0..l.num_compressors {
                let a = x[l.alpha(c)];
                let m = self.exponent[c];
                let e = l.phi(k, self.num_pipes + c);
                let phi = x[e];
                let s = smooth_abs(phi, self.delta);
                g[l.alpha(c)] += mk * self.eta[c] * m * a.powf(m - 1.0) * s;
                g[e] += mk * self.eta[c] * (a.powf(m) - 1.0) * phi / s;
            }
            for i in 0..l.demand_nodes.len() {
                g[l.d(k, i)] -= mk * self.demand_price[i];
            }
            for i in 0..l.supply_nodes.len() {
                g[l.s(k, i)] += mk * self.supply_price[i];
            }
        }
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        for k in 0..l.num_cells {
            for (e, &(from, to)) in self.from_to.iter().enumerate() {
                let row = l.edge_row(k, e);
                out[row] = if e < self.num_pipes {
                    let phi = x[l.phi(k, e)];
                    x[l.pi(k, from)]
                        - x[l.pi(k, to)]
                        - self.kappa[e] * phi * smooth_abs(phi, self.delta)
                } else {
                    x[l.pi(k, to)] - x[l.alpha(e - self.num_pipes)] * x[l.pi(k, from)]
                };
            }
            for j in 0..l.num_nodes {
                if let Some(row) = l.balance_row(k, j) {
                    out[row] = -self.cell_withdrawal(x, k, j);
                }
            }
            for (e, &(from, to)) in self.from_to.iter().enumerate() {
                let phi = x[l.phi(k, e)];
                if let Some(row) = l.balance_row(k, from) {
                    out[row] -= phi;
                }
                if let Some(row) = l.balance_row(k, to) {
                    out[row] += phi;
                }
            }
        }
        if let Some(data) = &self.chance {
            for c in 0..l.chance_nodes.len() {
                let z = self.shortfalls(x, c);
                for (i, zi) in z.iter().enumerate() {
                    let fitted: f64 = data.basis_rows[i]
                        .iter()
                        .map(|&(m, b)| b * x[l.a(c, m)])
                        .sum();
                    out[l.collocation_row(c, i)] = self.penalty.value(*zi) - fitted;
                }
                let expectation: f64 = (0..l.num_basis)
                    .map(|m| data.integrals[m] * x[l.a(c, m)])
                    .sum();
                out[l.expectation_row(c)] = expectation - x[l.t(c)];
            }
        }
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        let x = vec![1.0; self.num_variables()];
        let mut s = Vec::new();
        self.jacobian_terms(&x, |r, c, _| s.push((r, c)));
        s
    }

    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
        let mut k = 0;
        self.jacobian_terms(x, |_, _, v| {
            vals[k] = v;
            k += 1;
        });
    }

    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        let x = vec![1.0; self.num_variables()];
        let lambda = vec![0.0; self.num_constraints()];
        let mut s = Vec::new();
        self.hessian_terms(&x, 1.0, &lambda, |r, c, _| s.push((r, c)));
        Some(s)
    }

    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], vals: &mut [f64]) {
        let mut k = 0;
        self.hessian_terms(x, obj_factor, lambda, |_, _, v| {
            vals[k] = v;
            k += 1;
        });
    }
}

/// Shared assembly for both problem flavors. `cells` holds, per cell, the
/// perturbation r(ω_k) of the uncertain node and the cell mass.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build(
    net: &Network,
    scaling: Scaling,
    penalty: PenaltyConfig,
    omega: Vec<f64>,
    mass: Vec<f64>,
    uncertain_node: Option<usize>,
    expected_r: f64,
    chance_nodes: Vec<usize>,
    grid: Option<&StochasticGrid>,
    epsilon: Vec<f64>,
    pi_min_override: Option<&[f64]>,
) -> OgfProblem {
    let num_cells = omega.len();
    let num_basis = if chance_nodes.is_empty() {
        0
    } else {
        grid.expect("grid for chance rows").basis().len()
    };
    let layout = OgfLayout::new(net, num_cells, chance_nodes.clone(), num_basis);

    let max_price = net
        .nodes
        .iter()
        .map(|n| n.demand_price.abs().max(n.supply_price.abs()))
        .chain(net.compressors.iter().map(|c| c.eta.abs()))
        .fold(0.0, f64::max);
    let objective_scale = if max_price > 0.0 {
        scaling.flow * max_price
    } else {
        1.0
    };
    let f_over_s = scaling.flow / objective_scale;

    let from_to = net.incidence().columns;
    let kappa = net
        .edges()
        .map(|e| match e {
            EdgeRef::Pipe(i) => scaling.resistance_to_nd(net.pipes[i].resistance),
            EdgeRef::Compressor(_) => 0.0,
        })
        .collect();
    let pi_min: Vec<f64> = match pi_min_override {
        Some(v) => v.iter().map(|p| scaling.pi_to_nd(*p)).collect(),
        None => net
            .nodes
            .iter()
            .map(|n| scaling.pi_to_nd(n.pressure_min.powi(2)))
            .collect(),
    };
    let pi_hi: Vec<f64> = net
        .nodes
        .iter()
        .map(|n| scaling.pi_to_nd(n.pressure_max.powi(2)))
        .collect();
    let pi_lo: Vec<f64> = (0..net.nodes.len())
        .map(|j| {
            if chance_nodes.contains(&j) {
                0.0
            } else {
                pi_min[j]
            }
        })
        .collect();
    let slack = net.slack_index();
    let p0 = net.nodes[slack].slack_pressure.expect("slack pressure");

    let fixed_q: Vec<Vec<f64>> = omega
        .iter()
        .map(|&r| {
            net.nodes
                .iter()
                .enumerate()
                .map(|(j, n)| {
                    let mut q = 0.0;
                    if !n.demand_optimized {
                        q += n.demand;
                    }
                    if !n.supply_optimized {
                        q -= n.supply;
                    }
                    if Some(j) == uncertain_node {
                        q += r;
                    }
                    scaling.flow_to_nd(q)
                })
                .collect()
        })
        .collect();

    let mut constant = 0.0;
    for (j, n) in net.nodes.iter().enumerate() {
        if !n.demand_optimized {
            constant += n.demand_price * n.demand;
        }
        if !n.supply_optimized {
            constant -= n.supply_price * n.supply;
        }
        if Some(j) == uncertain_node {
            constant += n.demand_price * expected_r;
        }
    }
    constant /= objective_scale;

    let chance = grid.filter(|_| !layout.chance_nodes.is_empty()).map(|g| {
        let interp = g.interpolant();
        let greville = g.greville();
        let mut weights = DMatrix::zeros(greville.len(), num_cells);
        for (i, &t) in greville.iter().enumerate() {
            for (k, w) in interp.weights_at(t).into_iter().enumerate() {
                weights[(i, k)] = w;
            }
        }
        let basis_rows = greville
            .iter()
            .map(|&t| {
                let (first, vals) = g.basis().eval_nonzero(t);
                vals.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (first + j, *v))
                    .collect()
            })
            .collect();
        ChanceData {
            weights,
            basis_rows,
            integrals: g.basis_integrals().to_vec(),
            epsilon: epsilon.clone(),
        }
    });

    OgfProblem {
        eta: net.compressors.iter().map(|c| c.eta * f_over_s).collect(),
        exponent: net.compressors.iter().map(|c| c.m).collect(),
        alpha_max: net.compressors.iter().map(|c| c.alpha_max).collect(),
        demand_price: layout
            .demand_nodes
            .iter()
            .map(|&j| net.nodes[j].demand_price * f_over_s)
            .collect(),
        supply_price: layout
            .supply_nodes
            .iter()
            .map(|&j| net.nodes[j].supply_price * f_over_s)
            .collect(),
        d_max: layout
            .demand_nodes
            .iter()
            .map(|&j| scaling.flow_to_nd(net.nodes[j].demand_max))
            .collect(),
        s_max: layout
            .supply_nodes
            .iter()
            .map(|&j| scaling.flow_to_nd(net.nodes[j].supply_max))
            .collect(),
        delta: scaling.flow_to_nd(penalty.delta),
        num_pipes: net.pipes.len(),
        slack_pi: scaling.pi_to_nd(p0 * p0),
        layout,
        scaling,
        objective_scale,
        penalty,
        from_to,
        kappa,
        pi_lo,
        pi_hi,
        fixed_q,
        omega,
        uncertain_node,
        mass,
        constant,
        chance,
        pi_min,
    }
}
