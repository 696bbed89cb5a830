//! Post-processing of optimization results: distributions of per-cell
//! quantities, the first-order pricing identity at optimized nodes and
//! Monte Carlo validation of the chance constraints.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::PricingError;
use crate::network::Network;
use crate::nlp::NlpStatus;
use crate::ogf::OgfSolution;
use crate::steady::solve_steady;
use crate::stochastic::StochasticGrid;

/// Default number of samples for density estimates and Monte Carlo runs.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Number of evaluation points of a kernel density estimate.
pub const DENSITY_POINTS: usize = 512;
/// Tolerance of the pricing identity.
pub const KKT_TOLERANCE: f64 = 1e-5;

/// Which per-cell quantity to look at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    /// Nodal pressure (Pa).
    Pressure(String),
    /// Edge flow (kg/s).
    Flow(String),
    /// Raw per-cell balance multiplier.
    LambdaQ(String),
    /// Balance multiplier divided by the cell mass.
    LambdaQPerMass(String),
    /// Optimized demand (kg/s).
    Demand(String),
    /// Optimized supply (kg/s).
    Supply(String),
}

impl FromStr for Selector {
    type Err = String;

    /// Parses `kind@id`, e.g. `pressure@N3` or `lambda_q@J5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s
            .split_once('@')
            .ok_or_else(|| format!("selector {s:?} must look like kind@id"))?;
        let id = id.to_string();
        match kind {
            "pressure" => Ok(Self::Pressure(id)),
            "flow" => Ok(Self::Flow(id)),
            "lambda_q" => Ok(Self::LambdaQ(id)),
            "lambda_q_per_mass" => Ok(Self::LambdaQPerMass(id)),
            "d" => Ok(Self::Demand(id)),
            "s" => Ok(Self::Supply(id)),
            other => Err(format!("unknown selector kind {other:?}")),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, id) = match self {
            Self::Pressure(id) => ("pressure", id),
            Self::Flow(id) => ("flow", id),
            Self::LambdaQ(id) => ("lambda_q", id),
            Self::LambdaQPerMass(id) => ("lambda_q_per_mass", id),
            Self::Demand(id) => ("d", id),
            Self::Supply(id) => ("s", id),
        };
        write!(f, "{kind}@{id}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Discrete,
    Density,
}

/// Gaussian kernel density estimate evaluated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl Density {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Grid point with the largest density.
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        self.grid[i]
    }
}

/// Distribution of a per-cell quantity: one atom per cell, optionally with
/// a density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution {
    pub support: Vec<f64>,
    pub mass: Vec<f64>,
    /// Perturbation value of each cell (kg/s).
    pub omega: Vec<f64>,
    pub kind: DistributionKind,
    pub density: Option<Density>,
}

impl ValueDistribution {
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(v, m)| v * m)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Number of distinct support values, comparing with relative
    /// tolerance `tol`.
    pub fn distinct_values(&self, tol: f64) -> usize {
        let mut v = self.support.clone();
        v.sort_by(f64::total_cmp);
        let mut count = 0;
        let mut last: Option<f64> = None;
        for x in v {
            if last.is_none_or(|l| (x - l).abs() > tol * x.abs().max(l.abs()).max(1e-300)) {
                count += 1;
                last = Some(x);
            }
        }
        count
    }
}

fn node_of(net: &Network, id: &str) -> Result<usize, PricingError> {
    net.node_index(id)
        .ok_or_else(|| PricingError::UnknownNode(id.to_string()))
}

/// Per-cell values of `selector`.
pub fn cell_values(
    net: &Network,
    sol: &OgfSolution,
    selector: &Selector,
) -> Result<Vec<f64>, PricingError> {
    let demand_slot = |id: &str| -> Result<usize, PricingError> {
        let j = node_of(net, id)?;
        sol.demand_nodes
            .iter()
            .position(|&n| n == j)
            .ok_or_else(|| PricingError::NotOptimized(id.to_string()))
    };
    let supply_slot = |id: &str| -> Result<usize, PricingError> {
        let j = node_of(net, id)?;
        sol.supply_nodes
            .iter()
            .position(|&n| n == j)
            .ok_or_else(|| PricingError::NotOptimized(id.to_string()))
    };
    let values = match selector {
        Selector::Pressure(id) => {
            let j = node_of(net, id)?;
            sol.cells.iter().map(|c| c.pi[j].max(0.0).sqrt()).collect()
        }
        Selector::Flow(id) => {
            let e = net
                .edge_index(id)
                .ok_or_else(|| PricingError::UnknownEdge(id.clone()))?;
            sol.cells.iter().map(|c| c.phi[e]).collect()
        }
        Selector::LambdaQ(id) => {
            let j = node_of(net, id)?;
            sol.cells.iter().map(|c| c.lambda_q[j]).collect()
        }
        Selector::LambdaQPerMass(id) => {
            let j = node_of(net, id)?;
            sol.cells.iter().map(|c| c.lambda_q[j] / c.mass).collect()
        }
        Selector::Demand(id) => {
            let i = demand_slot(id)?;
            sol.cells.iter().map(|c| c.d[i]).collect()
        }
        Selector::Supply(id) => {
            let i = supply_slot(id)?;
            sol.cells.iter().map(|c| c.s[i]).collect()
        }
    };
    Ok(values)
}

/// Discrete distribution of `selector` over the cells; with a grid and
/// `samples > 0`, also a Gaussian KDE of the quantity under the measure.
///
/// Density samples are stratified inverse-CDF draws u_i = (i + ½)/N mapped
/// through the cubic interpolant of the per-cell values, so the estimate
/// is deterministic.
pub fn distribution_of(
    net: &Network,
    sol: &OgfSolution,
    selector: &Selector,
    grid: Option<&StochasticGrid>,
    samples: usize,
) -> Result<ValueDistribution, PricingError> {
    let support = cell_values(net, sol, selector)?;
    let mass: Vec<f64> = sol.cells.iter().map(|c| c.mass).collect();
    let omega: Vec<f64> = sol.cells.iter().map(|c| c.omega).collect();
    let density = match grid {
        Some(g) if samples > 0 && g.num_cells() == support.len() => {
            let draws: Vec<f64> = (0..samples)
                .map(|i| {
                    let (t, _) = g.sample((i as f64 + 0.5) / samples as f64);
                    g.interpolant().interpolate(&support, t)
                })
                .collect();
            Some(gaussian_kde(&draws, DENSITY_POINTS))
        }
        _ => None,
    };
    Ok(ValueDistribution {
        kind: if density.is_some() {
            DistributionKind::Density
        } else {
            DistributionKind::Discrete
        },
        support,
        mass,
        omega,
        density,
    })
}

/// Silverman's rule of thumb, 0.9·min(σ, IQR/1.34)·n^(−1/5). Falls back
/// to a small multiple of the data scale for (nearly) constant data.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 {
        var.sqrt().min(iqr / 1.34)
    } else {
        var.sqrt()
    };
    let h = 0.9 * spread * n.powf(-0.2);
    let floor = 1e-6 * mean.abs().max(1.0);
    if h > floor {
        h
    } else {
        floor
    }
}

/// Gaussian KDE on `points` equally spaced abscissae spanning the data
/// range plus five bandwidths on each side.
pub fn gaussian_kde(samples: &[f64], points: usize) -> Density {
    assert!(!samples.is_empty() && points >= 2);
    let h = silverman_bandwidth(samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let values = grid
        .par_iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    Density {
        grid,
        values,
        bandwidth: h,
    }
}

/// One cell of the pricing identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCell {
    pub cell: usize,
    pub mass: f64,
    pub lambda_q: f64,
    /// λ_d (demand) or λ_s (supply).
    pub lambda_bound: f64,
    /// Price times cell mass.
    pub reference: f64,
    pub residual: f64,
}

/// Per-cell check of λ_q + λ_d = c_d·mass (demand) or λ_q − λ_s = c_s·mass
/// (supply) at an optimized node.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub node: String,
    pub is_supply: bool,
    pub price: f64,
    /// Price divided by the number of cells (equals every reference when
    /// the cell masses are uniform).
    pub uniform_reference: f64,
    pub cells: Vec<KktCell>,
    pub max_residual: f64,
    pub tolerance: f64,
    /// False when the solver did not reach an optimal point; residuals are
    /// then informational only.
    pub at_kkt_point: bool,
    pub passed: bool,
}

/// Pricing identity at node `id` (or at the first optimized demand, then
/// supply, node when `id` is `None`).
pub fn kkt_report(
    net: &Network,
    sol: &OgfSolution,
    id: Option<&str>,
) -> Result<KktReport, PricingError> {
    let j = match id {
        Some(id) => node_of(net, id)?,
        None => *sol
            .demand_nodes
            .first()
            .or(sol.supply_nodes.first())
            .ok_or_else(|| PricingError::NotOptimized("<none>".into()))?,
    };
    let node = &net.nodes[j];
    let (is_supply, slot, price) = if let Some(i) = sol.demand_nodes.iter().position(|&n| n == j) {
        (false, i, node.demand_price)
    } else if let Some(i) = sol.supply_nodes.iter().position(|&n| n == j) {
        (true, i, node.supply_price)
    } else {
        return Err(PricingError::NotOptimized(node.id.clone()));
    };
    let cells: Vec<KktCell> = sol
        .cells
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let lambda_q = c.lambda_q[j];
            let lambda_bound = if is_supply {
                c.lambda_s[slot]
            } else {
                c.lambda_d[slot]
            };
            let reference = price * c.mass;
            let lhs = if is_supply {
                lambda_q - lambda_bound
            } else {
                lambda_q + lambda_bound
            };
            KktCell {
                cell: k,
                mass: c.mass,
                lambda_q,
                lambda_bound,
                reference,
                residual: lhs - reference,
            }
        })
        .collect();
    let max_residual = cells.iter().map(|c| c.residual.abs()).fold(0.0, f64::max);
    let at_kkt_point = sol.status == NlpStatus::Optimal;
    Ok(KktReport {
        node: node.id.clone(),
        is_supply,
        price,
        uniform_reference: price / sol.cells.len() as f64,
        max_residual,
        tolerance: KKT_TOLERANCE,
        at_kkt_point,
        passed: at_kkt_point && max_residual <= KKT_TOLERANCE,
        cells,
    })
}

/// Optimized demands and supplies at reference coordinate `t`: the cubic
/// interpolant of the per-cell values, clipped to the nomination bounds.
pub fn recourse_at(
    net: &Network,
    sol: &OgfSolution,
    grid: &StochasticGrid,
    t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let interp = |values: Vec<f64>, max: f64| -> f64 {
        let v = if values.len() == grid.num_cells() && values.len() > 1 {
            grid.interpolant().interpolate(&values, t)
        } else {
            values[0]
        };
        v.clamp(0.0, max)
    };
    let d = sol
        .demand_nodes
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            interp(
                sol.cells.iter().map(|c| c.d[i]).collect(),
                net.nodes[j].demand_max,
            )
        })
        .collect();
    let s = sol
        .supply_nodes
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            interp(
                sol.cells.iter().map(|c| c.s[i]).collect(),
                net.nodes[j].supply_max,
            )
        })
        .collect();
    (d, s)
}

/// Withdrawal vector for perturbation `r` and recourse decisions `d`, `s`.
pub fn withdrawals(net: &Network, sol: &OgfSolution, r: f64, d: &[f64], s: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = net
        .nodes
        .iter()
        .map(|n| {
            let mut v = 0.0;
            if !n.demand_optimized {
                v += n.demand;
            }
            if !n.supply_optimized {
                v -= n.supply;
            }
            v
        })
        .collect();
    for (i, &j) in sol.demand_nodes.iter().enumerate() {
        q[j] += d[i];
    }
    for (i, &j) in sol.supply_nodes.iter().enumerate() {
        q[j] -= s[i];
    }
    if let Some(j) = sol.uncertain_node {
        q[j] += r;
    }
    q
}

/// Validation of one chance constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationEstimate {
    pub node: String,
    pub epsilon: f64,
    /// Σ a_m ∫ b_m dμ from the solution.
    pub sfv_expectation: f64,
    /// Requested samples.
    pub samples: usize,
    /// Samples whose steady solve failed; excluded from the estimates
    /// below.
    pub failures: usize,
    /// Fraction of samples with Π < Π_min.
    pub violation_probability: f64,
    pub violation_se: f64,
    /// Monte Carlo mean of Γ(Π_min − Π).
    pub gamma_mean: f64,
    pub gamma_se: f64,
}

impl ViolationEstimate {
    /// Whether the Monte Carlo mean of Γ respects ε up to three standard
    /// errors plus a relative discretization allowance.
    pub fn within(&self, allowance: f64) -> bool {
        self.gamma_mean <= self.epsilon + 3.0 * self.gamma_se + allowance * self.epsilon
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

/// Monte Carlo check of every chance constraint: `samples` i.i.d. draws of
/// the perturbation (ChaCha8 seeded with `seed`), each solved with
/// [`solve_steady`] at the optimal compressor ratios and the interpolated
/// recourse decisions.
pub fn violation_probability(
    net: &Network,
    sol: &OgfSolution,
    grid: &StochasticGrid,
    samples: usize,
    seed: u64,
) -> Result<Vec<ViolationEstimate>, PricingError> {
    if sol.chance.is_empty() {
        return Err(PricingError::NoChanceNode);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..samples).map(|_| rng.random::<f64>()).collect();
    let nodes: Vec<usize> = sol.chance.iter().map(|c| c.node).collect();
    // per sample: Some(Π at each chance node) or None on failure
    let outcomes: Vec<Option<Vec<f64>>> = draws
        .par_iter()
        .map(|&u| {
            let (t, r) = grid.sample(u);
            let (d, s) = recourse_at(net, sol, grid, t);
            let q = withdrawals(net, sol, r, &d, &s);
            solve_steady(net, &sol.alpha, &q)
                .ok()
                .map(|st| nodes.iter().map(|&j| st.pi[j]).collect())
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures > 0 {
        log::warn!("{failures} of {samples} Monte Carlo steady solves failed");
    }
    let ok: Vec<&Vec<f64>> = outcomes.iter().flatten().collect();
    Ok(sol
        .chance
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            let pi_min = sol.pi_min[ch.node];
            let violated: Vec<f64> = ok
                .iter()
                .map(|p| if p[c] < pi_min { 1.0 } else { 0.0 })
                .collect();
            let gamma: Vec<f64> = ok
                .iter()
                .map(|p| sol.penalty.value(sol.scaling.pi_to_nd(pi_min - p[c])))
                .collect();
            let (violation_probability, violation_se) = mean_and_se(&violated);
            let (gamma_mean, gamma_se) = mean_and_se(&gamma);
            ViolationEstimate {
                node: net.nodes[ch.node].id.clone(),
                epsilon: ch.epsilon,
                sfv_expectation: ch.sfv_expectation,
                samples,
                failures,
                violation_probability,
                violation_se,
                gamma_mean,
                gamma_se,
            }
        })
        .collect())
}
