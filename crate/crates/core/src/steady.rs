//! Steady-state flow solver for fixed compressor ratios and withdrawals.
//!
//! Unknowns are the squared pressures of all nodes and the flows of all
//! edges. The slack node's balance row is replaced by the fixed-pressure
//! condition; its injection is recovered afterwards. The system is solved by
//! damped Newton in nondimensional units.

use nalgebra::{DMatrix, DVector};

use crate::error::SteadyError;
use crate::network::{EdgeRef, Network};
use crate::scaling::{nondimensionalize, Scaling};

const MAX_ITERATIONS: usize = 50;
const TOLERANCE: f64 = 1e-10;
const STEP_FLOOR: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
/// Keeps d(φ|φ|)/dφ = 2|φ| away from zero so the Jacobian stays regular at
/// zero flow.
const DERIVATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Squared nodal pressures (Pa²).
    pub pi: Vec<f64>,
    /// Edge mass flows (kg/s), pipes first then compressors.
    pub phi: Vec<f64>,
    /// Injection at the slack node (kg/s).
    pub slack_injection: f64,
    /// Final residual, max norm in nondimensional units.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual max norm before each Newton step and at the end.
    pub residual_history: Vec<f64>,
}

impl SteadyState {
    /// Nodal pressures (Pa).
    pub fn pressures(&self) -> Vec<f64> {
        self.pi.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Square nondimensional system for one network, ratio vector and load.
struct System<'a> {
    net: &'a Network,
    from_to: Vec<(usize, usize)>,
    kappa: Vec<f64>,
    /// `Some(α)` for compressor edges.
    alpha: Vec<Option<f64>>,
    q: Vec<f64>,
    slack: usize,
    slack_pi: f64,
}

impl<'a> System<'a> {
    fn new(net: &'a Network, alpha: &[f64], q: &[f64], scaling: Scaling) -> Self {
        let inc = net.incidence();
        let kappa = net
            .edges()
            .map(|e| match e {
                EdgeRef::Pipe(i) => scaling.resistance_to_nd(net.pipes[i].resistance),
                EdgeRef::Compressor(_) => 0.0,
            })
            .collect();
        let alpha = net
            .edges()
            .map(|e| match e {
                EdgeRef::Pipe(_) => None,
                EdgeRef::Compressor(i) => Some(alpha[i]),
            })
            .collect();
        let slack = net.slack_index();
        let p = net.nodes[slack].slack_pressure.expect("slack pressure");
        Self {
            net,
            from_to: inc.columns,
            kappa,
            alpha,
            q: q.iter().map(|v| scaling.flow_to_nd(*v)).collect(),
            slack,
            slack_pi: scaling.pi_to_nd(p * p),
        }
    }

    fn num_nodes(&self) -> usize {
        self.net.nodes.len()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let n = self.num_nodes();
        let (pi, phi) = x.split_at(n);
        let mut r = vec![0.0; n + phi.len()];
        for (k, &(from, to)) in self.from_to.iter().enumerate() {
            r[from] -= phi[k];
            r[to] += phi[k];
        }
        for j in 0..n {
            r[j] -= self.q[j];
        }
        r[self.slack] = pi[self.slack] - self.slack_pi;
        for (k, &(from, to)) in self.from_to.iter().enumerate() {
            r[n + k] = match self.alpha[k] {
                None => pi[from] - pi[to] - self.kappa[k] * phi[k] * phi[k].abs(),
                Some(a) => pi[to] - a * pi[from],
            };
        }
        r
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.num_nodes();
        let m = self.from_to.len();
        let phi = &x[n..];
        let mut jac = DMatrix::zeros(n + m, n + m);
        for (k, &(from, to)) in self.from_to.iter().enumerate() {
            if from != self.slack {
                jac[(from, n + k)] -= 1.0;
            }
            if to != self.slack {
                jac[(to, n + k)] += 1.0;
            }
            match self.alpha[k] {
                None => {
                    jac[(n + k, from)] = 1.0;
                    jac[(n + k, to)] = -1.0;
                    jac[(n + k, n + k)] =
                        -self.kappa[k] * (2.0 * phi[k].abs()).max(DERIVATIVE_FLOOR);
                }
                Some(a) => {
                    jac[(n + k, to)] = 1.0;
                    jac[(n + k, from)] = -a;
                }
            }
        }
        jac[(self.slack, self.slack)] = 1.0;
        jac
    }

    /// Π = Π_slack everywhere; flows routed along a BFS spanning tree rooted
    /// at the slack node, zero on the remaining edges.
    fn initial_point(&self) -> Vec<f64> {
        let n = self.num_nodes();
        let m = self.from_to.len();
        let mut x = vec![self.slack_pi; n + m];
        x[n..].iter_mut().for_each(|v| *v = 0.0);
        let mut adjacency = vec![Vec::new(); n];
        for (k, &(from, to)) in self.from_to.iter().enumerate() {
            adjacency[from].push((k, to));
            adjacency[to].push((k, from));
        }
        let mut parent_edge: Vec<Option<usize>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut order = vec![self.slack];
        visited[self.slack] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &(k, w) in &adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    parent_edge[w] = Some(k);
                    order.push(w);
                }
            }
        }
        let mut subtree: Vec<f64> = self.q.clone();
        for &v in order.iter().rev() {
            if let Some(k) = parent_edge[v] {
                let (from, to) = self.from_to[k];
                let parent = if from == v { to } else { from };
                x[n + k] = if to == v { subtree[v] } else { -subtree[v] };
                subtree[parent] += subtree[v];
            }
        }
        x
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_inputs(net: &Network, alpha: &[f64], q: &[f64]) -> Result<(), SteadyError> {
    if alpha.len() != net.compressors.len() {
        return Err(SteadyError::Dimension(format!(
            "{} compressor ratios for {} compressors",
            alpha.len(),
            net.compressors.len()
        )));
    }
    if q.len() != net.nodes.len() {
        return Err(SteadyError::Dimension(format!(
            "{} withdrawals for {} nodes",
            q.len(),
            net.nodes.len()
        )));
    }
    for (c, &a) in net.compressors.iter().zip(alpha) {
        let slack = 1e-9 * c.alpha_max;
        if !(a >= 1.0 - slack && a <= c.alpha_max + slack) {
            return Err(SteadyError::RatioOutOfRange {
                compressor: c.id.clone(),
                alpha: a,
                alpha_max: c.alpha_max,
            });
        }
    }
    Ok(())
}

/// Solves the steady flow equations for compressor ratios `alpha` and nodal
/// withdrawals `q` (kg/s, indexed like `net.nodes`; the slack entry only
/// shifts the reported slack injection).
pub fn solve_steady(net: &Network, alpha: &[f64], q: &[f64]) -> Result<SteadyState, SteadyError> {
    check_inputs(net, alpha, q)?;
    let scaling = nondimensionalize(net);
    let sys = System::new(net, alpha, q, scaling);
    let n = sys.num_nodes();

    let mut x = sys.initial_point();
    let mut r = sys.residual(&x);
    let mut norm = max_norm(&r);
    let mut history = vec![norm];
    let mut iterations = 0;
    while norm > TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(SteadyError::NotConverged {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let jac = sys.jacobian(&x);
        let rhs = DVector::from_column_slice(&r);
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or(SteadyError::Singular(iterations))?;
        let merit = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - step * d).collect();
            let rt = sys.residual(&trial);
            let mt = 0.5 * rt.iter().map(|v| v * v).sum::<f64>();
            if mt <= (1.0 - 2.0 * ARMIJO * step) * merit || max_norm(&rt) <= TOLERANCE {
                x = trial;
                r = rt;
                break;
            }
            step *= 0.5;
            if step < STEP_FLOOR {
                return Err(SteadyError::LineSearchStalled {
                    iteration: iterations,
                    residual: norm,
                });
            }
        }
        norm = max_norm(&r);
        history.push(norm);
        log::trace!("steady iteration {iterations}: residual {norm:.3e}, step {step}");
    }

    let (pi_nd, phi_nd) = x.split_at(n);
    let mut pi = pi_nd.to_vec();
    let mut phi = phi_nd.to_vec();
    scaling.state_from_nd(&mut pi, &mut phi);
    for (node, &v) in net.nodes.iter().zip(&pi) {
        if v < 0.0 {
            return Err(SteadyError::NegativePressure {
                node: node.id.clone(),
                value: v,
            });
        }
    }
    let slack = sys.slack;
    let p = net.nodes[slack].slack_pressure.expect("slack pressure");
    pi[slack] = p * p;
    let inflow = net.incidence().apply(&phi);
    Ok(SteadyState {
        pi,
        phi,
        slack_injection: q[slack] - inflow[slack],
        residual_norm: norm,
        iterations,
        residual_history: history,
    })
}

/// Newton Jacobian of the steady system at a physical state `(pi, phi)`,
/// expressed in the units defined by `scaling`. Exposed for conditioning
/// diagnostics.
pub fn steady_jacobian(
    net: &Network,
    alpha: &[f64],
    pi: &[f64],
    phi: &[f64],
    scaling: Scaling,
) -> DMatrix<f64> {
    let q = vec![0.0; net.nodes.len()];
    let sys = System::new(net, alpha, &q, scaling);
    let mut x: Vec<f64> = pi.iter().map(|v| scaling.pi_to_nd(*v)).collect();
    x.extend(phi.iter().map(|v| scaling.flow_to_nd(*v)));
    sys.jacobian(&x)
}

/// Physical residuals of a state: pipe and compressor rows in Pa², balance
/// rows in kg/s (slack row reports the fixed-pressure mismatch in Pa²).
pub fn physical_residuals(
    net: &Network,
    alpha: &[f64],
    q: &[f64],
    state: &SteadyState,
) -> Vec<f64> {
    let sys = System::new(net, alpha, q, Scaling::identity());
    let mut x = state.pi.clone();
    x.extend_from_slice(&state.phi);
    sys.residual(&x)
}
