//! Shared fixtures for the integration tests: the shipped example networks
//! and three analytic NLPs with independently known solutions.
#![allow(dead_code)]

use gasflow::nlp::NlpProblem;
use gasflow::{Network, StochasticGrid};

pub fn example(name: &str) -> Network {
    Network::from_path(format!("{}/examples/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// Grid for the (single) uncertain node of `net`.
pub fn grid_for(net: &Network, cells: usize) -> StochasticGrid {
    let j = net.uncertain_nodes()[0];
    let node = &net.nodes[j];
    StochasticGrid::build(&node.id, node.uncertainty.as_ref().unwrap(), cells).unwrap()
}

/// min s·x² subject to x ≥ 1.
pub struct BoxQp {
    pub scale: f64,
}

impl NlpProblem for BoxQp {
    fn num_variables(&self) -> usize {
        1
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0], vec![f64::INFINITY])
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.scale * x[0] * x[0]
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g[0] = 2.0 * self.scale * x[0];
    }
    fn constraints(&self, _x: &[f64], _c: &mut [f64]) {}
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        vec![]
    }
    fn jacobian_values(&self, _x: &[f64], _v: &mut [f64]) {}
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        Some(vec![(0, 0)])
    }
    fn hessian_values(&self, _x: &[f64], of: f64, _l: &[f64], v: &mut [f64]) {
        v[0] = 2.0 * self.scale * of;
    }
}

/// min −(c₁x₁ + c₂x₂) subject to Q − x₁ − x₂ = 0, 0 ≤ x ≤ u.
pub struct BoundedLp {
    pub c: [f64; 2],
    pub u: [f64; 2],
    pub q: f64,
}

impl NlpProblem for BoundedLp {
    fn num_variables(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0, 0.0], self.u.to_vec())
    }
    fn objective(&self, x: &[f64]) -> f64 {
        -(self.c[0] * x[0] + self.c[1] * x[1])
    }
    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g[0] = -self.c[0];
        g[1] = -self.c[1];
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        c[0] = self.q - x[0] - x[1];
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        vec![(0, 0), (0, 1)]
    }
    fn jacobian_values(&self, _x: &[f64], v: &mut [f64]) {
        v[0] = -1.0;
        v[1] = -1.0;
    }
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        Some(vec![])
    }
}

/// Rosenbrock subject to x₁ + x₂ = 1.
pub struct Rosenbrock {
    pub exact_hessian: bool,
}

impl NlpProblem for Rosenbrock {
    fn num_variables(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2])
    }
    fn objective(&self, x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let r = x[1] - x[0] * x[0];
        g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * r;
        g[1] = 200.0 * r;
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        c[0] = x[0] + x[1] - 1.0;
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        vec![(0, 0), (0, 1)]
    }
    fn jacobian_values(&self, _x: &[f64], v: &mut [f64]) {
        v[0] = 1.0;
        v[1] = 1.0;
    }
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        self.exact_hessian.then(|| vec![(0, 0), (1, 0), (1, 1)])
    }
    fn hessian_values(&self, x: &[f64], of: f64, _l: &[f64], v: &mut [f64]) {
        v[0] = of * (2.0 - 400.0 * (x[1] - x[0] * x[0]) + 800.0 * x[0] * x[0]);
        v[1] = of * (-400.0 * x[0]);
        v[2] = of * 200.0;
    }
}

/// Independent oracle: on the line x₂ = 1 − x₁ the reduced derivative is a
/// cubic in x₁; bracket its root and bisect.
pub fn rosenbrock_reference() -> (f64, f64, f64) {
    let reduced = |a: f64| {
        let b = 1.0 - a;
        let r = b - a * a;
        let g0 = -2.0 * (1.0 - a) - 400.0 * a * r;
        let g1 = 200.0 * r;
        (g0 - g1, g1)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    assert!(reduced(lo).0 < 0.0 && reduced(hi).0 > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reduced(mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    // stationarity in x₂: g₁ + λ = 0
    let lambda = -reduced(a).1;
    (a, 1.0 - a, lambda)
}

/// Slack `A` at 6 MPa feeding `B` through one pipe; `withdrawal` is the
/// net offtake at `B` (negative means injection).
pub fn two_node(withdrawal: f64) -> Network {
    let (d, s) = if withdrawal >= 0.0 {
        (withdrawal, 0.0)
    } else {
        (0.0, -withdrawal)
    };
    Network::from_json(&format!(
        r#"{{"wave_speed": 350.0,
            "nodes": [
              {{"id": "A", "kind": "slack", "slack_pressure": 6e6, "pressure_min": 1e6, "pressure_max": 9e6}},
              {{"id": "B", "kind": "flow", "pressure_min": 1e6, "pressure_max": 9e6, "demand": {d}, "supply": {s}}}
            ],
            "pipes": [{{"id": "P", "from": "A", "to": "B", "length": 35000.0, "diameter": 0.7, "friction": 0.012}}]}}"#
    ))
    .unwrap()
}

pub const TWO_NODE_SLACK_PI: f64 = 36e12;

/// Resistance of the [`two_node`] pipe computed from its geometry.
pub fn two_node_kappa() -> f64 {
    let area = std::f64::consts::PI * 0.49 / 4.0;
    350.0f64.powi(2) * 0.012 * 35000.0 / (area * area * 0.7)
}

/// Five-point Gauss–Legendre rule on [-1, 1].
const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// ∫ b_m(t) ρ(t) dt by composite Gauss–Legendre with ten subintervals per
/// knot span.
pub fn integrals_by_quadrature(grid: &StochasticGrid) -> Vec<f64> {
    let basis = grid.basis();
    let k = grid.num_cells();
    let sub = 10 * k;
    let h = 1.0 / sub as f64;
    let mut out = vec![0.0; basis.len()];
    for i in 0..sub {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let rho = grid.measure().density(t);
            for (m, v) in basis.eval_all(t).iter().enumerate() {
                out[m] += 0.5 * (b - a) * w * v * rho;
            }
        }
    }
    out
}
