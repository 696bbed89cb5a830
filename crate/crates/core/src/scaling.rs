//! Nondimensionalization of pressures, flows, lengths and velocities.
//!
//! Squared pressures are measured in units of the slack node's squared
//! pressure, flows in the unit that makes the largest pipe resistance equal
//! to one. With those choices the pipe equation Π_i − Π_j = κ̂ φ̂|φ̂| has
//! coefficients of order one, which keeps Newton and KKT matrices well
//! conditioned.

use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    /// Pressure scale (Pa).
    pub pressure: f64,
    /// Squared-pressure scale (Pa²).
    pub pi: f64,
    /// Mass-flow scale (kg/s).
    pub flow: f64,
    /// Length scale (m).
    pub length: f64,
    /// Velocity scale (m/s), the network wave speed.
    pub velocity: f64,
}

/// Chooses scales for `net`.
pub fn nondimensionalize(net: &Network) -> Scaling {
    let pressure = net
        .nodes
        .iter()
        .find_map(|n| n.slack_pressure)
        .filter(|p| *p > 0.0)
        .unwrap_or(1.0);
    let pi = pressure * pressure;
    let kappa_max = net.pipes.iter().map(|p| p.resistance).fold(0.0, f64::max);
    let flow = if kappa_max > 0.0 {
        (pi / kappa_max).sqrt()
    } else {
        let q = net
            .nodes
            .iter()
            .map(|n| n.demand.max(n.supply))
            .fold(0.0, f64::max);
        if q > 0.0 {
            q
        } else {
            1.0
        }
    };
    let length = net.pipes.iter().map(|p| p.length).fold(0.0, f64::max);
    Scaling {
        pressure,
        pi,
        flow,
        length: if length > 0.0 { length } else { 1.0 },
        velocity: net.wave_speed,
    }
}

impl Scaling {
    pub fn identity() -> Self {
        Self {
            pressure: 1.0,
            pi: 1.0,
            flow: 1.0,
            length: 1.0,
            velocity: 1.0,
        }
    }

    pub fn pi_to_nd(&self, v: f64) -> f64 {
        v / self.pi
    }

    pub fn pi_from_nd(&self, v: f64) -> f64 {
        v * self.pi
    }

    pub fn flow_to_nd(&self, v: f64) -> f64 {
        v / self.flow
    }

    pub fn flow_from_nd(&self, v: f64) -> f64 {
        v * self.flow
    }

    pub fn length_to_nd(&self, v: f64) -> f64 {
        v / self.length
    }

    pub fn length_from_nd(&self, v: f64) -> f64 {
        v * self.length
    }

    pub fn velocity_to_nd(&self, v: f64) -> f64 {
        v / self.velocity
    }

    pub fn velocity_from_nd(&self, v: f64) -> f64 {
        v * self.velocity
    }

    /// Nondimensional pipe resistance κ̂ = κ F² / Π₀.
    pub fn resistance_to_nd(&self, kappa: f64) -> f64 {
        kappa * self.flow * self.flow / self.pi
    }

    /// Scales a state `(Π, φ)` in place.
    pub fn state_to_nd(&self, pi: &mut [f64], phi: &mut [f64]) {
        pi.iter_mut().for_each(|v| *v = self.pi_to_nd(*v));
        phi.iter_mut().for_each(|v| *v = self.flow_to_nd(*v));
    }

    pub fn state_from_nd(&self, pi: &mut [f64], phi: &mut [f64]) {
        pi.iter_mut().for_each(|v| *v = self.pi_from_nd(*v));
        phi.iter_mut().for_each(|v| *v = self.flow_from_nd(*v));
    }
}
