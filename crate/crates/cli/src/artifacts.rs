//! JSON and CSV writers for run artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use gasflow::ogf::OgfSolution;
use gasflow::pricing::{KktReport, ValueDistribution, ViolationEstimate};
use gasflow::steady::SteadyState;
use gasflow::Network;
use serde_json::{json, Map, Value};

fn by_id<T: Copy + Into<Value>>(ids: impl Iterator<Item = String>, values: &[T]) -> Value {
    let map: Map<String, Value> = ids.zip(values.iter().map(|v| (*v).into())).collect();
    Value::Object(map)
}

pub fn solution_json(net: &Network, sol: &OgfSolution, mc: &[ViolationEstimate]) -> Value {
    let node_ids = || net.nodes.iter().map(|n| n.id.clone());
    let edge_ids = net.edge_ids();
    let demand_ids = || sol.demand_nodes.iter().map(|&j| net.nodes[j].id.clone());
    let supply_ids = || sol.supply_nodes.iter().map(|&j| net.nodes[j].id.clone());
    let alpha = by_id(net.compressors.iter().map(|c| c.id.clone()), &sol.alpha);
    let d: Vec<f64> = (0..sol.demand_nodes.len())
        .map(|i| sol.expected_demand(i))
        .collect();
    let s: Vec<f64> = (0..sol.supply_nodes.len())
        .map(|i| sol.expected_supply(i))
        .collect();
    let cells: Vec<Value> = sol
        .cells
        .iter()
        .map(|c| {
            json!({
                "omega": c.omega,
                "mass": c.mass,
                "pressures": by_id(node_ids(), &c.pressures()),
                "flows": by_id(edge_ids.iter().cloned(), &c.phi),
                "lambda_q": by_id(node_ids(), &c.lambda_q),
                "d": by_id(demand_ids(), &c.d),
                "s": by_id(supply_ids(), &c.s),
            })
        })
        .collect();
    let per_cell = |ids: Vec<String>, pick: &dyn Fn(usize) -> Vec<f64>| -> Value {
        let map: Map<String, Value> = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, json!(pick(i))))
            .collect();
        Value::Object(map)
    };
    let lambda_d = per_cell(demand_ids().collect(), &|i| {
        sol.cells.iter().map(|c| c.lambda_d[i]).collect()
    });
    let lambda_s = per_cell(supply_ids().collect(), &|i| {
        sol.cells.iter().map(|c| c.lambda_s[i]).collect()
    });
    let chance: Vec<Value> = sol
        .chance
        .iter()
        .map(|ch| {
            let id = &net.nodes[ch.node].id;
            let mut v = json!({
                "node": id,
                "epsilon": ch.epsilon,
                "sfv_expectation": ch.sfv_expectation,
                "lambda_cc": ch.lambda_cc,
                "coefficients": ch.coefficients,
            });
            if let Some(est) = mc.iter().find(|e| &e.node == id) {
                v["mc_estimate"] = violation_json(est);
            }
            v
        })
        .collect();
    json!({
        "status": format!("{:?}", sol.status),
        "iterations": sol.iterations,
        "objective": sol.objective,
        "expected_compressor_power": sol.expected_compressor_power,
        "expected_economic_value": sol.expected_economic_value,
        "physics_residual": sol.physics_residual,
        "alpha": alpha,
        "d": by_id(demand_ids(), &d),
        "s": by_id(supply_ids(), &s),
        "cells": cells,
        "lambda_d": lambda_d,
        "lambda_s": lambda_s,
        "chance": chance,
    })
}

pub fn steady_json(net: &Network, alpha: &[f64], q: &[f64], st: &SteadyState) -> Value {
    let node_ids = || net.nodes.iter().map(|n| n.id.clone());
    json!({
        "alpha": by_id(net.compressors.iter().map(|c| c.id.clone()), alpha),
        "withdrawals": by_id(node_ids(), q),
        "pressures": by_id(node_ids(), &st.pressures()),
        "flows": by_id(net.edge_ids().into_iter(), &st.phi),
        "slack_injection": st.slack_injection,
        "iterations": st.iterations,
        "residual_norm": st.residual_norm,
    })
}

pub fn violation_json(est: &ViolationEstimate) -> Value {
    json!({
        "node": est.node,
        "epsilon": est.epsilon,
        "sfv_expectation": est.sfv_expectation,
        "samples": est.samples,
        "failures": est.failures,
        "violation_probability": est.violation_probability,
        "violation_se": est.violation_se,
        "gamma_mean": est.gamma_mean,
        "gamma_se": est.gamma_se,
        "within_tolerance": est.within(0.02),
    })
}

pub fn kkt_json(report: &KktReport) -> Value {
    let cells: Vec<Value> = report
        .cells
        .iter()
        .map(|c| {
            json!({
                "cell": c.cell,
                "mass": c.mass,
                "lambda_q": c.lambda_q,
                "lambda_bound": c.lambda_bound,
                "reference": c.reference,
                "residual": c.residual,
            })
        })
        .collect();
    json!({
        "node": report.node,
        "kind": if report.is_supply { "supply" } else { "demand" },
        "price": report.price,
        "uniform_reference": report.uniform_reference,
        "max_residual": report.max_residual,
        "tolerance": report.tolerance,
        "at_kkt_point": report.at_kkt_point,
        "note": if report.at_kkt_point { "" } else { "not at KKT point; residuals informational" },
        "passed": report.passed,
        "cells": cells,
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip text, switching to exponent form for very small or
/// very large magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// `omega,mass,value` rows, one per cell.
pub fn write_cells_csv(path: &Path, dist: &ValueDistribution) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["omega", "mass", "value"])?;
    for ((o, m), v) in dist.omega.iter().zip(&dist.mass).zip(&dist.support) {
        w.write_record([fmt_num(*o), fmt_num(*m), fmt_num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// `grid,density` rows of the density estimate, if there is one.
pub fn write_density_csv(path: &Path, dist: &ValueDistribution) -> Result<()> {
    let Some(density) = &dist.density else {
        return Ok(());
    };
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["grid", "density"])?;
    for (x, y) in density.grid.iter().zip(&density.values) {
        w.write_record([fmt_num(*x), fmt_num(*y)])?;
    }
    w.flush()?;
    Ok(())
}

/// One sweep row; `alpha` is keyed by compressor id.
#[derive(Debug, Clone, Default)]
pub struct SweepRow {
    pub epsilon: f64,
    pub qmax: Option<f64>,
    pub status: String,
    pub alpha: BTreeMap<String, f64>,
    pub objective: f64,
    pub sfv_expectation: f64,
    pub mc_violation: f64,
    pub expected_demand: Option<f64>,
}

pub fn write_sweep_csv(
    path: &Path,
    compressors: &[String],
    with_qmax: bool,
    rows: &[SweepRow],
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["epsilon".to_string()];
    if with_qmax {
        header.push("qmax".into());
        header.push("expected_demand".into());
    }
    header.extend(compressors.iter().map(|c| format!("alpha_{c}")));
    header.extend(["objective", "sfv_expectation", "mc_violation", "status"].map(String::from));
    w.write_record(&header)?;
    let fmt = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            fmt_num(v)
        }
    };
    for r in rows {
        let mut rec = vec![fmt(r.epsilon)];
        if with_qmax {
            rec.push(r.qmax.map_or(String::new(), fmt));
            rec.push(r.expected_demand.map_or(String::new(), fmt));
        }
        rec.extend(
            compressors
                .iter()
                .map(|c| r.alpha.get(c).copied().map_or(String::new(), fmt)),
        );
        rec.extend([
            fmt(r.objective),
            fmt(r.sfv_expectation),
            fmt(r.mc_violation),
            r.status.clone(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
