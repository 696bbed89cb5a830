//! `gasflow`: steady simulation, deterministic and chance-constrained
//! optimal gas flow, Monte Carlo validation and price reports.

mod artifacts;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, ValueEnum};
use gasflow::nlp::NlpStatus;
use gasflow::ogf::{self, OgfOptions, OgfSolution, PenaltyConfig};
use gasflow::pricing::{self, Selector, DEFAULT_SAMPLES};
use gasflow::steady::solve_steady;
use gasflow::{Network, StochasticGrid};

use artifacts::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Simulate,
    Optimize,
    Validate,
    Prices,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Simulate,
    #[value(name = "opt-det", alias = "det")]
    OptDet,
    #[value(name = "opt-cc", alias = "cc")]
    OptCc,
    Validate,
    Prices,
    Sweep,
}

#[derive(Debug, Parser)]
#[command(
    name = "gasflow",
    version,
    about = "Chance-constrained steady-state optimal gas flow"
)]
struct Args {
    /// Optional command word; `optimize` combines with `--mode det|cc`.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Network JSON file.
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Number of stochastic cells (at least 4 for chance-constrained runs).
    #[arg(long, default_value_t = 50)]
    cells: usize,
    /// Overrides ε at every uncertain node.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Penalty curvature; overrides `penalty_gamma` from the network file.
    #[arg(long)]
    gamma: Option<f64>,
    /// Flow smoothing parameter (kg/s).
    #[arg(long)]
    delta: Option<f64>,
    /// Monte Carlo samples for validation (0 skips Monte Carlo in sweeps).
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    mc_samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Interior-point iteration limit.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Nomination bound override `NODE=VALUE` (VALUE may be `inf`); repeatable.
    #[arg(long, value_parser = parse_qmax)]
    qmax: Vec<(String, f64)>,
    /// Compressor ratios for `simulate`, in compressor id order (default 1).
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Comma-separated ε values for `sweep`; an empty list writes only the
    /// header.
    #[arg(long)]
    epsilons: Option<String>,
    /// Nomination bound values for `sweep`: `NODE=V1,V2,...`.
    #[arg(long, value_parser = parse_qmax_list)]
    sweep_qmax: Option<(String, Vec<f64>)>,
}

fn parse_qmax(s: &str) -> Result<(String, f64), String> {
    let (node, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NODE=VALUE, got {s:?}"))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value in {s:?}: {e}"))?;
    if v.is_nan() || v < 0.0 {
        return Err(format!("bound in {s:?} must be non-negative"));
    }
    Ok((node.trim().to_string(), v))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| format!("bad number {v:?}: {e}"))
        })
        .collect()
}

fn parse_qmax_list(s: &str) -> Result<(String, Vec<f64>), String> {
    let (node, values) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NODE=V1,V2,..., got {s:?}"))?;
    let parsed = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse_qmax(&format!("{node}={v}")).map(|(_, x)| x))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((node.trim().to_string(), parsed))
}

fn resolve_mode(args: &Args) -> Result<Mode> {
    let from_command = match args.command {
        None => None,
        Some(Command::Simulate) => Some(Mode::Simulate),
        Some(Command::Validate) => Some(Mode::Validate),
        Some(Command::Prices) => Some(Mode::Prices),
        Some(Command::Sweep) => Some(Mode::Sweep),
        Some(Command::Optimize) => {
            return match args.mode {
                None | Some(Mode::OptCc) => Ok(Mode::OptCc),
                Some(Mode::OptDet) => Ok(Mode::OptDet),
                Some(m) => Err(anyhow!("`optimize` takes --mode det or cc, not {m:?}")),
            }
        }
    };
    match (from_command, args.mode) {
        (Some(c), Some(m)) if c != m => bail!("command {c:?} conflicts with --mode {m:?}"),
        (Some(c), _) => Ok(c),
        (None, Some(m)) => Ok(m),
        (None, None) => bail!("no mode given: pass a command or --mode"),
    }
}

fn set_nomination_bound(net: &mut Network, node: &str, value: f64) -> Result<()> {
    let n = net
        .node_mut(node)
        .ok_or_else(|| anyhow!("network: --qmax names unknown node {node:?}"))?;
    if n.demand_optimized {
        n.demand_max = value;
    } else if n.supply_optimized {
        n.supply_max = value;
    } else {
        bail!("network: node {node:?} has no optimized demand or supply for --qmax");
    }
    Ok(())
}

fn load_network(args: &Args) -> Result<Network> {
    let mut net = Network::from_path(&args.network).context("network")?;
    for (node, v) in &args.qmax {
        set_nomination_bound(&mut net, node, *v)?;
    }
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0) {
            bail!("network: --epsilon must be positive, got {eps}");
        }
        for j in net.uncertain_nodes() {
            net.nodes[j].epsilon = Some(eps);
        }
    }
    Ok(net)
}

fn options(args: &Args, net: &Network) -> Result<OgfOptions> {
    let mut penalty = PenaltyConfig::with_gamma(args.gamma.or(net.penalty_gamma).unwrap_or(1.0));
    if let Some(d) = args.delta {
        penalty.delta = d;
    }
    penalty.validate().context("ogf")?;
    let mut opts = OgfOptions {
        penalty,
        ..OgfOptions::default()
    };
    if let Some(n) = args.max_iter {
        opts.nlp.max_iter = n;
    }
    Ok(opts)
}

fn grid(net: &Network, cells: usize) -> Result<StochasticGrid> {
    let uncertain = net.uncertain_nodes();
    let &j = match uncertain.as_slice() {
        [j] => j,
        [] => bail!("stochastic: chance-constrained mode needs an uncertain node"),
        _ => bail!(
            "stochastic: exactly one uncertain node is supported, found {}",
            uncertain.len()
        ),
    };
    let node = &net.nodes[j];
    let spec = node
        .uncertainty
        .as_ref()
        .expect("uncertain node has a spec");
    StochasticGrid::build(&node.id, spec, cells)
        .with_context(|| format!("stochastic: node {:?}", node.id))
}

fn max_chance_slack(sol: &OgfSolution) -> Option<f64> {
    sol.chance
        .iter()
        .map(|c| c.epsilon - c.sfv_expectation)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

fn summary(mode: Mode, sol: &OgfSolution) {
    let slack = max_chance_slack(sol).map_or("n/a".to_string(), |v| format!("{v:.3e}"));
    let alpha: Vec<String> = sol.alpha.iter().map(|a| format!("{a:.6}")).collect();
    println!(
        "mode={mode:?} status={:?} iterations={} objective={:.10e} alpha=[{}] chance_slack={slack}",
        sol.status,
        sol.iterations,
        sol.objective,
        alpha.join(",")
    );
}

fn exit_for(status: NlpStatus) -> u8 {
    if status == NlpStatus::Optimal {
        0
    } else {
        2
    }
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_distribution(
    out: &Path,
    net: &Network,
    sol: &OgfSolution,
    sel: &Selector,
    grid: Option<&StochasticGrid>,
) -> Result<()> {
    let dist = pricing::distribution_of(net, sol, sel, grid, DEFAULT_SAMPLES).context("pricing")?;
    let stem = file_safe(&sel.to_string().replace('@', "_"));
    artifacts::write_cells_csv(&out.join(format!("{stem}.csv")), &dist)?;
    artifacts::write_density_csv(&out.join(format!("{stem}_density.csv")), &dist)
}

fn solve_cc(args: &Args, net: &Network) -> Result<(StochasticGrid, OgfSolution)> {
    let grid = grid(net, args.cells)?;
    let sol = ogf::solve_chance_constrained(net, &grid, &options(args, net)?).context("ogf")?;
    Ok((grid, sol))
}

fn run_simulate(args: &Args, net: &Network) -> Result<u8> {
    let alpha = if args.alpha.is_empty() {
        vec![1.0; net.compressors.len()]
    } else {
        args.alpha.clone()
    };
    let q = net.mean_withdrawals();
    let st = solve_steady(net, &alpha, &q).context("steady")?;
    artifacts::write_json(
        &args.out.join("steady.json"),
        &artifacts::steady_json(net, &alpha, &q, &st),
    )?;
    let p: Vec<String> = net
        .nodes
        .iter()
        .zip(st.pressures())
        .map(|(n, p)| format!("{}={:.1}", n.id, p))
        .collect();
    println!(
        "mode=Simulate iterations={} residual={:.3e} pressures=[{}]",
        st.iterations,
        st.residual_norm,
        p.join(",")
    );
    Ok(0)
}

fn run_opt_det(args: &Args, net: &Network) -> Result<u8> {
    let sol = ogf::solve_deterministic(net, &options(args, net)?).context("ogf")?;
    artifacts::write_json(
        &args.out.join("solution.json"),
        &artifacts::solution_json(net, &sol, &[]),
    )?;
    summary(Mode::OptDet, &sol);
    Ok(exit_for(sol.status))
}

fn run_opt_cc(args: &Args, net: &Network) -> Result<u8> {
    let (grid, sol) = solve_cc(args, net)?;
    artifacts::write_json(
        &args.out.join("solution.json"),
        &artifacts::solution_json(net, &sol, &[]),
    )?;
    for ch in &sol.chance {
        write_distribution(
            &args.out,
            net,
            &sol,
            &Selector::Pressure(net.nodes[ch.node].id.clone()),
            Some(&grid),
        )?;
    }
    for &j in &sol.demand_nodes {
        write_distribution(
            &args.out,
            net,
            &sol,
            &Selector::Demand(net.nodes[j].id.clone()),
            Some(&grid),
        )?;
    }
    for &j in &sol.supply_nodes {
        write_distribution(
            &args.out,
            net,
            &sol,
            &Selector::Supply(net.nodes[j].id.clone()),
            Some(&grid),
        )?;
    }
    summary(Mode::OptCc, &sol);
    Ok(exit_for(sol.status))
}

fn run_validate(args: &Args, net: &Network) -> Result<u8> {
    let (grid, sol) = solve_cc(args, net)?;
    let est = pricing::violation_probability(net, &sol, &grid, args.mc_samples, args.seed)
        .context("pricing")?;
    let report: Vec<_> = est.iter().map(artifacts::violation_json).collect();
    artifacts::write_json(
        &args.out.join("violation.json"),
        &serde_json::Value::Array(report),
    )?;
    artifacts::write_json(
        &args.out.join("solution.json"),
        &artifacts::solution_json(net, &sol, &est),
    )?;
    summary(Mode::Validate, &sol);
    for e in &est {
        println!(
            "  {}: sfv={:.4e} mc_gamma={:.4e}±{:.1e} p_violation={:.4}±{:.1e} failures={}",
            e.node,
            e.sfv_expectation,
            e.gamma_mean,
            e.gamma_se,
            e.violation_probability,
            e.violation_se,
            e.failures
        );
    }
    Ok(exit_for(sol.status))
}

fn run_prices(args: &Args, net: &Network) -> Result<u8> {
    let (grid, sol) = if net.uncertain_nodes().is_empty() {
        (
            None,
            ogf::solve_deterministic(net, &options(args, net)?).context("ogf")?,
        )
    } else {
        let (g, s) = solve_cc(args, net)?;
        (Some(g), s)
    };
    let reports = sol
        .demand_nodes
        .iter()
        .chain(&sol.supply_nodes)
        .map(|&j| pricing::kkt_report(net, &sol, Some(&net.nodes[j].id)))
        .collect::<Result<Vec<_>, _>>()
        .context("pricing")?;
    let report_json = reports.iter().map(artifacts::kkt_json).collect();
    artifacts::write_json(
        &args.out.join("kkt.json"),
        &serde_json::Value::Array(report_json),
    )?;
    artifacts::write_json(
        &args.out.join("solution.json"),
        &artifacts::solution_json(net, &sol, &[]),
    )?;
    for (j, node) in net.nodes.iter().enumerate() {
        if j == net.slack_index() {
            continue;
        }
        write_distribution(
            &args.out,
            net,
            &sol,
            &Selector::LambdaQ(node.id.clone()),
            grid.as_ref(),
        )?;
        write_distribution(
            &args.out,
            net,
            &sol,
            &Selector::LambdaQPerMass(node.id.clone()),
            None,
        )?;
    }
    summary(Mode::Prices, &sol);
    for r in &reports {
        println!(
            "  {}: max_residual={:.3e} passed={}",
            r.node, r.max_residual, r.passed
        );
    }
    Ok(exit_for(sol.status))
}

fn run_sweep(args: &Args, net: &Network) -> Result<u8> {
    let epsilons: Vec<f64> = match &args.epsilons {
        Some(list) => parse_list(list).map_err(|e| anyhow!("--epsilons: {e}"))?,
        None => {
            let eps = net
                .uncertain_nodes()
                .first()
                .and_then(|&j| net.nodes[j].epsilon);
            vec![eps
                .ok_or_else(|| anyhow!("network: sweep needs --epsilons or an ε in the network"))?]
        }
    };
    let qmax_values: Vec<Option<f64>> = match &args.sweep_qmax {
        Some((_, values)) => values.iter().map(|v| Some(*v)).collect(),
        None => vec![None],
    };
    let compressors: Vec<String> = net.compressors.iter().map(|c| c.id.clone()).collect();
    let mut rows = Vec::new();
    let mut worst = 0u8;
    for &eps in &epsilons {
        for &qmax in &qmax_values {
            let mut case = net.clone();
            for j in case.uncertain_nodes() {
                case.nodes[j].epsilon = Some(eps);
            }
            if let (Some((node, _)), Some(v)) = (&args.sweep_qmax, qmax) {
                set_nomination_bound(&mut case, node, v)?;
            }
            let mut row = SweepRow {
                epsilon: eps,
                qmax,
                objective: f64::NAN,
                sfv_expectation: f64::NAN,
                mc_violation: f64::NAN,
                ..SweepRow::default()
            };
            match solve_cc(args, &case) {
                Ok((grid, sol)) => {
                    row.status = format!("{:?}", sol.status);
                    row.alpha = compressors
                        .iter()
                        .cloned()
                        .zip(sol.alpha.iter().copied())
                        .collect::<BTreeMap<_, _>>();
                    row.objective = sol.objective;
                    row.sfv_expectation =
                        sol.chance.first().map_or(f64::NAN, |c| c.sfv_expectation);
                    if let Some((node, _)) = &args.sweep_qmax {
                        let j = case.node_index(node).expect("checked above");
                        row.expected_demand = sol
                            .demand_nodes
                            .iter()
                            .position(|&n| n == j)
                            .map(|i| sol.expected_demand(i));
                    }
                    if args.mc_samples > 0 {
                        match pricing::violation_probability(
                            &case,
                            &sol,
                            &grid,
                            args.mc_samples,
                            args.seed,
                        ) {
                            Ok(est) => row.mc_violation = est[0].violation_probability,
                            Err(e) => row.status = format!("{} (pricing: {e})", row.status),
                        }
                    }
                    worst = worst.max(exit_for(sol.status));
                }
                Err(e) => {
                    row.status = format!("error: {e:#}");
                    worst = worst.max(2);
                }
            }
            println!(
                "eps={eps} qmax={} status={} objective={:.6e} alpha=[{}] sfv={:.4e} mc_violation={:.4}",
                qmax.map_or("-".to_string(), |v| v.to_string()),
                row.status,
                row.objective,
                compressors.iter().map(|c| row.alpha.get(c).map_or("-".into(), |a| format!("{a:.6}"))).collect::<Vec<_>>().join(","),
                row.sfv_expectation,
                row.mc_violation
            );
            rows.push(row);
        }
    }
    artifacts::write_sweep_csv(
        &args.out.join("sweep.csv"),
        &compressors,
        args.sweep_qmax.is_some(),
        &rows,
    )?;
    if rows.is_empty() {
        println!("mode=Sweep rows=0");
    }
    Ok(worst)
}

fn run(args: &Args) -> Result<u8> {
    let mode = resolve_mode(args)?;
    let net = load_network(args)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    match mode {
        Mode::Simulate => run_simulate(args, &net),
        Mode::OptDet => run_opt_det(args, &net),
        Mode::OptCc => run_opt_cc(args, &net),
        Mode::Validate => run_validate(args, &net),
        Mode::Prices => run_prices(args, &net),
        Mode::Sweep => run_sweep(args, &net),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GASFLOW_LOG", "warn"))
        .init();
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
