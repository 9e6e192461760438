//! `voltstab` command line.
//!
//! Every subcommand prints one JSON envelope (see [`RunResult`]) on stdout.
//! Exit status: 0 success or stable, 2 unstable, infeasible, collapsed or
//! support needed, 1 on errors. `--csv PATH` writes the tabular data of a
//! command (curve, trajectory, ROA corners, residual history). Logging goes
//! to stderr and follows `RUST_LOG`.

pub mod file;
pub mod output;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::admm::{self, AdmmOptions, AdmmVerdict, Partition, WarmStart};
use crate::dynamics::{self, ContinuousConfig, DiscreteLtcConfig, TapState, Verdict};
use crate::equilibria::{self, AlphaOptions, Stability};
use crate::error::{Error, Result};
use crate::monitor::{self, Certificate, DirectionOptions};
use crate::network::Network;
use crate::twobus::{self, LoadFamily, TapEquilibria, TwoBusChange, TwoBusEvent, TwoBusParams};

pub use file::{load_network, LoadedNetwork, NetworkFile};
pub use output::{Exit, RunResult};

#[derive(Debug, Parser)]
#[command(name = "voltstab", version, about = "Voltage stability analysis of LTC-controlled networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-bus closed forms, P-V curve and tap simulation.
    #[command(allow_negative_numbers = true)]
    Twobus(TwobusArgs),
    /// Tap trajectory of a network, with optional events.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Largest equilibrium and its stability.
    Alpha(NetArgs),
    /// Inner approximation of the region of attraction from several directions.
    #[command(allow_negative_numbers = true)]
    Roa(RoaArgs),
    /// Stability certificate for a tap position.
    #[command(allow_negative_numbers = true)]
    Monitor(TapArgs),
    /// Minimal load reduction recapturing a tap position.
    #[command(allow_negative_numbers = true)]
    Support(TapArgs),
    /// Distributed solution of the monitoring problem.
    #[command(allow_negative_numbers = true)]
    Admm(AdmmArgs),
}

#[derive(Debug, Args)]
pub struct TwobusArgs {
    #[arg(long = "E", default_value_t = 1.0)]
    pub e: f64,
    #[arg(long = "R", default_value_t = 0.0)]
    pub r: f64,
    #[arg(long = "X", default_value_t = 1.0)]
    pub x: f64,
    #[arg(long = "GL", default_value_t = 0.0)]
    pub g_l: f64,
    #[arg(long = "BL", default_value_t = 0.0)]
    pub b_l: f64,
    #[arg(long = "V0", default_value_t = 1.0)]
    pub v0: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t: f64,
    /// Load family `G_L = kappa B_L`; defaults to `GL / BL`.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Emit the `(B_L, r_minus, r_plus)` curve of the family.
    #[arg(long)]
    pub curve: bool,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Simulate the tap from `--r0`.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long)]
    pub r0: Option<f64>,
    /// Simulation horizon in seconds (default `50 T`).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// `TIME:x=FACTOR` scales the reactance, `TIME:load=FACTOR` scales `G_L` and `B_L`.
    #[arg(long = "event")]
    pub events: Vec<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Network file (JSON).
    pub network: PathBuf,
}

#[derive(Debug, Args)]
pub struct TapArgs {
    pub network: PathBuf,
    /// Tap position: one value for all loads or a comma-separated list in
    /// file order; defaults to the file's `r0`.
    #[arg(long)]
    pub r0: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Continuous,
    Discrete,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub network: PathBuf,
    #[arg(long, value_enum, default_value_t = Model::Continuous)]
    pub model: Model,
    #[arg(long)]
    pub r0: Option<String>,
    /// Seconds (default 200 continuous, 2000 discrete).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// JSON list of events replacing the file's events.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = DiscreteLtcConfig::DEFAULT_DEADBAND)]
    pub deadband: f64,
    #[arg(long, default_value_t = DiscreteLtcConfig::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DiscreteLtcConfig::DEFAULT_PERIOD)]
    pub period: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoaArgs {
    pub network: PathBuf,
    /// Number of directions.
    #[arg(long, default_value_t = 11)]
    pub directions: usize,
    /// Load ids `I,J` of the projection plane (default: first two loads).
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdmmArgs {
    pub network: PathBuf,
    /// Partition file (JSON object, bus id to agent); defaults to the file's
    /// partition or a single agent.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub r0: Option<String>,
    #[arg(long, default_value_t = admm::DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// JSON `{"v": [...], "u": [...]}` in file load order.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Run local solves one after another.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses arguments, runs, prints the envelope and returns the exit status.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    // Usage errors exit 1; clap's own code 2 is reserved for attention verdicts.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Error as i32 } else { Exit::Success as i32 };
        }
    };
    match execute(&cli) {
        Ok((res, exit)) => {
            println!("{}", res.to_json());
            exit as i32
        }
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Error as i32
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(RunResult, Exit)> {
    match &cli.command {
        Command::Twobus(a) => cmd_twobus(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Alpha(a) => cmd_alpha(a),
        Command::Roa(a) => cmd_roa(a),
        Command::Monitor(a) => cmd_monitor(a),
        Command::Support(a) => cmd_support(a),
        Command::Admm(a) => cmd_admm(a),
    }
}

fn args_digest(command: &str, args: &impl std::fmt::Debug, files: &[&[u8]]) -> String {
    let described = format!("{args:?}");
    let mut parts: Vec<&[u8]> = vec![command.as_bytes(), described.as_bytes()];
    parts.extend_from_slice(files);
    output::digest(&parts)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn parse_event(s: &str) -> Result<TwoBusEvent> {
    let bad = || Error::Parse(format!("event `{s}` is not TIME:x=FACTOR or TIME:load=FACTOR"));
    let (time, rest) = s.split_once(':').ok_or_else(bad)?;
    let (kind, factor) = rest.split_once('=').ok_or_else(bad)?;
    let time: f64 = time.trim().parse().map_err(|_| bad())?;
    let factor: f64 = factor.trim().parse().map_err(|_| bad())?;
    let change = match kind.trim() {
        "x" => TwoBusChange::ScaleReactance(factor),
        "load" => TwoBusChange::ScaleLoad(factor),
        _ => return Err(bad()),
    };
    Ok(TwoBusEvent { time, change })
}

pub fn cmd_twobus(a: &TwobusArgs) -> Result<(RunResult, Exit)> {
    let p = TwoBusParams {
        e: a.e,
        r: a.r,
        x: a.x,
        g_l: a.g_l,
        b_l: a.b_l,
        v0: a.v0,
        t: a.t,
    };
    p.validate()?;
    let coeffs = twobus::quartic_coefficients(&p);
    let eq = twobus::tap_equilibria(&p);
    let mut outputs = json!({
        "coefficients": {"a": coeffs.a, "b": coeffs.b, "c": coeffs.c},
        "equilibria": match eq {
            TapEquilibria::Feasible { r_minus, r_plus } => json!({"r_minus": r_minus, "r_plus": r_plus}),
            TapEquilibria::Infeasible => Value::Null,
        },
    });
    let mut verdict = match eq {
        TapEquilibria::Feasible { .. } => "feasible",
        TapEquilibria::Infeasible => "infeasible",
    };
    let kappa = a.kappa.or((a.b_l != 0.0).then(|| a.g_l / a.b_l));
    if let Some(kappa) = kappa {
        let family = LoadFamily::power_factor(&p, kappa);
        outputs["critical"] = match twobus::critical_susceptance(&family) {
            Ok(c) => json!({"kappa": kappa, "g_l": c.g_l, "b_l": c.b_l}),
            Err(e) => json!({"kappa": kappa, "error": e.to_string()}),
        };
        if a.curve {
            let curve = twobus::bl_r_curve(&family, a.samples)?;
            match &a.csv {
                Some(path) => {
                    let mut w = csv_writer(path)?;
                    w.write_record(["b_l", "g_l", "r_minus", "r_plus"])?;
                    for c in &curve {
                        w.write_record([
                            output::fmt_num(c.b_l),
                            output::fmt_num(c.g_l),
                            output::fmt_num(c.r_minus),
                            output::fmt_num(c.r_plus),
                        ])?;
                    }
                    w.flush()?;
                    outputs["curve_rows"] = json!(curve.len());
                }
                None => outputs["curve"] = serde_json::to_value(&curve)?,
            }
        }
    } else if a.curve {
        return Err(Error::Parse("--curve needs --kappa or a nonzero --BL".into()));
    }
    if a.simulate {
        let r0 = a.r0.ok_or_else(|| Error::Parse("--simulate needs --r0".into()))?;
        let events = a.events.iter().map(|s| parse_event(s)).collect::<Result<Vec<_>>>()?;
        let horizon = a.horizon.unwrap_or(50.0 * a.t);
        let traj = twobus::simulate_twobus(&p, r0, horizon, &events, a.dt)?;
        if let Some(path) = &a.csv {
            if !a.curve {
                let mut w = csv_writer(path)?;
                w.write_record(["t", "r", "v1", "v2"])?;
                for s in &traj.samples {
                    w.write_record([s.t, s.r, s.v1, s.v2].map(output::fmt_num))?;
                }
                w.flush()?;
            }
        }
        let last = traj.samples.last().map(|s| s.r);
        outputs["simulation"] = json!({
            "verdict": traj.verdict,
            "final_r": last,
            "samples": traj.samples.len(),
        });
        verdict = verdict_name(&traj.verdict);
    }
    let exit = if matches!(verdict, "infeasible" | "collapsed") {
        Exit::Attention
    } else {
        Exit::Success
    };
    Ok((RunResult::new("twobus", args_digest("twobus", a, &[]), outputs, verdict), exit))
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Converged { .. } => "converged",
        Verdict::Collapsed { .. } => "collapsed",
        Verdict::Undecided => "undecided",
    }
}

/// `--r0` value, else the file's `r0`.
fn resolve_taps(loaded: &LoadedNetwork, flag: Option<&str>) -> Result<TapState> {
    let net = &loaded.net;
    match flag {
        Some(s) => {
            let vals = s
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad tap value `{x}`"))))
                .collect::<Result<Vec<_>>>()?;
            match vals.len() {
                1 => Ok(TapState::uniform(net.n_load(), vals[0])),
                n if n == net.n_load() => Ok(TapState::new(vals)),
                n => Err(Error::DimensionMismatch(format!("--r0 has {n} values for {} loads", net.n_load()))),
            }
        }
        None => match &loaded.file.r0 {
            Some(map) => file::taps_from_map(net, map),
            None => Err(Error::Parse("no tap position: pass --r0 or add r0 to the network file".into())),
        },
    }
}

fn load_ids_json(net: &Network) -> Value {
    json!(net.load_ids())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(RunResult, Exit)> {
    let loaded = load_network(&a.network)?;
    let net = &loaded.net;
    let r0 = resolve_taps(&loaded, a.r0.as_deref())?;
    let mut extra = Vec::new();
    let entries = match &a.events {
        Some(path) => {
            extra = std::fs::read(path)?;
            serde_json::from_slice::<Vec<file::EventEntry>>(&extra)?
        }
        None => loaded.file.events.clone(),
    };
    let events = file::events_from_entries(net, &entries)?;
    let traj = match a.model {
        Model::Continuous => {
            let cfg = ContinuousConfig {
                dt: a.dt,
                ..ContinuousConfig::new(a.horizon.unwrap_or(200.0))
            };
            dynamics::integrate_with(net, &r0, &cfg, &events)?
        }
        Model::Discrete => {
            let cfg = DiscreteLtcConfig::uniform(net.n_load(), a.deadband, a.step, a.period);
            let steps = (a.horizon.unwrap_or(2000.0) / a.period).ceil().max(1.0) as usize;
            dynamics::simulate_discrete(net, &r0, &cfg, steps, &events)?
        }
    };
    if let Some(path) = &a.csv {
        traj.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let last = traj.last();
    let outputs = json!({
        "model": match a.model { Model::Continuous => "continuous", Model::Discrete => "discrete" },
        "loads": load_ids_json(net),
        "r0": r0,
        "result": traj.verdict,
        "final_t": last.t,
        "final_r": last.r,
        "final_vs": last.v_s,
        "samples": traj.samples.len(),
    });
    let verdict = verdict_name(&traj.verdict);
    let exit = if traj.verdict.is_collapsed() {
        Exit::Attention
    } else {
        Exit::Success
    };
    let digest = args_digest("simulate", a, &[&loaded.bytes, &extra]);
    Ok((RunResult::new("simulate", digest, outputs, verdict), exit))
}

pub fn cmd_alpha(a: &NetArgs) -> Result<(RunResult, Exit)> {
    let loaded = load_network(&a.network)?;
    let digest = args_digest("alpha", a, &[&loaded.bytes]);
    match equilibria::find_alpha(&loaded.net, &AlphaOptions::default()) {
        Ok(eq) => {
            let stable = eq.stability == Stability::Stable;
            let outputs = json!({
                "loads": load_ids_json(&loaded.net),
                "alpha": eq.r_star,
                "stable": stable,
                "residual": eq.residual,
                "eigenvalues": eq.eigenvalues.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            });
            let verdict = match eq.stability {
                Stability::Stable => "stable",
                Stability::Unstable => "unstable",
                Stability::Marginal => "marginal",
            };
            let exit = if stable { Exit::Success } else { Exit::Attention };
            Ok((RunResult::new("alpha", digest, outputs, verdict), exit))
        }
        Err(Error::Infeasible) => Ok((
            RunResult::new("alpha", digest, json!({"alpha": null, "stable": false}), "infeasible"),
            Exit::Attention,
        )),
        Err(e) => Err(e),
    }
}

fn load_pair(net: &Network, spec: Option<&str>) -> Result<(usize, usize)> {
    match spec {
        Some(s) => {
            let ids = s
                .split(',')
                .map(|x| x.trim().parse::<u32>().map_err(|_| Error::Parse(format!("bad load id `{x}`"))))
                .collect::<Result<Vec<_>>>()?;
            if ids.len() != 2 {
                return Err(Error::Parse("--pair takes two load ids".into()));
            }
            let idx = |id: u32| {
                net.index_of(id)
                    .filter(|&i| i < net.n_load())
                    .ok_or_else(|| Error::Parse(format!("{id} is not a load id")))
            };
            Ok((idx(ids[0])?, idx(ids[1])?))
        }
        None if net.n_load() >= 2 => Ok((0, 1)),
        None => Ok((0, 0)),
    }
}

/// Directions on the face spanned by loads `i` and `j` of the simplex.
pub fn pair_directions(n: usize, i: usize, j: usize, count: usize) -> Vec<Vec<f64>> {
    if i == j || count < 2 {
        return vec![vec![1.0 / n as f64; n]];
    }
    (0..count)
        .map(|k| {
            let theta = k as f64 / (count - 1) as f64;
            let mut c = vec![0.0; n];
            c[i] = theta;
            c[j] = 1.0 - theta;
            c
        })
        .collect()
}

pub fn cmd_roa(a: &RoaArgs) -> Result<(RunResult, Exit)> {
    let loaded = load_network(&a.network)?;
    let net = &loaded.net;
    let (i, j) = load_pair(net, a.pair.as_deref())?;
    let dirs = pair_directions(net.n_load(), i, j, a.directions);
    let witnesses = monitor::union_roa(net, &dirs, &DirectionOptions::default())?;
    let corners = monitor::staircase_corners(&witnesses, i, j);
    if let Some(path) = &a.csv {
        monitor::write_corners_csv(&corners, i, j, BufWriter::new(File::create(path)?))?;
    }
    let outputs = json!({
        "loads": load_ids_json(net),
        "pair": [net.load_ids()[i], net.load_ids()[j]],
        "witnesses": witnesses,
        "corners": corners,
    });
    let digest = args_digest("roa", a, &[&loaded.bytes]);
    Ok((RunResult::new("roa", digest, outputs, "ok"), Exit::Success))
}

pub fn cmd_monitor(a: &TapArgs) -> Result<(RunResult, Exit)> {
    let loaded = load_network(&a.network)?;
    let r0 = resolve_taps(&loaded, a.r0.as_deref())?;
    let cert = monitor::certify_stability(&loaded.net, &r0)?;
    let outputs = json!({
        "loads": load_ids_json(&loaded.net),
        "r0": r0,
        "certificate": cert,
        "optimal_cost": cert.cost(),
    });
    let (verdict, exit) = match cert {
        Certificate::Stable { .. } => ("stable", Exit::Success),
        Certificate::NeedsSupport { .. } => ("needs_support", Exit::Attention),
    };
    let digest = args_digest("monitor", a, &[&loaded.bytes]);
    Ok((RunResult::new("monitor", digest, outputs, verdict), exit))
}

pub fn cmd_support(a: &TapArgs) -> Result<(RunResult, Exit)> {
    let loaded = load_network(&a.network)?;
    let r0 = resolve_taps(&loaded, a.r0.as_deref())?;
    let digest = args_digest("support", a, &[&loaded.bytes]);
    match monitor::compute_support(&loaded.net, &r0) {
        Ok(plan) => {
            let mut outputs = serde_json::to_value(&plan)?;
            outputs["loads"] = load_ids_json(&loaded.net);
            outputs["r0"] = serde_json::to_value(&r0)?;
            Ok((RunResult::new("support", digest, outputs, "support_needed"), Exit::Attention))
        }
        Err(Error::AlreadyStable) => Ok((
            RunResult::new(
                "support",
                digest,
                json!({"loads": load_ids_json(&loaded.net), "r0": r0, "d": vec![0.0; loaded.net.n_load()]}),
                "stable",
            ),
            Exit::Success,
        )),
        Err(e) => Err(e),
    }
}

fn read_partition(loaded: &LoadedNetwork, path: Option<&Path>) -> Result<(Partition, Vec<u8>)> {
    let net = &loaded.net;
    let (map, bytes) = match path {
        Some(p) => {
            let bytes = std::fs::read(p)?;
            let map: BTreeMap<u32, usize> = serde_json::from_slice(&bytes)?;
            (Some(map), bytes)
        }
        None => (loaded.file.partition.clone(), Vec::new()),
    };
    let part = match map {
        Some(m) => admm::build_partition(net, &file::assignment_from_map(net, &m)?)?,
        None => Partition::single(net),
    };
    Ok((part, bytes))
}

pub fn cmd_admm(a: &AdmmArgs) -> Result<(RunResult, Exit)> {
    let loaded = load_network(&a.network)?;
    let net = &loaded.net;
    let r0 = resolve_taps(&loaded, a.r0.as_deref())?;
    let (part, part_bytes) = read_partition(&loaded, a.partition.as_deref())?;
    let (warm_start, warm_bytes) = match &a.warm_start {
        Some(p) => {
            let bytes = std::fs::read(p)?;
            (Some(serde_json::from_slice::<WarmStart>(&bytes)?), bytes)
        }
        None => (None, Vec::new()),
    };
    let opts = AdmmOptions {
        rho: a.rho,
        tol: a.tol,
        max_iter: a.max_iter,
        warm_start,
        parallel: !a.sequential,
        ..AdmmOptions::default()
    };
    let report = admm::run(net, &r0, &part, &opts)?;
    if let Some(path) = &a.csv {
        report.write_history_csv(BufWriter::new(File::create(path)?))?;
    }
    let z: BTreeMap<String, f64> = report
        .z
        .iter()
        .map(|(&bus, &v)| (net.bus_ids()[bus].to_string(), v))
        .collect();
    let outputs = json!({
        "loads": load_ids_json(net),
        "agents": part.n_agents(),
        "objective": report.objective(),
        "iterations": report.iterations,
        "primal_residual": report.primal_residual_history.last(),
        "dual_residual": report.dual_residual_history.last(),
        "v": report.v,
        "u": report.u,
        "z": z,
        "messages": report.messages,
    });
    let (verdict, exit) = match report.verdict {
        AdmmVerdict::Converged => ("converged", Exit::Success),
        AdmmVerdict::MaxIter => ("max_iter", Exit::Error),
    };
    let digest = args_digest("admm", a, &[&loaded.bytes, &part_bytes, &warm_bytes]);
    Ok((RunResult::new("admm", digest, outputs, verdict), exit))
}
