//! Continuous and discrete LTC dynamics on a network, with timed events.

use std::io::Write;
use std::ops::{Deref, Index};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cli::output::fmt_num;
use crate::equilibria;
use crate::error::{Error, Result};
use crate::network::Network;

/// Collapse floor on any tap ratio (p.u.).
pub const R_MIN: f64 = 1e-3;
const RATE_TOL: f64 = 1e-8;
const ALPHA_TOL: f64 = 1e-4;

/// Tap ratios, one per load bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TapState(Vec<f64>);

impl TapState {
    pub fn new(r: Vec<f64>) -> Self {
        TapState(r)
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        TapState(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_i |self_i - other_i|`.
    pub fn distance(&self, other: &TapState) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Componentwise `self <= other + tol`.
    pub fn le(&self, other: &TapState, tol: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + tol)
    }
}

impl Deref for TapState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for TapState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for TapState {
    fn from(v: Vec<f64>) -> Self {
        TapState(v)
    }
}

impl From<&DVector<f64>> for TapState {
    fn from(v: &DVector<f64>) -> Self {
        TapState(v.iter().copied().collect())
    }
}

/// Terminal classification of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Converged { limit: TapState },
    Collapsed { t_collapse: f64 },
    Undecided,
}

impl Verdict {
    pub fn is_converged(&self) -> bool {
        matches!(self, Verdict::Converged { .. })
    }

    pub fn is_collapsed(&self) -> bool {
        matches!(self, Verdict::Collapsed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub r: TapState,
    pub v_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub verdict: Verdict,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Writes `t, r_1..r_n, Vs_1..Vs_n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.samples.first().map_or(0, |s| s.r.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("r_{i}")));
        header.extend((1..=n).map(|i| format!("Vs_{i}")));
        out.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![fmt_num(s.t)];
            row.extend(s.r.iter().map(|x| fmt_num(*x)));
            row.extend(s.v_s.iter().map(|x| fmt_num(*x)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Structural change applied to the network at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum NetworkChange {
    /// Scales `b_s` of one load (internal index) or of all loads.
    ScaleBs { load: Option<usize>, factor: f64 },
    /// Scales the susceptance of the line(s) between two internal buses.
    ScaleLine { from: usize, to: usize, factor: f64 },
    RemoveLine { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkEvent {
    pub time: f64,
    pub change: NetworkChange,
}

impl NetworkChange {
    pub fn apply(&self, net: &Network) -> Result<Network> {
        match *self {
            NetworkChange::ScaleBs { load, factor } => net.with_scaled_load(load, factor),
            NetworkChange::ScaleLine { from, to, factor } => net.with_scaled_line(from, to, factor),
            NetworkChange::RemoveLine { from, to } => net.without_line(from, to),
        }
    }
}

/// Networks in force over successive time intervals, validated up front.
#[derive(Debug, Clone)]
pub struct Scenario {
    stages: Vec<Stage>,
}

#[derive(Debug, Clone)]
struct Stage {
    start: f64,
    net: Network,
    alpha: Option<TapState>,
}

impl Scenario {
    pub fn new(net: &Network, events: &[NetworkEvent]) -> Result<Self> {
        let mut events = events.to_vec();
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut stages = vec![Stage::new(0.0, net.clone())];
        for ev in events {
            let next = ev.change.apply(&stages.last().expect("nonempty").net)?;
            stages.push(Stage::new(ev.time.max(0.0), next));
        }
        Ok(Scenario { stages })
    }

    /// Network after all events.
    pub fn final_network(&self) -> &Network {
        &self.stages.last().expect("nonempty").net
    }

    pub fn final_alpha(&self) -> Option<&TapState> {
        self.stages.last().expect("nonempty").alpha.as_ref()
    }
}

impl Stage {
    fn new(start: f64, net: Network) -> Self {
        let alpha = equilibria::find_alpha(&net, &Default::default()).ok().map(|e| e.r_star);
        Stage { start, net, alpha }
    }

    fn converged(&self, r: &TapState, rate: &DVector<f64>) -> bool {
        rate.amax() < RATE_TOL && self.alpha.as_ref().is_none_or(|a| a.distance(r) < ALPHA_TOL)
    }
}

/// `r'_i = (V_s,i(r) - V_0,i) / T_i`.
pub fn rhs(net: &Network, r: &TapState) -> Result<DVector<f64>> {
    let v = net.load_voltages(r)?;
    Ok((v.secondary - net.setpoints()).component_div(net.time_constants()))
}

fn rk4(net: &Network, r: &TapState, h: f64) -> Result<TapState> {
    let x = r.to_dvector();
    let f = |y: &DVector<f64>| -> Result<DVector<f64>> {
        if y.min() <= R_MIN {
            return Err(Error::NonPositiveTap {
                index: y.imin(),
                value: y.min(),
            });
        }
        rhs(net, &TapState::from(y))
    };
    let k1 = f(&x)?;
    let k2 = f(&(&x + &k1 * (0.5 * h)))?;
    let k3 = f(&(&x + &k2 * (0.5 * h)))?;
    let k4 = f(&(&x + &k3 * h))?;
    Ok(TapState::from(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))))
}

/// Options for [`integrate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousConfig {
    pub horizon: f64,
    /// Defaults to `min_i T_i / 100`.
    pub dt: Option<f64>,
    /// Record every `sample_stride`-th step (the final state is always kept).
    pub sample_stride: usize,
}

impl ContinuousConfig {
    pub fn new(horizon: f64) -> Self {
        ContinuousConfig {
            horizon,
            dt: None,
            sample_stride: 1,
        }
    }
}

/// RK4 integration of the continuous LTC dynamics.
pub fn integrate_continuous(
    net: &Network,
    r0: &TapState,
    horizon: f64,
    dt: Option<f64>,
    events: &[NetworkEvent],
) -> Result<Trajectory> {
    integrate_with(
        net,
        r0,
        &ContinuousConfig {
            horizon,
            dt,
            sample_stride: 1,
        },
        events,
    )
}

pub fn integrate_with(
    net: &Network,
    r0: &TapState,
    cfg: &ContinuousConfig,
    events: &[NetworkEvent],
) -> Result<Trajectory> {
    check_start(net, r0)?;
    let scenario = Scenario::new(net, events)?;
    let dt = cfg.dt.unwrap_or(net.time_constants().min() / 100.0);
    if !(dt > 0.0) || !(cfg.horizon >= 0.0) {
        return Err(Error::InvalidNetwork(format!("invalid step {dt} or horizon {}", cfg.horizon)));
    }
    let stride = cfg.sample_stride.max(1);
    let stages = &scenario.stages;

    let mut r = r0.clone();
    let mut t = 0.0;
    let mut samples = Vec::new();
    let mut stage_idx = active_stage(stages, t);
    let collapsed = |samples, t| Trajectory {
        samples,
        verdict: Verdict::Collapsed { t_collapse: t },
    };

    let Ok(v0) = stages[stage_idx].net.load_voltages(&r) else {
        return Ok(collapsed(vec![], 0.0));
    };
    samples.push(Sample {
        t,
        r: r.clone(),
        v_s: v0.secondary.iter().copied().collect(),
    });

    let mut step_count = 0usize;
    loop {
        stage_idx = active_stage(stages, t);
        let stage = &stages[stage_idx];
        let last_stage = stage_idx + 1 == stages.len();
        if last_stage {
            if let Ok(rate) = rhs(&stage.net, &r) {
                if stage.converged(&r, &rate) {
                    return Ok(Trajectory {
                        samples,
                        verdict: Verdict::Converged { limit: r },
                    });
                }
            }
        }
        let seg_end = stages
            .get(stage_idx + 1)
            .map_or(cfg.horizon, |s| s.start.min(cfg.horizon));
        if seg_end <= t {
            break;
        }
        let n = ((seg_end - t) / dt).ceil().max(1.0) as usize;
        let h = (seg_end - t) / n as f64;
        let t0 = t;
        for k in 1..=n {
            let tk = if k == n { seg_end } else { t0 + k as f64 * h };
            let next = match rk4(&stage.net, &r, h) {
                Ok(x) if x.min() > R_MIN => x,
                _ => return Ok(collapsed(samples, tk)),
            };
            let Ok(v) = stage.net.load_voltages(&next) else {
                return Ok(collapsed(samples, tk));
            };
            r = next;
            t = tk;
            step_count += 1;
            let rate = (&v.secondary - stage.net.setpoints()).component_div(stage.net.time_constants());
            let done = last_stage && stage.converged(&r, &rate);
            if step_count.is_multiple_of(stride) || k == n || done {
                samples.push(Sample {
                    t,
                    r: r.clone(),
                    v_s: v.secondary.iter().copied().collect(),
                });
            }
            if done {
                return Ok(Trajectory {
                    samples,
                    verdict: Verdict::Converged { limit: r },
                });
            }
        }
        if t >= cfg.horizon {
            break;
        }
    }
    Ok(Trajectory {
        samples,
        verdict: Verdict::Undecided,
    })
}

fn active_stage(stages: &[Stage], t: f64) -> usize {
    stages.iter().rposition(|s| s.start <= t).unwrap_or(0)
}

fn check_start(net: &Network, r0: &TapState) -> Result<()> {
    if r0.len() != net.n_load() {
        return Err(Error::DimensionMismatch(format!(
            "initial tap vector has {} entries, network has {} loads",
            r0.len(),
            net.n_load()
        )));
    }
    for (index, &value) in r0.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveTap { index, value });
        }
    }
    Ok(())
}

/// Discrete tap-changer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLtcConfig {
    pub deadband: Vec<f64>,
    pub step: Vec<f64>,
    /// Seconds between tap decisions.
    pub period: f64,
}

impl DiscreteLtcConfig {
    pub const DEFAULT_DEADBAND: f64 = 0.01;
    pub const DEFAULT_STEP: f64 = 0.0125;
    pub const DEFAULT_PERIOD: f64 = 10.0;

    pub fn uniform(n: usize, deadband: f64, step: f64, period: f64) -> Self {
        DiscreteLtcConfig {
            deadband: vec![deadband; n],
            step: vec![step; n],
            period,
        }
    }

    pub fn defaults(n: usize) -> Self {
        Self::uniform(n, Self::DEFAULT_DEADBAND, Self::DEFAULT_STEP, Self::DEFAULT_PERIOD)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.deadband.len() != n || self.step.len() != n {
            return Err(Error::DimensionMismatch("discrete LTC config length".into()));
        }
        if self.deadband.iter().any(|d| !(*d >= 0.0)) || self.step.iter().any(|s| !(*s > 0.0)) || !(self.period > 0.0) {
            return Err(Error::InvalidNetwork("deadband must be >= 0, step and period > 0".into()));
        }
        Ok(())
    }
}

/// One tap decision per load: move by one step when `V_s` leaves the deadband.
pub fn step_discrete(net: &Network, r: &TapState, cfg: &DiscreteLtcConfig) -> Result<TapState> {
    cfg.validate(net.n_load())?;
    let v = net.load_voltages(r)?;
    Ok(tap_rule(&v.secondary, net.setpoints(), r, cfg))
}

fn tap_rule(v_s: &DVector<f64>, v0: &DVector<f64>, r: &TapState, cfg: &DiscreteLtcConfig) -> TapState {
    TapState::new(
        (0..r.len())
            .map(|i| {
                if v_s[i] > v0[i] + cfg.deadband[i] {
                    r[i] + cfg.step[i]
                } else if v_s[i] < v0[i] - cfg.deadband[i] {
                    r[i] - cfg.step[i]
                } else {
                    r[i]
                }
            })
            .collect(),
    )
}

/// Idle steps (no tap moves) required before declaring convergence.
const IDLE_STEPS: usize = 3;

pub fn simulate_discrete(
    net: &Network,
    r0: &TapState,
    cfg: &DiscreteLtcConfig,
    max_steps: usize,
    events: &[NetworkEvent],
) -> Result<Trajectory> {
    check_start(net, r0)?;
    cfg.validate(net.n_load())?;
    let scenario = Scenario::new(net, events)?;
    let stages = &scenario.stages;
    let mut r = r0.clone();
    let mut samples = Vec::new();
    let mut idle = 0;
    for k in 0..=max_steps {
        let t = k as f64 * cfg.period;
        let idx = active_stage(stages, t);
        let stage = &stages[idx];
        if r.min() <= R_MIN {
            return Ok(Trajectory {
                samples,
                verdict: Verdict::Collapsed { t_collapse: t },
            });
        }
        let Ok(v) = stage.net.load_voltages(&r) else {
            return Ok(Trajectory {
                samples,
                verdict: Verdict::Collapsed { t_collapse: t },
            });
        };
        samples.push(Sample {
            t,
            r: r.clone(),
            v_s: v.secondary.iter().copied().collect(),
        });
        if idx + 1 == stages.len() && idle >= IDLE_STEPS {
            return Ok(Trajectory {
                samples,
                verdict: Verdict::Converged { limit: r },
            });
        }
        if k == max_steps {
            break;
        }
        let next = tap_rule(&v.secondary, stage.net.setpoints(), &r, cfg);
        if next == r {
            idle += 1;
        } else {
            idle = 0;
        }
        r = next;
    }
    Ok(Trajectory {
        samples,
        verdict: Verdict::Undecided,
    })
}
