//! Closed-form analysis of a generator feeding one load through a
//! lossy line and an LTC.
//!
//! The load admittance uses `Y_L = G_L + j B_L`; the inductive loads of the
//! network model correspond to `B_L = -b_s`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{TapState, Verdict, R_MIN};
use crate::error::{Error, Result};

/// Two-bus system parameters (p.u., seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBusParams {
    pub e: f64,
    pub r: f64,
    pub x: f64,
    pub g_l: f64,
    pub b_l: f64,
    pub v0: f64,
    pub t: f64,
}

impl TwoBusParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("E", self.e), ("V0", self.v0), ("T", self.t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidTwoBus(format!("{name} must be positive (got {v})")));
            }
        }
        if self.r == 0.0 && self.x == 0.0 {
            return Err(Error::InvalidTwoBus("line impedance must be nonzero".into()));
        }
        Ok(())
    }

    fn impedance(&self) -> Complex<f64> {
        Complex::new(self.r, self.x)
    }

    fn admittance(&self) -> Complex<f64> {
        Complex::new(self.g_l, self.b_l)
    }

    /// `|Z Y_L + r^2|`, the magnitude of the voltage divider denominator.
    fn denominator(&self, tap: f64) -> f64 {
        (self.impedance() * self.admittance() + tap * tap).norm()
    }

    /// Secondary voltage magnitude `|r E / (Z Y_L + r^2)|`.
    pub fn secondary_voltage(&self, tap: f64) -> f64 {
        tap * self.e / self.denominator(tap)
    }

    /// Primary (load-bus) voltage magnitude.
    pub fn primary_voltage(&self, tap: f64) -> f64 {
        tap * self.secondary_voltage(tap)
    }

    /// `(V_2(r) - V_0) / T`.
    pub fn tap_rate(&self, tap: f64) -> f64 {
        (self.secondary_voltage(tap) - self.v0) / self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
}

impl QuarticCoeffs {
    /// `a r^4 + b r^2 + c`.
    pub fn eval(&self, tap: f64) -> f64 {
        let s = tap * tap;
        (self.a * s + self.b) * s + self.c
    }
}

/// Equilibrium taps, `r_minus <= r_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TapEquilibria {
    Feasible { r_minus: f64, r_plus: f64 },
    Infeasible,
}

impl TapEquilibria {
    pub fn r_plus(&self) -> Option<f64> {
        match self {
            TapEquilibria::Feasible { r_plus, .. } => Some(*r_plus),
            TapEquilibria::Infeasible => None,
        }
    }

    pub fn r_minus(&self) -> Option<f64> {
        match self {
            TapEquilibria::Feasible { r_minus, .. } => Some(*r_minus),
            TapEquilibria::Infeasible => None,
        }
    }
}

pub fn quartic_coefficients(p: &TwoBusParams) -> QuarticCoeffs {
    let v02 = p.v0 * p.v0;
    let a = v02;
    let b = 2.0 * v02 * (p.r * p.g_l - p.x * p.b_l) - p.e * p.e;
    let c = v02 * (p.g_l * p.g_l + p.b_l * p.b_l) * (p.r * p.r + p.x * p.x);
    QuarticCoeffs {
        a,
        b,
        c,
        delta: b * b - 4.0 * a * c,
    }
}

pub fn tap_equilibria(p: &TwoBusParams) -> TapEquilibria {
    let q = quartic_coefficients(p);
    if q.delta < 0.0 || q.b > 0.0 {
        return TapEquilibria::Infeasible;
    }
    let sq = q.delta.sqrt();
    let plus = (-q.b + sq) / (2.0 * q.a);
    // Product of roots is c/a; avoids cancellation for the small root.
    let minus = if plus > 0.0 { q.c / (q.a * plus) } else { 0.0 };
    TapEquilibria::Feasible {
        r_minus: minus.max(0.0).sqrt(),
        r_plus: plus.max(0.0).sqrt(),
    }
}

/// One-parameter load family `G_L = g0 + kappa s`, `B_L = sigma s`, `s >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadFamily {
    pub e: f64,
    pub r: f64,
    pub x: f64,
    pub v0: f64,
    pub t: f64,
    pub g0: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl LoadFamily {
    /// Constant power factor family `G_L = kappa B_L`, `B_L >= 0`.
    pub fn power_factor(base: &TwoBusParams, kappa: f64) -> Self {
        LoadFamily {
            e: base.e,
            r: base.r,
            x: base.x,
            v0: base.v0,
            t: base.t,
            g0: 0.0,
            kappa,
            sigma: 1.0,
        }
    }

    pub fn at(&self, s: f64) -> TwoBusParams {
        TwoBusParams {
            e: self.e,
            r: self.r,
            x: self.x,
            g_l: self.g0 + self.kappa * s,
            b_l: self.sigma * s,
            v0: self.v0,
            t: self.t,
        }
    }

    fn feasible(&self, s: f64) -> bool {
        matches!(tap_equilibria(&self.at(s)), TapEquilibria::Feasible { .. })
    }
}

/// Largest feasible point of a load family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Family parameter `s*`.
    pub s: f64,
    pub g_l: f64,
    pub b_l: f64,
}

const FAMILY_LIMIT: f64 = 1e6;

pub fn critical_susceptance(family: &LoadFamily) -> Result<CriticalPoint> {
    family.at(0.0).validate()?;
    if !family.feasible(0.0) {
        return Err(Error::NoFeasiblePoint);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while family.feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > FAMILY_LIMIT {
            return Err(Error::UnboundedFamily);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if family.feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = family.at(lo);
    Ok(CriticalPoint {
        s: lo,
        g_l: p.g_l,
        b_l: p.b_l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub b_l: f64,
    pub g_l: f64,
    pub r_minus: f64,
    pub r_plus: f64,
}

/// Equilibrium taps sampled uniformly in `s` over `[0, s*]`.
pub fn bl_r_curve(family: &LoadFamily, n_samples: usize) -> Result<Vec<CurvePoint>> {
    if n_samples < 2 {
        return Err(Error::InvalidTwoBus("need at least two samples".into()));
    }
    let crit = critical_susceptance(family)?;
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let s = if k + 1 == n_samples {
            crit.s
        } else {
            crit.s * k as f64 / (n_samples - 1) as f64
        };
        let p = family.at(s);
        if let TapEquilibria::Feasible { r_minus, r_plus } = tap_equilibria(&p) {
            out.push(CurvePoint {
                b_l: p.b_l,
                g_l: p.g_l,
                r_minus,
                r_plus,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TwoBusChange {
    /// Multiplies the line reactance.
    ScaleReactance(f64),
    /// Multiplies both `G_L` and `B_L`.
    ScaleLoad(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBusEvent {
    pub time: f64,
    pub change: TwoBusChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBusSample {
    pub t: f64,
    pub r: f64,
    pub v1: f64,
    pub v2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBusTrajectory {
    pub samples: Vec<TwoBusSample>,
    pub verdict: Verdict,
    /// Parameters in force at the end of the run.
    pub final_params: TwoBusParams,
}

const DENOM_FLOOR: f64 = 1e-12;
const RATE_CONVERGED: f64 = 1e-8;
const RATE_UNDECIDED: f64 = 1e-6;
const LIMIT_TOL: f64 = 1e-4;

fn alive(p: &TwoBusParams, tap: f64) -> bool {
    tap > R_MIN && tap.is_finite() && p.denominator(tap) >= DENOM_FLOOR
}

fn rk4(p: &TwoBusParams, r: f64, h: f64) -> Option<f64> {
    let f = |x: f64| alive(p, x).then(|| p.tap_rate(x));
    let k1 = f(r)?;
    let k2 = f(r + 0.5 * h * k1)?;
    let k3 = f(r + 0.5 * h * k2)?;
    let k4 = f(r + h * k3)?;
    Some(r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// RK4 simulation of `T r' = V_2(r) - V_0` with timed parameter changes.
///
/// `dt` defaults to `T / 100`; the step grid is realigned at each event.
pub fn simulate_twobus(
    params: &TwoBusParams,
    r0: f64,
    horizon: f64,
    events: &[TwoBusEvent],
    dt: Option<f64>,
) -> Result<TwoBusTrajectory> {
    params.validate()?;
    if !(r0 > 0.0) {
        return Err(Error::NonPositiveTap { index: 0, value: r0 });
    }
    let dt = dt.unwrap_or(params.t / 100.0);
    if !(dt > 0.0) {
        return Err(Error::InvalidTwoBus(format!("step must be positive (got {dt})")));
    }
    let mut events = events.to_vec();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut p = *params;
    let mut r = r0;
    let mut t = 0.0;
    let mut samples = vec![sample(&p, t, r)];
    let mut pending = events.iter().peekable();
    let stop = |p: &TwoBusParams, samples: Vec<TwoBusSample>, verdict| TwoBusTrajectory {
        samples,
        verdict,
        final_params: *p,
    };

    if !alive(&p, r) {
        return Ok(stop(&p, samples, Verdict::Collapsed { t_collapse: 0.0 }));
    }
    loop {
        while let Some(ev) = pending.next_if(|ev| ev.time <= t) {
            apply(&mut p, ev.change);
        }
        let seg_end = pending.peek().map_or(horizon, |ev| ev.time.min(horizon));
        if seg_end <= t {
            break;
        }
        let n = ((seg_end - t) / dt).ceil().max(1.0) as usize;
        let h = (seg_end - t) / n as f64;
        let t0 = t;
        for k in 1..=n {
            let next = rk4(&p, r, h);
            let tk = if k == n { seg_end } else { t0 + k as f64 * h };
            match next {
                Some(x) if alive(&p, x) => {
                    r = x;
                    t = tk;
                    samples.push(sample(&p, t, r));
                }
                _ => {
                    return Ok(stop(&p, samples, Verdict::Collapsed { t_collapse: tk }));
                }
            }
            if pending.peek().is_none() && settled(&p, r, RATE_CONVERGED) {
                return Ok(stop(&p, samples, Verdict::Converged { limit: TapState::new(vec![r]) }));
            }
        }
        if t >= horizon {
            break;
        }
    }
    let verdict = if settled(&p, r, RATE_UNDECIDED) {
        Verdict::Converged {
            limit: TapState::new(vec![r]),
        }
    } else {
        Verdict::Undecided
    };
    Ok(stop(&p, samples, verdict))
}

fn settled(p: &TwoBusParams, r: f64, rate_tol: f64) -> bool {
    let near = tap_equilibria(p)
        .r_plus()
        .is_some_and(|rp| (r - rp).abs() < LIMIT_TOL);
    near && p.tap_rate(r).abs() < rate_tol
}

fn apply(p: &mut TwoBusParams, change: TwoBusChange) {
    match change {
        TwoBusChange::ScaleReactance(f) => p.x *= f,
        TwoBusChange::ScaleLoad(f) => {
            p.g_l *= f;
            p.b_l *= f;
        }
    }
}

fn sample(p: &TwoBusParams, t: f64, r: f64) -> TwoBusSample {
    TwoBusSample {
        t,
        r,
        v1: p.primary_voltage(r),
        v2: p.secondary_voltage(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_one() -> TwoBusParams {
        TwoBusParams {
            e: 1.0,
            r: 0.0,
            x: 1.0,
            g_l: 0.8,
            b_l: 0.4,
            v0: 1.0,
            t: 1.0,
        }
    }

    fn inductive() -> TwoBusParams {
        TwoBusParams {
            g_l: 0.0,
            b_l: -3.0 / 16.0,
            ..example_one()
        }
    }

    #[test]
    fn coefficients_of_example_one() {
        let q = quartic_coefficients(&example_one());
        assert!((q.a - 1.0).abs() < 1e-15);
        assert!((q.b + 1.8).abs() < 1e-15);
        assert!((q.c - 0.8).abs() < 1e-15);
        assert!((q.delta - 0.04).abs() < 1e-14);
    }

    #[test]
    fn coefficients_of_open_circuit() {
        let p = TwoBusParams {
            g_l: 0.0,
            b_l: 0.0,
            e: 1.3,
            v0: 0.9,
            ..example_one()
        };
        let q = quartic_coefficients(&p);
        assert_eq!(q.a, 0.81);
        assert!((q.b + 1.69).abs() < 1e-15);
        assert_eq!(q.c, 0.0);
        assert!((q.delta - 1.69f64.powi(2)).abs() < 1e-14);
    }

    #[test]
    fn coefficients_of_inductive_load() {
        let q = quartic_coefficients(&inductive());
        assert!((q.b + 0.625).abs() < 1e-15);
        assert!((q.c - 0.03515625).abs() < 1e-15);
        assert!((q.delta - 0.25).abs() < 1e-15);
    }

    #[test]
    fn equilibria_of_examples() {
        let TapEquilibria::Feasible { r_minus, r_plus } = tap_equilibria(&example_one()) else {
            panic!("infeasible")
        };
        assert!((r_plus - 1.0).abs() < 1e-12);
        assert!((r_minus - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        let TapEquilibria::Feasible { r_minus, r_plus } = tap_equilibria(&inductive()) else {
            panic!("infeasible")
        };
        assert!((r_plus - 0.75).abs() < 1e-12);
        assert!((r_minus - 0.25).abs() < 1e-12);
        let heavy = TwoBusParams {
            g_l: 1.0,
            b_l: 0.5,
            ..example_one()
        };
        assert_eq!(tap_equilibria(&heavy), TapEquilibria::Infeasible);
    }

    #[test]
    fn critical_point_of_example_one() {
        let fam = LoadFamily::power_factor(&example_one(), 2.0);
        let c = critical_susceptance(&fam).unwrap();
        assert!((c.b_l - (1.0 + 5f64.sqrt()) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn purely_capacitive_family_is_unbounded() {
        let fam = LoadFamily::power_factor(&example_one(), 0.0);
        assert!(matches!(critical_susceptance(&fam), Err(Error::UnboundedFamily)));
    }

    #[test]
    fn inductive_family_matches_discriminant_root() {
        // b = 2Xs - E^2, c = V0^2 X^2 s^2: Delta = 0 at s = E^2 / (4 V0^2 X).
        let fam = LoadFamily {
            sigma: -1.0,
            ..LoadFamily::power_factor(&example_one(), 0.0)
        };
        let c = critical_susceptance(&fam).unwrap();
        assert!((c.b_l + 0.25).abs() < 1e-8);
    }

    #[test]
    fn family_without_feasible_point() {
        // R G_L = 1 at s = 0 gives b = 2 - 1 > 0.
        let fam = LoadFamily {
            r: 1.0,
            g0: 1.0,
            ..LoadFamily::power_factor(&example_one(), 2.0)
        };
        assert!(matches!(critical_susceptance(&fam), Err(Error::NoFeasiblePoint)));
    }

    #[test]
    fn curve_endpoints() {
        let fam = LoadFamily::power_factor(&example_one(), 2.0);
        let pts = bl_r_curve(&fam, 101).unwrap();
        assert_eq!(pts[0].r_minus, 0.0);
        assert!((pts[0].r_plus - 1.0).abs() < 1e-15);
        let last = pts.last().unwrap();
        assert!((last.r_plus - last.r_minus).abs() <= 1e-5);
        let p = fam.at(0.4);
        let TapEquilibria::Feasible { r_minus, r_plus } = tap_equilibria(&p) else {
            panic!()
        };
        assert!((r_minus - 0.894427).abs() < 1e-6 && (r_plus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trajectories_either_side_of_threshold() {
        let p = example_one();
        let up = simulate_twobus(&p, 0.9, 100.0, &[], None).unwrap();
        match up.verdict {
            Verdict::Converged { limit } => assert!((limit[0] - 1.0).abs() < 1e-4),
            v => panic!("{v:?}"),
        }
        let down = simulate_twobus(&p, 0.89, 100.0, &[], None).unwrap();
        assert!(matches!(down.verdict, Verdict::Collapsed { .. }));
    }

    #[test]
    fn line_trip_with_and_without_support() {
        let p = example_one();
        let trip = TwoBusEvent {
            time: 10.0,
            change: TwoBusChange::ScaleReactance(1.2),
        };
        let support = TwoBusEvent {
            time: 11.0,
            change: TwoBusChange::ScaleLoad(0.7),
        };
        let bare = simulate_twobus(&p, 1.0, 100.0, &[trip], None).unwrap();
        assert!(matches!(bare.verdict, Verdict::Collapsed { .. }));
        let helped = simulate_twobus(&p, 1.0, 100.0, &[trip, support], None).unwrap();
        let rp = tap_equilibria(&helped.final_params).r_plus().unwrap();
        match helped.verdict {
            Verdict::Converged { limit } => assert!((limit[0] - rp).abs() < 1e-4),
            v => panic!("{v:?}"),
        }
        assert!(helped.samples.iter().any(|s| (s.t - 10.0).abs() < 1e-12));
        assert!(helped.samples.iter().any(|s| (s.t - 11.0).abs() < 1e-12));
    }
}
