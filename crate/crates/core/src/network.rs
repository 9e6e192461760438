//! Lossless network model: susceptance matrices, load/generator partition and
//! load-bus voltages as a function of the tap vector.
//!
//! Load buses occupy internal indices `0..n_load`, generators follow at
//! `n_load..n_load + n_gen`. External bus ids from input files are kept for
//! reporting only.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::TapState;
use crate::error::{Error, Result};
use crate::linalg::Factorized;

/// Role and parameters of one bus in a raw description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BusKind {
    Load {
        /// Secondary-side load susceptance `b_s` (inductive, p.u.).
        susceptance: f64,
        /// Secondary voltage set-point `V_0` (p.u.).
        setpoint: f64,
        /// LTC time constant (s).
        time_constant: f64,
    },
    Generator {
        /// Fixed terminal voltage magnitude (p.u.).
        voltage: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: u32,
    pub kind: BusKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub from: u32,
    pub to: u32,
    pub susceptance: f64,
}

/// Unvalidated network description, as parsed from a file or built in code.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
}

impl NetworkSpec {
    pub fn load(&mut self, id: u32, susceptance: f64, setpoint: f64, time_constant: f64) -> &mut Self {
        self.buses.push(BusSpec {
            id,
            kind: BusKind::Load {
                susceptance,
                setpoint,
                time_constant,
            },
        });
        self
    }

    pub fn generator(&mut self, id: u32, voltage: f64) -> &mut Self {
        self.buses.push(BusSpec {
            id,
            kind: BusKind::Generator { voltage },
        });
        self
    }

    pub fn line(&mut self, from: u32, to: u32, susceptance: f64) -> &mut Self {
        self.lines.push(LineSpec { from, to, susceptance });
        self
    }

    pub fn build(&self) -> Result<Network> {
        validate_network(self)
    }
}

/// A line between two internal bus indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

/// Validated, immutable network.
#[derive(Debug, Clone)]
pub struct Network {
    ids: Vec<u32>,
    n_load: usize,
    lines: Vec<Line>,
    gen_voltages: DVector<f64>,
    load_susceptances: DVector<f64>,
    setpoints: DVector<f64>,
    time_constants: DVector<f64>,
    b_tilde: DMatrix<f64>,
    b_lg: DMatrix<f64>,
    h: DVector<f64>,
    e_open: DVector<f64>,
    z_open: DMatrix<f64>,
}

/// Partitioned susceptance matrices at a given tap vector.
#[derive(Debug, Clone)]
pub struct SusceptanceBlocks {
    /// Load-load block including `b_s / r^2` on the diagonal.
    pub b_ll: DMatrix<f64>,
    /// Load-load block without the load shunts.
    pub b_tilde_ll: DMatrix<f64>,
    pub b_lg: DMatrix<f64>,
    /// Generator-generator block. Assembled for completeness; nothing consumes it.
    pub b_gg: DMatrix<f64>,
    /// `-B_LG V_G`.
    pub h: DVector<f64>,
    /// Open-circuit load voltages `B~_LL^{-1} h`.
    pub e_open: DVector<f64>,
    /// `B~_LL^{-1}`.
    pub z_open: DMatrix<f64>,
}

/// Primary and secondary load voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVoltages {
    pub primary: DVector<f64>,
    pub secondary: DVector<f64>,
}

pub fn validate_network(spec: &NetworkSpec) -> Result<Network> {
    let mut loads = Vec::new();
    let mut gens = Vec::new();
    let mut seen = BTreeMap::new();
    for (pos, bus) in spec.buses.iter().enumerate() {
        if seen.insert(bus.id, pos).is_some() {
            return Err(Error::InvalidNetwork(format!("duplicate bus id {}", bus.id)));
        }
        match bus.kind {
            BusKind::Load { .. } => loads.push(bus),
            BusKind::Generator { .. } => gens.push(bus),
        }
    }
    if loads.is_empty() {
        return Err(Error::InvalidNetwork("at least one load bus is required".into()));
    }
    if gens.is_empty() {
        return Err(Error::InvalidNetwork("at least one generator bus is required".into()));
    }
    let n = loads.len();
    let ids: Vec<u32> = loads.iter().chain(gens.iter()).map(|b| b.id).collect();
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut b_s = DVector::zeros(n);
    let mut v0 = DVector::zeros(n);
    let mut t = DVector::zeros(n);
    for (i, bus) in loads.iter().enumerate() {
        if let BusKind::Load {
            susceptance,
            setpoint,
            time_constant,
        } = bus.kind
        {
            positive("load_susceptance", i, susceptance)?;
            positive("setpoint", i, setpoint)?;
            positive("time_constant", i, time_constant)?;
            b_s[i] = susceptance;
            v0[i] = setpoint;
            t[i] = time_constant;
        }
    }
    let mut vg = DVector::zeros(gens.len());
    for (i, bus) in gens.iter().enumerate() {
        if let BusKind::Generator { voltage } = bus.kind {
            positive("gen_voltage", i, voltage)?;
            vg[i] = voltage;
        }
    }

    let mut lines = Vec::with_capacity(spec.lines.len());
    for (k, l) in spec.lines.iter().enumerate() {
        let from = *index
            .get(&l.from)
            .ok_or_else(|| Error::InvalidNetwork(format!("line {k} references unknown bus {}", l.from)))?;
        let to = *index
            .get(&l.to)
            .ok_or_else(|| Error::InvalidNetwork(format!("line {k} references unknown bus {}", l.to)))?;
        if from == to {
            return Err(Error::InvalidNetwork(format!("line {k} is a self-loop on bus {}", l.from)));
        }
        positive("line_susceptance", k, l.susceptance)?;
        lines.push(Line {
            from,
            to,
            susceptance: l.susceptance,
        });
    }

    from_parts(ids, n, lines, vg, b_s, v0, t)
}

fn positive(field: &'static str, index: usize, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveParameter { field, index, value })
    }
}

fn from_parts(
    ids: Vec<u32>,
    n_load: usize,
    lines: Vec<Line>,
    gen_voltages: DVector<f64>,
    load_susceptances: DVector<f64>,
    setpoints: DVector<f64>,
    time_constants: DVector<f64>,
) -> Result<Network> {
    let total = ids.len();
    if !connected(total, &lines, |_| true) {
        return Err(Error::DisconnectedGraph);
    }
    if !connected(total, &lines, |i| i < n_load) {
        return Err(Error::DisconnectedLoadSubgraph);
    }

    let m = total - n_load;
    let mut b_tilde = DMatrix::zeros(n_load, n_load);
    let mut b_lg = DMatrix::zeros(n_load, m);
    for l in &lines {
        for (a, b) in [(l.from, l.to), (l.to, l.from)] {
            if a < n_load {
                b_tilde[(a, a)] += l.susceptance;
                if b < n_load {
                    b_tilde[(a, b)] -= l.susceptance;
                } else {
                    b_lg[(a, b - n_load)] -= l.susceptance;
                }
            }
        }
    }
    let h = -(&b_lg * &gen_voltages);
    let fact = Factorized::new(&b_tilde, true)?;
    let z_open = DMatrix::from_columns(
        &(0..n_load)
            .map(|k| {
                let mut e = DVector::zeros(n_load);
                e[k] = 1.0;
                fact.solve(&e)
            })
            .collect::<Result<Vec<_>>>()?,
    );
    let e_open = &z_open * &h;

    Ok(Network {
        ids,
        n_load,
        lines,
        gen_voltages,
        load_susceptances,
        setpoints,
        time_constants,
        b_tilde,
        b_lg,
        h,
        e_open,
        z_open,
    })
}

fn connected(total: usize, lines: &[Line], include: impl Fn(usize) -> bool) -> bool {
    let nodes: Vec<usize> = (0..total).filter(|&i| include(i)).collect();
    let Some(&start) = nodes.first() else {
        return true;
    };
    let mut adj = vec![Vec::new(); total];
    for l in lines {
        if include(l.from) && include(l.to) {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
    }
    let mut seen = vec![false; total];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &k in &adj[i] {
            if !seen[k] {
                seen[k] = true;
                count += 1;
                queue.push_back(k);
            }
        }
    }
    count == nodes.len()
}

impl Network {
    pub fn n_load(&self) -> usize {
        self.n_load
    }

    pub fn n_gen(&self) -> usize {
        self.ids.len() - self.n_load
    }

    /// External ids in internal order (loads first).
    pub fn bus_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn load_ids(&self) -> &[u32] {
        &self.ids[..self.n_load]
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&b| b == id)
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn gen_voltages(&self) -> &DVector<f64> {
        &self.gen_voltages
    }

    pub fn load_susceptances(&self) -> &DVector<f64> {
        &self.load_susceptances
    }

    pub fn setpoints(&self) -> &DVector<f64> {
        &self.setpoints
    }

    pub fn time_constants(&self) -> &DVector<f64> {
        &self.time_constants
    }

    /// Load-load susceptance block with the load shunts removed.
    pub fn b_tilde(&self) -> &DMatrix<f64> {
        &self.b_tilde
    }

    pub fn b_lg(&self) -> &DMatrix<f64> {
        &self.b_lg
    }

    /// Weighted generator voltages `-B_LG V_G`.
    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn e_open(&self) -> &DVector<f64> {
        &self.e_open
    }

    pub fn z_open(&self) -> &DMatrix<f64> {
        &self.z_open
    }

    /// Internal indices of load buses adjacent to load `i` (via load-load lines).
    pub fn load_neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n_load)
            .filter(|&k| k != i && self.b_tilde[(i, k)] != 0.0)
            .collect();
        out.dedup();
        out
    }

    /// `B_LL(r) = B~_LL + diag(b_s / r^2)`.
    pub fn b_ll(&self, r: &TapState) -> Result<DMatrix<f64>> {
        self.check_taps(r)?;
        let mut b = self.b_tilde.clone();
        for i in 0..self.n_load {
            b[(i, i)] += self.load_susceptances[i] / (r[i] * r[i]);
        }
        Ok(b)
    }

    pub fn assemble_blocks(&self, r: &TapState) -> Result<SusceptanceBlocks> {
        let b_ll = self.b_ll(r)?;
        let m = self.n_gen();
        let mut b_gg = DMatrix::zeros(m, m);
        for l in &self.lines {
            for (a, b) in [(l.from, l.to), (l.to, l.from)] {
                if a >= self.n_load {
                    let ga = a - self.n_load;
                    b_gg[(ga, ga)] += l.susceptance;
                    if b >= self.n_load {
                        b_gg[(ga, b - self.n_load)] -= l.susceptance;
                    }
                }
            }
        }
        Ok(SusceptanceBlocks {
            b_ll,
            b_tilde_ll: self.b_tilde.clone(),
            b_lg: self.b_lg.clone(),
            b_gg,
            h: self.h.clone(),
            e_open: self.e_open.clone(),
            z_open: self.z_open.clone(),
        })
    }

    /// Solves `B_LL(r) V = h` and returns `(V, V / r)`.
    pub fn load_voltages(&self, r: &TapState) -> Result<LoadVoltages> {
        let b = self.b_ll(r)?;
        let primary = Factorized::new(&b, true)?.solve(&self.h)?;
        let secondary = DVector::from_fn(self.n_load, |i, _| primary[i] / r[i]);
        Ok(LoadVoltages { primary, secondary })
    }

    fn check_taps(&self, r: &TapState) -> Result<()> {
        if r.len() != self.n_load {
            return Err(Error::DimensionMismatch(format!(
                "tap vector has {} entries, network has {} loads",
                r.len(),
                self.n_load
            )));
        }
        for (index, &value) in r.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveTap { index, value });
            }
        }
        Ok(())
    }

    fn rebuild(&self, lines: Vec<Line>, gen_voltages: DVector<f64>, b_s: DVector<f64>, v0: DVector<f64>, t: DVector<f64>) -> Result<Network> {
        for (i, v) in b_s.iter().enumerate() {
            positive("load_susceptance", i, *v)?;
        }
        for (i, v) in v0.iter().enumerate() {
            positive("setpoint", i, *v)?;
        }
        for (i, v) in t.iter().enumerate() {
            positive("time_constant", i, *v)?;
        }
        for (i, v) in gen_voltages.iter().enumerate() {
            positive("gen_voltage", i, *v)?;
        }
        for (i, l) in lines.iter().enumerate() {
            positive("line_susceptance", i, l.susceptance)?;
        }
        from_parts(self.ids.clone(), self.n_load, lines, gen_voltages, b_s, v0, t)
    }

    /// Copy with the secondary load susceptances replaced.
    pub fn with_load_susceptances(&self, b_s: DVector<f64>) -> Result<Network> {
        if b_s.len() != self.n_load {
            return Err(Error::DimensionMismatch("load susceptance vector".into()));
        }
        self.rebuild(self.lines.clone(), self.gen_voltages.clone(), b_s, self.setpoints.clone(), self.time_constants.clone())
    }

    /// Scales `b_s` of one load (internal index) or of every load.
    pub fn with_scaled_load(&self, load: Option<usize>, factor: f64) -> Result<Network> {
        let mut b_s = self.load_susceptances.clone();
        match load {
            Some(i) if i < self.n_load => b_s[i] *= factor,
            Some(i) => return Err(Error::InvalidNetwork(format!("bus index {i} is not a load"))),
            None => b_s *= factor,
        }
        self.with_load_susceptances(b_s)
    }

    fn line_positions(&self, a: usize, b: usize) -> Vec<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| (l.from == a && l.to == b) || (l.from == b && l.to == a))
            .map(|(k, _)| k)
            .collect()
    }

    /// Scales the susceptance of every line joining internal buses `a` and `b`.
    pub fn with_scaled_line(&self, a: usize, b: usize, factor: f64) -> Result<Network> {
        let pos = self.line_positions(a, b);
        if pos.is_empty() {
            return Err(Error::InvalidNetwork(format!("no line between bus indices {a} and {b}")));
        }
        let mut lines = self.lines.clone();
        for k in pos {
            lines[k].susceptance *= factor;
        }
        self.rebuild(lines, self.gen_voltages.clone(), self.load_susceptances.clone(), self.setpoints.clone(), self.time_constants.clone())
    }

    /// Removes every line joining internal buses `a` and `b`.
    pub fn without_line(&self, a: usize, b: usize) -> Result<Network> {
        let pos = self.line_positions(a, b);
        if pos.is_empty() {
            return Err(Error::InvalidNetwork(format!("no line between bus indices {a} and {b}")));
        }
        let lines = self
            .lines
            .iter()
            .enumerate()
            .filter(|(k, _)| !pos.contains(k))
            .map(|(_, l)| *l)
            .collect();
        self.rebuild(lines, self.gen_voltages.clone(), self.load_susceptances.clone(), self.setpoints.clone(), self.time_constants.clone())
    }

    /// Copy with generator voltages and set-points multiplied by `gamma`.
    pub fn with_voltage_scale(&self, gamma: f64) -> Result<Network> {
        self.rebuild(
            self.lines.clone(),
            &self.gen_voltages * gamma,
            self.load_susceptances.clone(),
            &self.setpoints * gamma,
            self.time_constants.clone(),
        )
    }

    /// Copy with every time constant multiplied by `gamma`.
    pub fn with_time_scale(&self, gamma: f64) -> Result<Network> {
        self.rebuild(
            self.lines.clone(),
            self.gen_voltages.clone(),
            self.load_susceptances.clone(),
            self.setpoints.clone(),
            &self.time_constants * gamma,
        )
    }

    /// Converts back to a raw description (used for serialization).
    pub fn to_spec(&self) -> NetworkSpec {
        let mut spec = NetworkSpec::default();
        for i in 0..self.n_load {
            spec.load(self.ids[i], self.load_susceptances[i], self.setpoints[i], self.time_constants[i]);
        }
        for g in 0..self.n_gen() {
            spec.generator(self.ids[self.n_load + g], self.gen_voltages[g]);
        }
        for l in &self.lines {
            spec.line(self.ids[l.from], self.ids[l.to], l.susceptance);
        }
        spec
    }
}
