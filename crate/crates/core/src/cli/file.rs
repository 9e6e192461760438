//! JSON network file.
//!
//! ```json
//! {
//!   "version": 1,
//!   "buses": [
//!     {"id": 1, "kind": "load", "b_s": 0.1875, "v0": 1.0, "t": 1.0},
//!     {"id": 2, "kind": "gen", "v_g": 1.0}
//!   ],
//!   "lines": [{"from": 1, "to": 2, "b": 1.0}],
//!   "r0": {"1": 0.5},
//!   "partition": {"1": 0},
//!   "events": [{"time": 10.0, "action": "scale_bs", "target": 1, "factor": 1.2}]
//! }
//! ```
//!
//! Bus ids are the external ids; `r0` and `partition` are keyed by load id.
//! Event targets are a load id (`scale_bs`, omitted for all loads) or a
//! `[from, to]` pair (`scale_line`, `remove_line`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{NetworkChange, NetworkEvent, TapState};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: u32,
    pub buses: Vec<BusEntry>,
    pub lines: Vec<LineEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<BTreeMap<u32, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<BTreeMap<u32, usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BusEntry {
    Load { id: u32, b_s: f64, v0: f64, t: f64 },
    Gen { id: u32, v_g: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub from: u32,
    pub to: u32,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventEntry {
    ScaleBs {
        time: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<u32>,
        factor: f64,
    },
    ScaleLine { time: f64, target: [u32; 2], factor: f64 },
    RemoveLine { time: f64, target: [u32; 2] },
}

/// Parsed and validated network file.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub file: NetworkFile,
    pub net: Network,
    /// Raw bytes, for the input digest.
    pub bytes: Vec<u8>,
}

impl NetworkFile {
    pub fn parse(text: &str) -> Result<NetworkFile> {
        let file: NetworkFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported network file version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        let mut spec = NetworkSpec::default();
        for b in &self.buses {
            match *b {
                BusEntry::Load { id, b_s, v0, t } => spec.load(id, b_s, v0, t),
                BusEntry::Gen { id, v_g } => spec.generator(id, v_g),
            };
        }
        for l in &self.lines {
            spec.line(l.from, l.to, l.b);
        }
        spec
    }

    /// File contents describing `net` (no scenario data).
    pub fn from_network(net: &Network) -> NetworkFile {
        let spec = net.to_spec();
        let buses = spec
            .buses
            .iter()
            .map(|b| match b.kind {
                crate::network::BusKind::Load {
                    susceptance,
                    setpoint,
                    time_constant,
                } => BusEntry::Load {
                    id: b.id,
                    b_s: susceptance,
                    v0: setpoint,
                    t: time_constant,
                },
                crate::network::BusKind::Generator { voltage } => BusEntry::Gen { id: b.id, v_g: voltage },
            })
            .collect();
        let lines = spec
            .lines
            .iter()
            .map(|l| LineEntry {
                from: l.from,
                to: l.to,
                b: l.susceptance,
            })
            .collect();
        NetworkFile {
            version: FORMAT_VERSION,
            buses,
            lines,
            r0: None,
            partition: None,
            events: Vec::new(),
        }
    }
}

pub fn load_network(path: &Path) -> Result<LoadedNetwork> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let file = NetworkFile::parse(text)?;
    let net = file.to_spec().build()?;
    Ok(LoadedNetwork { file, net, bytes })
}

fn load_index(net: &Network, id: u32) -> Result<usize> {
    match net.index_of(id) {
        Some(i) if i < net.n_load() => Ok(i),
        Some(_) => Err(Error::Parse(format!("bus {id} is a generator, expected a load"))),
        None => Err(Error::Parse(format!("unknown bus id {id}"))),
    }
}

fn bus_index(net: &Network, id: u32) -> Result<usize> {
    net.index_of(id).ok_or_else(|| Error::Parse(format!("unknown bus id {id}")))
}

/// Tap vector from a map keyed by load id; every load must be present.
pub fn taps_from_map(net: &Network, map: &BTreeMap<u32, f64>) -> Result<TapState> {
    let mut r = vec![f64::NAN; net.n_load()];
    for (&id, &v) in map {
        r[load_index(net, id)?] = v;
    }
    if let Some(i) = r.iter().position(|x| x.is_nan()) {
        return Err(Error::Parse(format!("r0 is missing load {}", net.load_ids()[i])));
    }
    Ok(TapState::new(r))
}

/// Internal assignment from a map keyed by bus id.
pub fn assignment_from_map(net: &Network, map: &BTreeMap<u32, usize>) -> Result<BTreeMap<usize, usize>> {
    map.iter().map(|(&id, &a)| Ok((bus_index(net, id)?, a))).collect()
}

pub fn events_from_entries(net: &Network, entries: &[EventEntry]) -> Result<Vec<NetworkEvent>> {
    entries
        .iter()
        .map(|e| {
            Ok(match *e {
                EventEntry::ScaleBs { time, target, factor } => NetworkEvent {
                    time,
                    change: NetworkChange::ScaleBs {
                        load: target.map(|id| load_index(net, id)).transpose()?,
                        factor,
                    },
                },
                EventEntry::ScaleLine { time, target, factor } => NetworkEvent {
                    time,
                    change: NetworkChange::ScaleLine {
                        from: bus_index(net, target[0])?,
                        to: bus_index(net, target[1])?,
                        factor,
                    },
                },
                EventEntry::RemoveLine { time, target } => NetworkEvent {
                    time,
                    change: NetworkChange::RemoveLine {
                        from: bus_index(net, target[0])?,
                        to: bus_index(net, target[1])?,
                    },
                },
            })
        })
        .collect()
}
