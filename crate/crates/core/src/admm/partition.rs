//! Assignment of buses to agents, with the adjacency and boundary sets the
//! consensus updates need.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

/// Buses owned by one agent and the foreign load buses it couples to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentBuses {
    /// Owned load buses (internal indices, ascending).
    pub own: Vec<usize>,
    /// Foreign load buses adjacent to an owned load bus.
    pub adjacent: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Agent of each load bus.
    pub owner: Vec<usize>,
    pub agents: Vec<AgentBuses>,
    /// Load buses with a load neighbor in another agent.
    pub boundary: Vec<usize>,
}

impl Partition {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn is_boundary(&self, bus: usize) -> bool {
        self.boundary.binary_search(&bus).is_ok()
    }

    /// Agents that hold a copy of `bus` (excluding its owner), ascending.
    pub fn neighbors_of(&self, bus: usize) -> Vec<usize> {
        self.agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.adjacent.contains(&bus))
            .map(|(i, _)| i)
            .collect()
    }

    /// Everything in one agent.
    pub fn single(net: &Network) -> Partition {
        let assignment = (0..net.n_load()).map(|i| (i, 0)).collect();
        build_partition(net, &assignment).expect("single-agent partition is valid")
    }
}

/// Builds a partition from an assignment keyed by internal bus index.
///
/// Every load bus must be assigned; generator buses are optional and only
/// count toward an agent's connectivity. Agent ids must be `0..n_agents`.
pub fn build_partition(net: &Network, assignment: &BTreeMap<usize, usize>) -> Result<Partition> {
    let n = net.n_load();
    let total = net.bus_ids().len();
    for &bus in assignment.keys() {
        if bus >= total {
            return Err(Error::InvalidPartition(format!("bus index {bus} does not exist")));
        }
    }
    let mut owner = vec![0; n];
    for (i, slot) in owner.iter_mut().enumerate() {
        *slot = *assignment
            .get(&i)
            .ok_or_else(|| Error::InvalidPartition(format!("load bus {} is unassigned", net.bus_ids()[i])))?;
    }
    let ids: BTreeSet<usize> = assignment.values().copied().collect();
    let n_agents = ids.len();
    if ids.iter().copied().ne(0..n_agents) {
        return Err(Error::InvalidPartition("agent ids must be 0..n_agents".into()));
    }
    for agent in 0..n_agents {
        if !owner.contains(&agent) {
            return Err(Error::InvalidPartition(format!("agent {agent} owns no load bus")));
        }
    }

    // Connectivity of each agent over its assigned buses (loads and generators).
    let mut adj = vec![Vec::new(); total];
    for l in net.lines() {
        adj[l.from].push(l.to);
        adj[l.to].push(l.from);
    }
    for agent in 0..n_agents {
        let members: Vec<usize> = assignment.iter().filter(|(_, a)| **a == agent).map(|(b, _)| *b).collect();
        let set: BTreeSet<usize> = members.iter().copied().collect();
        let mut seen = BTreeSet::from([members[0]]);
        let mut queue = VecDeque::from([members[0]]);
        while let Some(b) = queue.pop_front() {
            for &k in &adj[b] {
                if set.contains(&k) && seen.insert(k) {
                    queue.push_back(k);
                }
            }
        }
        if seen.len() != set.len() {
            return Err(Error::DisconnectedAgent { agent });
        }
    }

    let mut agents: Vec<AgentBuses> = (0..n_agents)
        .map(|a| AgentBuses {
            own: (0..n).filter(|&i| owner[i] == a).collect(),
            adjacent: Vec::new(),
        })
        .collect();
    let mut boundary = BTreeSet::new();
    for (a, agent) in agents.iter_mut().enumerate() {
        let mut foreign = BTreeSet::new();
        for &j in &agent.own {
            for k in net.load_neighbors(j) {
                if owner[k] != a {
                    foreign.insert(k);
                    boundary.insert(j);
                    boundary.insert(k);
                }
            }
        }
        agent.adjacent = foreign.into_iter().collect();
    }
    Ok(Partition {
        owner,
        agents,
        boundary: boundary.into_iter().collect(),
    })
}
