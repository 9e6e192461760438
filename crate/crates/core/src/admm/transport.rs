//! Message schema and the in-process bulk-synchronous bus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueKind {
    /// An agent's copy of a foreign bus voltage.
    W,
    /// A consensus value published by the bus owner.
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub round: usize,
    pub bus: usize,
    pub kind: ValueKind,
    pub value: f64,
}

/// Cross-agent channel. Messages sent during a superstep become visible
/// after [`Transport::barrier`].
pub trait Transport {
    fn send(&mut self, msg: Message);
    fn barrier(&mut self);
    /// Drains the agent's delivered messages, ordered by `(bus, from)`.
    fn receive(&mut self, agent: usize) -> Vec<Message>;
    fn delivered(&self) -> usize;
}

#[derive(Debug, Default)]
pub struct InProcessBus {
    pending: Vec<Message>,
    inboxes: BTreeMap<usize, Vec<Message>>,
    delivered: usize,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Transport for InProcessBus {
    fn send(&mut self, msg: Message) {
        self.pending.push(msg);
    }

    fn barrier(&mut self) {
        for msg in self.pending.drain(..) {
            self.inboxes.entry(msg.to).or_default().push(msg);
            self.delivered += 1;
        }
        for inbox in self.inboxes.values_mut() {
            inbox.sort_by_key(|m| (m.bus, m.from, m.kind));
        }
    }

    fn receive(&mut self, agent: usize) -> Vec<Message> {
        self.inboxes.remove(&agent).unwrap_or_default()
    }

    fn delivered(&self) -> usize {
        self.delivered
    }
}
