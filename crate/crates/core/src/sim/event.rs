use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Event kinds in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ReconfigEnd,
    EpochBoundary,
    Arrival,
    StageCompletion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub timestamp: f64,
    pub kind: EventKind,
    /// Request index, instance id or epoch number depending on `kind`.
    pub payload: u64,
    /// Stage a request arrives at; `None` for the ingress arrival.
    pub stage: Option<usize>,
}

impl Event {
    fn key(&self) -> (f64, EventKind, u64, Option<usize>) {
        (self.timestamp, self.kind, self.payload, self.stage)
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ka, pa, sa) = self.key();
        let (tb, kb, pb, sb) = other.key();
        ta.total_cmp(&tb).then(ka.cmp(&kb)).then(pa.cmp(&pb)).then(sa.cmp(&sb))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-ordered event queue.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(event.timestamp.is_finite());
        self.heap.push(std::cmp::Reverse(event));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek(&self) -> Option<&Event> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
