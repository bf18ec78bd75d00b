use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// A learner finishing its current mini-batch at `time`.
#[derive(Debug, Clone, Copy)]
pub struct Completion {
    pub time: f64,
    pub learner: usize,
}

impl PartialEq for Completion {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Completion {}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Strict total order: time, then learner id.
impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.learner.cmp(&other.learner))
    }
}

/// Min-queue of pending completions.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Completion>>,
}

impl EventQueue {
    pub fn with_capacity(n: usize) -> Self {
        EventQueue { heap: BinaryHeap::with_capacity(n) }
    }

    pub fn push(&mut self, time: f64, learner: usize) {
        self.heap.push(Reverse(Completion { time, learner }));
    }

    pub fn pop(&mut self) -> Option<Completion> {
        self.heap.pop().map(|Reverse(c)| c)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(c)| c.time)
    }

    /// Pops every completion stamped with the earliest time, in learner-id order.
    pub fn pop_simultaneous(&mut self, out: &mut Vec<Completion>) {
        out.clear();
        let Some(t) = self.peek_time() else { return };
        while self.peek_time() == Some(t) {
            out.push(self.pop().expect("peeked"));
        }
    }

    pub fn clear(&mut self) {
        self.heap.clear();
    }
}
