//! Four-stage gated ring with transport-delay semantics.
//!
//! Stage outputs `v[0..4]` follow the logic `v1 = v4 AND edet`,
//! `v2 = NOT v1`, `v3 = NOT v2`, `v4 = NOT v3`. Every input event of a stage
//! schedules a transaction on its output after a freshly drawn delay; as with
//! a transport assignment, the new transaction deletes every pending
//! transaction of that output at or after its own time.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
struct Transaction {
    time: f64,
    value: bool,
    id: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct Ring {
    v: [bool; 4],
    pending: [VecDeque<Transaction>; 4],
    next_id: u64,
}

/// Result of applying a stage event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Applied {
    /// Transaction was deleted or already consumed.
    Stale,
    /// Transaction matured without changing the output.
    Unchanged,
    /// Output toggled to the given value.
    Changed(bool),
}

impl Ring {
    /// Ring in the settled frozen state: stage 1 held low.
    pub(crate) fn frozen() -> Self {
        Ring {
            v: [false, true, false, true],
            pending: Default::default(),
            next_id: 0,
        }
    }

    #[cfg(test)]
    pub(crate) fn output(&self, stage: usize) -> bool {
        self.v[stage]
    }

    /// Whether the ring rests in the frozen state with no output toggle
    /// pending.
    pub(crate) fn is_settled_frozen(&self) -> bool {
        self.v == [false, true, false, true]
            && self
                .pending
                .iter()
                .zip(self.v)
                .all(|(q, v)| q.iter().all(|t| t.value == v))
    }

    /// Value the output of `stage` is driven towards by its current inputs.
    pub(crate) fn evaluate(&self, stage: usize, edet: bool) -> bool {
        match stage {
            0 => self.v[3] && edet,
            s => !self.v[s - 1],
        }
    }

    /// Schedules a transaction on `stage`; returns its id for the event queue.
    pub(crate) fn schedule(&mut self, stage: usize, time: f64, value: bool) -> u64 {
        let queue = &mut self.pending[stage];
        while queue.back().is_some_and(|t| t.time >= time) {
            queue.pop_back();
        }
        let id = self.next_id;
        self.next_id += 1;
        queue.push_back(Transaction { time, value, id });
        id
    }

    /// Matures transaction `id` of `stage` if it is still pending.
    pub(crate) fn apply(&mut self, stage: usize, id: u64) -> Applied {
        let queue = &mut self.pending[stage];
        match queue.front() {
            Some(t) if t.id == id => {
                let value = t.value;
                queue.pop_front();
                if value == self.v[stage] {
                    Applied::Unchanged
                } else {
                    self.v[stage] = value;
                    Applied::Changed(value)
                }
            }
            _ => Applied::Stale,
        }
    }
}
