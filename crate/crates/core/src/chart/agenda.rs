use std::cmp::{Ordering, Reverse};
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grammar::RuleId;
use crate::lattice::WordHypothesis;

use super::EdgeId;

/// One unit of parser work. Executing a task is one transaction.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Scan(WordHypothesis),
    Combine {
        active: EdgeId,
        passive: EdgeId,
        choice: Option<u32>,
    },
    Predict {
        passive: EdgeId,
        rule: RuleId,
    },
    Finalize(EdgeId),
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Scan(_) => TaskKind::Scan,
            Task::Combine { .. } => TaskKind::Combine,
            Task::Predict { .. } => TaskKind::Predict,
            Task::Finalize(_) => TaskKind::Finalize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Scan,
    Combine,
    Predict,
    Finalize,
    /// Closing the input and scheduling deferred constraints.
    EndOfInput,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Scan,
        TaskKind::Combine,
        TaskKind::Predict,
        TaskKind::Finalize,
        TaskKind::EndOfInput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Scan => "scan",
            TaskKind::Combine => "combine",
            TaskKind::Predict => "predict",
            TaskKind::Finalize => "finalize",
            TaskKind::EndOfInput => "end-of-input",
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Priority(f64);

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Best-first task queue: highest priority first, FIFO among equals.
#[derive(Clone, Debug, Default)]
pub struct Agenda {
    queue: BTreeMap<(Priority, Reverse<u64>), Task>,
    next_seq: u64,
    beam: Option<usize>,
    pruned: u64,
}

impl Agenda {
    pub fn new(beam: Option<usize>) -> Self {
        Agenda {
            beam,
            ..Agenda::default()
        }
    }

    pub fn push(&mut self, task: Task, priority: f64) {
        self.queue
            .insert((Priority(priority), Reverse(self.next_seq)), task);
        self.next_seq += 1;
        if let Some(beam) = self.beam {
            while self.queue.len() > beam {
                self.queue.pop_first();
                self.pruned += 1;
            }
        }
    }

    pub fn pop(&mut self) -> Option<Task> {
        self.queue.pop_last().map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Tasks dropped because the agenda exceeded its beam width.
    pub fn pruned(&self) -> u64 {
        self.pruned
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(n: u32) -> Task {
        Task::Finalize(EdgeId(n))
    }

    #[test]
    fn best_first_then_fifo() {
        let mut a = Agenda::new(None);
        a.push(fin(0), 0.5);
        a.push(fin(1), 0.9);
        a.push(fin(2), 0.5);
        a.push(fin(3), 0.9);
        let order: Vec<Task> = std::iter::from_fn(|| a.pop()).collect();
        assert_eq!(order, vec![fin(1), fin(3), fin(0), fin(2)]);
    }

    #[test]
    fn beam_drops_lowest() {
        let mut a = Agenda::new(Some(2));
        a.push(fin(0), 0.1);
        a.push(fin(1), 0.9);
        a.push(fin(2), 0.5);
        assert_eq!(a.len(), 2);
        assert_eq!(a.pruned(), 1);
        assert_eq!(a.pop(), Some(fin(1)));
        assert_eq!(a.pop(), Some(fin(2)));
        assert!(a.is_empty());
    }
}
