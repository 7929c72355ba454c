//! Transaction log and result production granularity.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::TaskKind;

use super::RunId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub run: RunId,
    /// Position within its run, from 1.
    pub seq: u64,
    pub kind: TaskKind,
    pub duration_ns: u64,
    pub edges_added: u32,
    pub failures: u32,
    /// Whether a snapshot was published right after this transaction.
    pub published: bool,
    /// Complete start-category analyses this transaction produced.
    pub complete_added: u32,
    /// Event clock stamp taken when the transaction finished.
    pub tick: u64,
}

impl TransactionRecord {
    /// A record carrying only a kind and a duration, for synthetic logs.
    pub fn timed(seq: u64, kind: TaskKind, duration: Duration) -> Self {
        TransactionRecord {
            run: RunId::default(),
            seq,
            kind,
            duration_ns: duration.as_nanos() as u64,
            edges_added: 0,
            failures: 0,
            published: false,
            complete_added: 0,
            tick: seq,
        }
    }
}

/// Shared, append-only transaction log.
#[derive(Clone, Debug, Default)]
pub struct TransactionLog(Arc<Mutex<Vec<TransactionRecord>>>);

impl TransactionLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Vec<TransactionRecord>> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, record: TransactionRecord) {
        self.lock().push(record);
    }

    pub fn records(&self) -> Vec<TransactionRecord> {
        self.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.lock().is_empty()
    }

    /// Transactions that finished after clock time `tick`.
    pub fn count_after(&self, tick: u64) -> usize {
        self.lock().iter().filter(|r| r.tick > tick).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KindStats {
    pub count: u64,
    pub mean_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    /// Exclusive upper bound; `None` for the overflow bucket.
    pub below_ms: Option<f64>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RpgReport {
    pub count: u64,
    pub durations_ns: Vec<u64>,
    pub mean_ms: f64,
    pub max_ms: f64,
    /// How many results a consumer can expect within a 500 ms wait.
    pub expected_per_500ms: f64,
    pub buckets: Vec<Bucket>,
    pub per_kind: BTreeMap<TaskKind, KindStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RpgError {
    #[error("transaction log is empty")]
    EmptyLog,
}

const BUCKET_BOUNDS_MS: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

fn mean_ms(total_ns: u128, count: u64) -> f64 {
    total_ns as f64 / count as f64 / 1e6
}

pub fn measure_rpg(log: &[TransactionRecord]) -> Result<RpgReport, RpgError> {
    if log.is_empty() {
        return Err(RpgError::EmptyLog);
    }
    let count = log.len() as u64;
    let total: u128 = log.iter().map(|r| u128::from(r.duration_ns)).sum();
    let mean = mean_ms(total, count);
    let max_ms = log.iter().map(|r| r.duration_ns).max().unwrap_or(0) as f64 / 1e6;

    let mut buckets: Vec<Bucket> = BUCKET_BOUNDS_MS
        .iter()
        .map(|&b| Bucket {
            below_ms: Some(b),
            count: 0,
        })
        .chain(std::iter::once(Bucket {
            below_ms: None,
            count: 0,
        }))
        .collect();
    for r in log {
        let ms = r.duration_ns as f64 / 1e6;
        let i = BUCKET_BOUNDS_MS
            .iter()
            .position(|&b| ms < b)
            .unwrap_or(BUCKET_BOUNDS_MS.len());
        buckets[i].count += 1;
    }

    let mut sums: BTreeMap<TaskKind, (u64, u128)> = BTreeMap::new();
    for r in log {
        let e = sums.entry(r.kind).or_default();
        e.0 += 1;
        e.1 += u128::from(r.duration_ns);
    }
    let per_kind = sums
        .into_iter()
        .map(|(k, (n, ns))| {
            (
                k,
                KindStats {
                    count: n,
                    mean_ms: mean_ms(ns, n),
                },
            )
        })
        .collect();

    Ok(RpgReport {
        count,
        durations_ns: log.iter().map(|r| r.duration_ns).collect(),
        mean_ms: mean,
        max_ms,
        expected_per_500ms: if mean > 0.0 {
            500.0 / mean
        } else {
            f64::INFINITY
        },
        buckets,
        per_kind,
    })
}

impl fmt::Display for RpgReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "transactions: {}", self.count)?;
        writeln!(
            f,
            "mean: {:.4} ms, max: {:.4} ms",
            self.mean_ms, self.max_ms
        )?;
        writeln!(
            f,
            "expected results per 500 ms: {:.1}",
            self.expected_per_500ms
        )?;
        for b in &self.buckets {
            match b.below_ms {
                Some(ms) => writeln!(f, "  < {ms} ms: {}", b.count)?,
                None => writeln!(f, "  >= {} ms: {}", BUCKET_BOUNDS_MS[5], b.count)?,
            }
        }
        for (k, s) in &self.per_kind {
            writeln!(
                f,
                "  {}: {} (mean {:.4} ms)",
                k.as_str(),
                s.count,
                s.mean_ms
            )?;
        }
        Ok(())
    }
}
