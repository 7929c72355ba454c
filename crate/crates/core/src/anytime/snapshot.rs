use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{ChartParser, Edge, EdgeId, EdgeOrigin};
use crate::lattice::Vertex;

use super::StrategyParams;

/// Identifies one producer run: the process and how many resets preceded it.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct RunId {
    pub process: u64,
    pub generation: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub edge: u32,
    pub category: String,
    pub from: Vertex,
    pub to: Vertex,
    pub score: f64,
    /// Rendering of the head structure.
    pub fs: String,
    pub derivation: String,
    /// Start category over everything received, with nothing left to check.
    pub complete: bool,
    /// False once a deferred constraint has failed on this analysis.
    pub consistent: bool,
    /// Part of the fragment cover.
    pub fragment: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanReadings {
    pub from: Vertex,
    pub to: Vertex,
    pub readings: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseSnapshot {
    pub run: RunId,
    pub start_category: String,
    /// Ordered by score, best first; ties by edge id.
    pub analyses: Vec<Analysis>,
    pub coverage: f64,
    pub readings: u64,
    pub readings_span: Option<(Vertex, Vertex)>,
    pub span_readings: Vec<SpanReadings>,
    pub transactions_executed: u64,
    pub input_consumed: u64,
    pub finalized: bool,
    pub void: bool,
}

impl ParseSnapshot {
    pub fn void(run: RunId, start_category: &str) -> Self {
        ParseSnapshot {
            run,
            start_category: start_category.to_string(),
            analyses: Vec::new(),
            coverage: 0.0,
            readings: 0,
            readings_span: None,
            span_readings: Vec::new(),
            transactions_executed: 0,
            input_consumed: 0,
            finalized: false,
            void: true,
        }
    }

    /// Number of start-category analyses. Unlike the fragment list this
    /// never shrinks within a run.
    pub fn analysis_count(&self) -> usize {
        self.analyses
            .iter()
            .filter(|a| a.category == self.start_category)
            .count()
    }

    pub fn complete(&self) -> impl Iterator<Item = &Analysis> {
        self.analyses.iter().filter(|a| a.complete)
    }

    pub fn has_complete(&self) -> bool {
        self.complete().next().is_some()
    }

    pub fn readings_over(&self, from: Vertex, to: Vertex) -> u64 {
        self.span_readings
            .iter()
            .find(|s| s.from == from && s.to == to)
            .map_or(0, |s| s.readings)
    }

    /// The complete analyses in the canonical forest format.
    pub fn forest_dump(&self) -> String {
        format_forest(
            self.complete()
                .map(|a| (a.score, a.derivation.as_str(), a.fs.as_str())),
        )
    }
}

/// One line per analysis, `score<TAB>derivation<TAB>fs`, best first, ties by
/// derivation and structure so the dump never depends on edge ids.
pub fn format_forest<'a>(items: impl Iterator<Item = (f64, &'a str, &'a str)>) -> String {
    let mut rows: Vec<(f64, &str, &str)> = items.collect();
    rows.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| a.2.cmp(b.2))
    });
    let mut out = String::new();
    for (score, derivation, fs) in rows {
        let _ = writeln!(out, "{score}\t{derivation}\t{fs}");
    }
    out
}

/// The batch forest of `parser` in the canonical format.
pub fn forest_dump(parser: &ChartParser, start: &str) -> String {
    let rows: Vec<(f64, String, String)> = parser
        .forest(start)
        .into_iter()
        .map(|e| {
            (
                e.score,
                parser.derivation(e.id),
                parser.head_fs(e.id).to_string(),
            )
        })
        .collect();
    format_forest(rows.iter().map(|(s, d, f)| (*s, d.as_str(), f.as_str())))
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
struct CoverValue {
    covered: u32,
    /// Negated so that larger is better throughout.
    neg_inconsistent: i64,
    neg_count: i64,
    score: f64,
}

impl CoverValue {
    const EMPTY: CoverValue = CoverValue {
        covered: 0,
        neg_inconsistent: 0,
        neg_count: 0,
        score: 1.0,
    };

    fn better_than(&self, other: &CoverValue) -> bool {
        (self.covered, self.neg_inconsistent, self.neg_count)
            .cmp(&(other.covered, other.neg_inconsistent, other.neg_count))
            .then_with(|| self.score.total_cmp(&other.score))
            .is_gt()
    }
}

/// A non-overlapping set of `spans` covering as much of `0..end` as
/// possible; among maximal covers, fewer inconsistent pieces, then fewer
/// pieces, then the higher score product. Input is `(from, to, score,
/// consistent)`; the result holds indices into it, left to right.
pub fn best_cover(spans: &[(Vertex, Vertex, f64, bool)], end: Vertex) -> Vec<usize> {
    let n = end as usize;
    let mut by_end: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (i, &(from, to, _, _)) in spans.iter().enumerate() {
        if from < to && to <= end {
            by_end[to as usize].push(i);
        }
    }
    // best[v]: best cover of 0..v, with the piece ending at v (if any).
    let mut best: Vec<(CoverValue, Option<usize>)> = vec![(CoverValue::EMPTY, None); n + 1];
    for v in 1..=n {
        let mut here = (best[v - 1].0, None);
        for &i in &by_end[v] {
            let (from, to, score, consistent) = spans[i];
            let base = best[from as usize].0;
            let cand = CoverValue {
                covered: base.covered + (to - from),
                neg_inconsistent: base.neg_inconsistent - i64::from(!consistent),
                neg_count: base.neg_count - 1,
                score: base.score * score,
            };
            if cand.better_than(&here.0) {
                here = (cand, Some(i));
            }
        }
        best[v] = here;
    }
    let mut picked = Vec::new();
    let mut v = n;
    while v > 0 {
        match best[v].1 {
            Some(i) => {
                picked.push(i);
                v = spans[i].0 as usize;
            }
            None => v -= 1,
        }
    }
    picked.reverse();
    picked
}

/// Builds the consumer view of the parser's current state. Must be called
/// between transactions.
pub fn assemble_snapshot(
    parser: &ChartParser,
    params: &StrategyParams,
    run: RunId,
) -> ParseSnapshot {
    let start = &*params.start_category;
    let end = parser.lattice().span_end();
    let passives: Vec<&Edge> = parser.current_passives().collect();

    let spans: Vec<(Vertex, Vertex, f64, bool)> = passives
        .iter()
        .map(|e| (e.from, e.to, e.score, !parser.is_inconsistent(e.id)))
        .collect();
    let cover: BTreeSet<EdgeId> = best_cover(&spans, end)
        .into_iter()
        .map(|i| passives[i].id)
        .collect();
    let covered: u32 = cover
        .iter()
        .map(|&id| parser.chart().edge(id).span_len())
        .sum();
    let coverage = if end == 0 {
        0.0
    } else {
        f64::from(covered) / f64::from(end)
    };

    let mut analyses = Vec::new();
    for e in &passives {
        let is_start = &*e.category == start;
        let in_cover = cover.contains(&e.id);
        if !(is_start || (params.fragment_first && in_cover)) {
            continue;
        }
        let consistent = !parser.is_inconsistent(e.id);
        analyses.push(Analysis {
            edge: e.id.0,
            category: e.category.to_string(),
            from: e.from,
            to: e.to,
            score: e.score,
            fs: parser.head_fs(e.id).to_string(),
            derivation: parser.derivation(e.id),
            complete: is_start
                && e.from == 0
                && e.to == end
                && e.pending_final.is_empty()
                && consistent,
            consistent,
            fragment: params.fragment_first && in_cover,
        });
    }
    analyses.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.edge.cmp(&b.edge)));

    // Distinct derivations of the start category per span.
    type Derivation = (EdgeOrigin, Vec<EdgeId>);
    let mut per_span: BTreeMap<(Vertex, Vertex), BTreeSet<Derivation>> = BTreeMap::new();
    for e in passives.iter().filter(|e| &*e.category == start) {
        per_span
            .entry((e.from, e.to))
            .or_default()
            .insert((e.origin, e.children.clone()));
    }
    let span_readings: Vec<SpanReadings> = per_span
        .iter()
        .map(|(&(from, to), d)| SpanReadings {
            from,
            to,
            readings: d.len() as u64,
        })
        .collect();
    let readings_span = span_readings
        .iter()
        .max_by(|a, b| {
            (a.to - a.from)
                .cmp(&(b.to - b.from))
                .then(b.from.cmp(&a.from))
        })
        .map(|s| (s.from, s.to));
    let readings = readings_span.map_or(0, |(f, t)| per_span[&(f, t)].len() as u64);

    let transactions = parser.transactions();
    let finalized = parser.is_finalized();
    ParseSnapshot {
        run,
        start_category: start.to_string(),
        void: analyses.is_empty() && transactions == 0 && !finalized,
        analyses,
        coverage,
        readings,
        readings_span,
        span_readings,
        transactions_executed: transactions,
        input_consumed: parser.lattice().len() as u64,
        finalized,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DepthBreadth {
    pub breadth_gain: f64,
    pub depth_gain: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeltaError {
    #[error("snapshots come from different runs")]
    DifferentRuns,
    #[error("the second snapshot precedes the first")]
    OutOfOrder,
}

/// Breadth gain is the change in coverage; depth gain is the change in the
/// number of readings over the span that was best in `prev` (zero when
/// `prev` had no start-category analysis).
pub fn depth_breadth_delta(
    prev: &ParseSnapshot,
    next: &ParseSnapshot,
) -> Result<DepthBreadth, DeltaError> {
    if prev.run != next.run {
        return Err(DeltaError::DifferentRuns);
    }
    if next.transactions_executed < prev.transactions_executed {
        return Err(DeltaError::OutOfOrder);
    }
    let depth_gain = match prev.readings_span {
        Some((f, t)) => next.readings_over(f, t) as i64 - prev.readings as i64,
        None => 0,
    };
    Ok(DepthBreadth {
        breadth_gain: next.coverage - prev.coverage,
        depth_gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_covered(spans: &[(Vertex, Vertex, f64, bool)]) -> u32 {
        let n = spans.len();
        let mut best = 0;
        for mask in 0u32..(1 << n) {
            let chosen: Vec<_> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| spans[i])
                .collect();
            let overlaps = chosen
                .iter()
                .enumerate()
                .any(|(i, a)| chosen[i + 1..].iter().any(|b| a.0 < b.1 && b.0 < a.1));
            if !overlaps {
                best = best.max(chosen.iter().map(|s| s.1 - s.0).sum());
            }
        }
        best
    }

    #[test]
    fn fragments_cover_whole_lattice() {
        let spans = [(0, 2, 0.8, true), (2, 5, 0.6, true)];
        assert_eq!(best_cover(&spans, 5), vec![0, 1]);
    }

    #[test]
    fn prefers_fewer_pieces_then_score() {
        let spans = [
            (0, 1, 0.9, true),
            (1, 2, 0.9, true),
            (0, 2, 0.1, true),
            (0, 2, 0.2, true),
        ];
        assert_eq!(best_cover(&spans, 2), vec![3]);
    }

    #[test]
    fn consistent_pieces_preferred() {
        let spans = [(0, 2, 0.9, false), (0, 1, 0.5, true), (1, 2, 0.5, true)];
        assert_eq!(best_cover(&spans, 2), vec![1, 2]);
    }

    #[test]
    fn cover_is_maximal_against_exhaustive_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let end = rng.gen_range(1..7u32);
            let n = rng.gen_range(0..8);
            let spans: Vec<_> = (0..n)
                .map(|_| {
                    let a = rng.gen_range(0..end);
                    let b = rng.gen_range(a + 1..=end);
                    (a, b, rng.gen_range(0.0..1.0), true)
                })
                .collect();
            let picked = best_cover(&spans, end);
            let covered: u32 = picked.iter().map(|&i| spans[i].1 - spans[i].0).sum();
            assert_eq!(covered, brute_force_covered(&spans), "{spans:?}");
            for w in picked.windows(2) {
                assert!(spans[w[0]].1 <= spans[w[1]].0);
            }
        }
    }

    fn snap(
        run: RunId,
        tx: u64,
        coverage: f64,
        span: Option<(u32, u32)>,
        readings: &[(u32, u32, u64)],
    ) -> ParseSnapshot {
        let span_readings: Vec<SpanReadings> = readings
            .iter()
            .map(|&(from, to, readings)| SpanReadings { from, to, readings })
            .collect();
        let r = span.map_or(0, |(f, t)| {
            span_readings
                .iter()
                .find(|s| s.from == f && s.to == t)
                .map_or(0, |s| s.readings)
        });
        ParseSnapshot {
            coverage,
            readings: r,
            readings_span: span,
            span_readings,
            transactions_executed: tx,
            void: false,
            ..ParseSnapshot::void(run, "S")
        }
    }

    #[test]
    fn delta_of_identical_snapshots_is_zero() {
        let s = snap(RunId::default(), 3, 0.5, Some((0, 2)), &[(0, 2, 1)]);
        let d = depth_breadth_delta(&s, &s).unwrap();
        assert_eq!(
            d,
            DepthBreadth {
                breadth_gain: 0.0,
                depth_gain: 0
            }
        );
    }

    #[test]
    fn new_reading_of_same_span_is_depth() {
        let a = snap(RunId::default(), 3, 1.0, Some((0, 3)), &[(0, 3, 1)]);
        let b = snap(RunId::default(), 9, 1.0, Some((0, 3)), &[(0, 3, 2)]);
        let d = depth_breadth_delta(&a, &b).unwrap();
        assert_eq!(
            d,
            DepthBreadth {
                breadth_gain: 0.0,
                depth_gain: 1
            }
        );
    }

    #[test]
    fn delta_rejects_foreign_or_reversed_snapshots() {
        let a = snap(
            RunId {
                process: 1,
                generation: 1,
            },
            3,
            0.0,
            None,
            &[],
        );
        let b = snap(
            RunId {
                process: 1,
                generation: 2,
            },
            4,
            0.0,
            None,
            &[],
        );
        assert_eq!(depth_breadth_delta(&a, &b), Err(DeltaError::DifferentRuns));
        let c = snap(
            RunId {
                process: 1,
                generation: 1,
            },
            2,
            0.0,
            None,
            &[],
        );
        assert_eq!(depth_breadth_delta(&a, &c), Err(DeltaError::OutOfOrder));
    }

    #[test]
    fn forest_format_ignores_input_order() {
        let a = format_forest(
            [
                (0.5, "(S b)", "[]"),
                (0.9, "(S a)", "[]"),
                (0.5, "(S a)", "[]"),
            ]
            .into_iter(),
        );
        assert_eq!(a, "0.9\t(S a)\t[]\n0.5\t(S a)\t[]\n0.5\t(S b)\t[]\n");
    }
}
