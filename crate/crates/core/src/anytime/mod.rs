//! The chart parser as an anytime producer.
//!
//! Each loop iteration runs one parser transaction, publishes a snapshot
//! when due, then checks the mailbox. An abort therefore takes effect after
//! at most the one transaction in progress.

mod rpg;
mod snapshot;

use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apc::{Completion, Directive, Producer, ProducerContext};
use crate::chart::{ChartParser, StepResult};
use crate::fs::Symbol;
use crate::grammar::Grammar;
use crate::lattice::WordHypothesis;

pub use rpg::{
    measure_rpg, Bucket, KindStats, RpgError, RpgReport, TransactionLog, TransactionRecord,
};
pub use snapshot::{
    assemble_snapshot, best_cover, depth_breadth_delta, forest_dump, format_forest, Analysis,
    DeltaError, DepthBreadth, ParseSnapshot, RunId, SpanReadings,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// Publish as soon as a new passive edge could enter the fragment cover.
    pub fragment_first: bool,
    /// Transactions between regular publications, at least 1.
    pub publish_every: u32,
    pub start_category: Symbol,
    /// Optional agenda width.
    pub beam: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("publish_every must be at least 1")]
    PublishEvery,
    #[error("beam width must be at least 1")]
    Beam,
}

impl StrategyParams {
    pub fn new(start_category: &str) -> Self {
        StrategyParams {
            fragment_first: false,
            publish_every: 1,
            start_category: start_category.into(),
            beam: None,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.publish_every == 0 {
            return Err(ParamError::PublishEvery);
        }
        if self.beam == Some(0) {
            return Err(ParamError::Beam);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feed {
    Hypothesis(WordHypothesis),
    End,
}

pub enum LatticeInput {
    /// All hypotheses known up front; input ends after them.
    Complete(Vec<WordHypothesis>),
    /// Hypotheses arriving over time. A disconnected sender ends the input.
    Stream(Receiver<Feed>),
}

/// How long a producer waiting for input sleeps between status checks.
const INPUT_POLL: Duration = Duration::from_millis(2);

/// What a consumer could have seen at one publication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub run: RunId,
    /// Slot version the snapshot was published under.
    pub version: u64,
    pub coverage: f64,
    pub analysis_count: usize,
    pub readings: u64,
    pub transactions_executed: u64,
    pub finalized: bool,
}

/// Shared, append-only record of every publication.
#[derive(Clone, Debug, Default)]
pub struct PublicationLog(Arc<Mutex<Vec<Publication>>>);

impl PublicationLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, p: Publication) {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).push(p);
    }

    pub fn records(&self) -> Vec<Publication> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Consecutive publications of each run that break monotonicity: coverage
/// or analysis count going down, or no transaction in between.
pub fn monotonicity_violations(pubs: &[Publication]) -> Vec<(Publication, Publication)> {
    let mut out = Vec::new();
    for w in pubs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.run != b.run {
            continue;
        }
        if b.coverage < a.coverage
            || b.analysis_count < a.analysis_count
            || b.transactions_executed <= a.transactions_executed
        {
            out.push((a.clone(), b.clone()));
        }
    }
    out
}

pub struct AnytimeParser {
    grammar: Arc<Grammar>,
    params: StrategyParams,
    log: TransactionLog,
    publications: PublicationLog,
    generation: u64,
}

impl AnytimeParser {
    pub fn new(grammar: Arc<Grammar>, params: StrategyParams) -> Result<Self, ParamError> {
        params.validate()?;
        Ok(AnytimeParser {
            grammar,
            params,
            log: TransactionLog::new(),
            publications: PublicationLog::new(),
            generation: 0,
        })
    }

    /// A handle on the log; it keeps filling while the producer runs.
    pub fn log(&self) -> TransactionLog {
        self.log.clone()
    }

    pub fn publications(&self) -> PublicationLog {
        self.publications.clone()
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }
}

enum Source {
    Done,
    Stream(Receiver<Feed>),
}

impl Source {
    /// Feeds everything available without blocking, or waits up to
    /// `wait` for the next item.
    fn pump(&mut self, parser: &mut ChartParser, wait: Option<Duration>) {
        let Source::Stream(rx) = self else {
            return;
        };
        let mut first = wait;
        loop {
            let item = match first.take() {
                Some(d) => match rx.recv_timeout(d) {
                    Ok(item) => Ok(item),
                    Err(RecvTimeoutError::Timeout) => return,
                    Err(RecvTimeoutError::Disconnected) => Err(()),
                },
                None => match rx.try_recv() {
                    Ok(item) => Ok(item),
                    Err(TryRecvError::Empty) => return,
                    Err(TryRecvError::Disconnected) => Err(()),
                },
            };
            match item {
                Ok(Feed::Hypothesis(wh)) => {
                    let _ = parser.feed(wh);
                }
                Ok(Feed::End) | Err(()) => {
                    parser.end_input();
                    *self = Source::Done;
                    return;
                }
            }
        }
    }
}

impl Producer for AnytimeParser {
    type Input = LatticeInput;
    type Output = ParseSnapshot;

    fn run(
        &mut self,
        input: LatticeInput,
        ctx: &mut ProducerContext<LatticeInput, ParseSnapshot>,
    ) -> Completion<LatticeInput> {
        self.generation += 1;
        let run = RunId {
            process: ctx.id().0,
            generation: self.generation,
        };
        let start = Arc::clone(&self.params.start_category);
        let mut parser = ChartParser::with_beam(Arc::clone(&self.grammar), self.params.beam);
        let mut source = match input {
            LatticeInput::Complete(hyps) => {
                for wh in hyps {
                    let _ = parser.feed(wh);
                }
                parser.end_input();
                Source::Done
            }
            LatticeInput::Stream(rx) => Source::Stream(rx),
        };
        let mut since_publish = 0u32;
        loop {
            source.pump(&mut parser, None);
            match parser.step() {
                StepResult::Transaction(t) => {
                    let tick = ctx.clock().tick();
                    since_publish += 1;
                    let end = parser.lattice().span_end();
                    let chart = parser.chart();
                    let mut new_fragment = false;
                    let mut complete_added = 0;
                    for &id in &t.edges_added {
                        let e = chart.edge(id);
                        if !e.is_passive() {
                            continue;
                        }
                        new_fragment = true;
                        if e.category == start
                            && e.from == 0
                            && e.to == end
                            && e.pending_final.is_empty()
                        {
                            complete_added += 1;
                        }
                    }
                    let publish = since_publish >= self.params.publish_every
                        || (self.params.fragment_first && new_fragment)
                        || parser.is_finalized();
                    if publish {
                        let snap = assemble_snapshot(&parser, &self.params, run);
                        let summary = Publication {
                            run,
                            version: 0,
                            coverage: snap.coverage,
                            analysis_count: snap.analysis_count(),
                            readings: snap.readings,
                            transactions_executed: snap.transactions_executed,
                            finalized: snap.finalized,
                        };
                        let aborted = ctx.is_aborted();
                        let version = ctx.set_result(snap);
                        if !aborted {
                            self.publications.push(Publication { version, ..summary });
                        }
                        since_publish = 0;
                    }
                    self.log.push(TransactionRecord {
                        run,
                        seq: t.seq,
                        kind: t.kind,
                        duration_ns: t.duration.as_nanos() as u64,
                        edges_added: t.edges_added.len() as u32,
                        failures: t.failures,
                        published: publish,
                        complete_added,
                        tick,
                    });
                }
                StepResult::Quiescent => {
                    if parser.is_finalized() {
                        return Completion::Done;
                    }
                    source.pump(&mut parser, Some(INPUT_POLL));
                }
            }
            match ctx.check_status() {
                Directive::Continue => {}
                Directive::StopNow => return Completion::Stopped,
                Directive::ResetWith(next) => return Completion::Reset(next),
            }
        }
    }

    fn cleanup(&mut self) {
        log::debug!("resetting parser after generation {}", self.generation);
    }
}

/// Parses `hyps` to completion without the runtime and returns the parser
/// together with its final snapshot.
pub fn parse_batch(
    grammar: Arc<Grammar>,
    params: &StrategyParams,
    hyps: Vec<WordHypothesis>,
) -> (ChartParser, ParseSnapshot) {
    let mut parser = ChartParser::with_beam(grammar, params.beam);
    for wh in hyps {
        let _ = parser.feed(wh);
    }
    parser.end_input();
    parser.run_to_quiescence();
    let snapshot = assemble_snapshot(&parser, params, RunId::default());
    (parser, snapshot)
}
