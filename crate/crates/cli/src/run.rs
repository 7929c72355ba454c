use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyparse::anytime::{
    parse_batch, AnytimeParser, Feed, LatticeInput, ParseSnapshot, RunId, TransactionLog,
};
use anyparse::apc::{start_process, Parked, ProcessHandle, SlotValue, StartOptions, Status};
use anyparse::grammar::{check_sources, Grammar, Severity};
use anyparse::lattice::WordHypothesis;

use crate::config::{load_lattice, read, CliError, Format, Mode, RunConfig, Until};
use crate::exit;
use crate::report::{Reporter, Stop};
use crate::script::{parse_script, Action, ConsumerScript};

fn ms(n: u64) -> Duration {
    Duration::from_millis(n)
}

/// Hands hypotheses to a streaming producer at a fixed pace.
struct Feeder {
    tx: Option<Sender<Feed>>,
    hyps: Vec<WordHypothesis>,
    next: usize,
    interval: Duration,
}

impl Feeder {
    fn idle() -> Self {
        Feeder {
            tx: None,
            hyps: Vec::new(),
            next: 0,
            interval: Duration::ZERO,
        }
    }

    fn done(&self) -> bool {
        self.tx.is_none()
    }

    fn next_due(&self, start: Instant) -> Option<Instant> {
        self.tx
            .as_ref()
            .map(|_| start + self.interval * self.next as u32)
    }

    fn pump(&mut self, start: Instant) {
        while let Some(due) = self.next_due(start) {
            if Instant::now() < due {
                return;
            }
            match self.hyps.get(self.next) {
                Some(h) => {
                    log::debug!("feeding {h}");
                    if self
                        .tx
                        .as_ref()
                        .is_some_and(|tx| tx.send(Feed::Hypothesis(h.clone())).is_err())
                    {
                        self.tx = None;
                    }
                    self.next += 1;
                }
                None => {
                    if let Some(tx) = self.tx.take() {
                        let _ = tx.send(Feed::End);
                    }
                }
            }
        }
    }

    fn stop(&mut self) {
        self.tx = None;
    }
}

struct Session {
    handle: ProcessHandle<LatticeInput, ParseSnapshot>,
    log: TransactionLog,
    feeder: Feeder,
    start: Instant,
    start_category: String,
    seen: Option<(u64, Arc<ParseSnapshot>)>,
}

impl Session {
    fn start(
        cfg: &RunConfig,
        grammar: Arc<Grammar>,
        hyps: Vec<WordHypothesis>,
    ) -> Result<Session, CliError> {
        let parser = AnytimeParser::new(grammar, cfg.params.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        let log = parser.log();
        let (input, feeder) = if cfg.feed_interval_ms == 0 || cfg.deterministic {
            if cfg.feed_interval_ms > 0 {
                log::warn!(
                    "deterministic mode hands over the whole lattice; feed interval ignored"
                );
            }
            (LatticeInput::Complete(hyps), Feeder::idle())
        } else {
            let (tx, rx) = channel();
            let feeder = Feeder {
                tx: Some(tx),
                hyps,
                next: 0,
                interval: ms(cfg.feed_interval_ms),
            };
            (LatticeInput::Stream(rx), feeder)
        };
        let opts = if cfg.deterministic {
            StartOptions::lockstep()
        } else {
            StartOptions::default()
        };
        let handle =
            start_process(parser, input, opts).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Session {
            handle,
            log,
            feeder,
            start: Instant::now(),
            start_category: cfg.params.start_category.to_string(),
            seen: None,
        })
    }

    /// Reads the slot and reports the snapshot if its version is new.
    fn poll(&mut self, rep: &mut Reporter) -> std::io::Result<()> {
        if let SlotValue::Ready(e) = self.handle.get_result() {
            if self.seen.as_ref().is_none_or(|(v, _)| e.version > *v) {
                rep.snapshot(e.version, &e.payload)?;
                self.seen = Some((e.version, e.payload));
            }
        }
        Ok(())
    }

    /// A complete analysis of the whole utterance, not just of what has
    /// been fed so far.
    fn satisfied(&self) -> bool {
        self.feeder.done() && self.seen.as_ref().is_some_and(|(_, s)| s.has_complete())
    }

    /// The producer has nothing left to do and will get no more input.
    fn quiescent(&self, wait: Duration) -> bool {
        self.feeder.done() && self.handle.wait_idle(wait) == Status::Quiescent
    }

    /// Sleeps until `until`, feeding on the way, or returns early once the
    /// producer goes quiescent.
    fn wait_until(&mut self, until: Instant) {
        loop {
            self.feeder.pump(self.start);
            let now = Instant::now();
            if now >= until {
                return;
            }
            let wake = self
                .feeder
                .next_due(self.start)
                .map_or(until, |f| f.min(until));
            let nap = wake.saturating_duration_since(now);
            if self.feeder.done() {
                if self.handle.wait_idle(nap) == Status::Quiescent {
                    return;
                }
            } else {
                std::thread::sleep(nap);
            }
        }
    }

    fn finish(&mut self, rep: &mut Reporter, stop: Stop) -> std::io::Result<u8> {
        let (version, snap) = match &self.seen {
            Some((v, s)) => (Some(*v), Arc::clone(s)),
            None => (
                None,
                Arc::new(ParseSnapshot::void(RunId::default(), &self.start_category)),
            ),
        };
        rep.final_result(stop, version, &snap)?;
        Ok(if version.is_none() && stop == Stop::Deadline {
            exit::VOID
        } else {
            exit::OK
        })
    }
}

pub fn cmd_parse(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    cfg.validate()?;
    let grammar = cfg.load_grammar()?;
    let hyps = cfg.load_lattice()?;
    let mut rep = Reporter::new(out, cfg.format, cfg.deterministic);
    if cfg.mode == Mode::Batch {
        let (_, snap) = parse_batch(grammar, &cfg.params, hyps);
        rep.forest(&snap)?;
        return Ok(exit::OK);
    }
    let mut s = Session::start(cfg, grammar, hyps)?;
    let stop = if cfg.deterministic {
        consume_lockstep(cfg, &mut s, &mut rep)?
    } else {
        consume_timed(cfg, &mut s, &mut rep)?
    };
    if stop != Stop::Quiescent {
        s.handle.abort();
    }
    let code = s.finish(&mut rep, stop)?;
    rep.rpg(&s.log.records())?;
    Ok(code)
}

fn consume_timed(cfg: &RunConfig, s: &mut Session, rep: &mut Reporter) -> std::io::Result<Stop> {
    let deadline = cfg.deadline.map(|d| s.start + ms(d));
    let mut next_poll = s.start + ms(cfg.poll_interval);
    loop {
        s.feeder.pump(s.start);
        let now = Instant::now();
        if now >= next_poll && deadline.is_none_or(|d| next_poll <= d) {
            s.poll(rep)?;
            next_poll += ms(cfg.poll_interval);
            if cfg.until == Until::Complete && s.satisfied() {
                return Ok(Stop::Satisfied);
            }
            continue;
        }
        if deadline.is_some_and(|d| now >= d) {
            return Ok(Stop::Deadline);
        }
        if s.quiescent(Duration::ZERO) {
            s.poll(rep)?;
            return Ok(if cfg.until == Until::Complete && s.satisfied() {
                Stop::Satisfied
            } else {
                Stop::Quiescent
            });
        }
        let wake = deadline.map_or(next_poll, |d| d.min(next_poll));
        s.wait_until(wake);
    }
}

/// Transaction-count triggers: a poll after every `poll_interval`
/// transactions, nothing seen past `deadline` transactions.
fn consume_lockstep(cfg: &RunConfig, s: &mut Session, rep: &mut Reporter) -> std::io::Result<Stop> {
    loop {
        match s.handle.wait_parked() {
            Parked::AtCheck(_) => {
                let tx = s.log.len() as u64;
                let within = cfg.deadline.is_none_or(|d| tx <= d);
                if within && tx.is_multiple_of(cfg.poll_interval) {
                    s.poll(rep)?;
                    if cfg.until == Until::Complete && s.satisfied() {
                        return Ok(Stop::Satisfied);
                    }
                }
                if cfg.deadline.is_some_and(|d| tx >= d) {
                    return Ok(Stop::Deadline);
                }
                s.handle.advance();
            }
            Parked::Idle(_) => {
                s.poll(rep)?;
                return Ok(if cfg.until == Until::Complete && s.satisfied() {
                    Stop::Satisfied
                } else {
                    Stop::Quiescent
                });
            }
        }
    }
}

pub fn cmd_replay(
    cfg: &RunConfig,
    script_path: &Path,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let text = read(script_path)?;
    let base = script_path.parent().unwrap_or(Path::new("."));
    let script = parse_script(&text, base).map_err(|source| CliError::Script {
        path: script_path.to_path_buf(),
        source,
    })?;
    replay(cfg, &script, out)
}

/// Runs `script` against a fresh producer. Offsets count transactions in
/// deterministic mode and milliseconds otherwise.
pub fn replay(
    cfg: &RunConfig,
    script: &ConsumerScript,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Anytime;
    cfg.validate()?;
    let grammar = cfg.load_grammar()?;
    let hyps = cfg.load_lattice()?;
    let mut resets: HashMap<PathBuf, Vec<WordHypothesis>> = HashMap::new();
    for step in &script.steps {
        if let Action::Reset(p) = &step.action {
            if !resets.contains_key(p) {
                resets.insert(p.clone(), load_lattice(p)?);
            }
        }
    }

    let mut rep = Reporter::new(out, cfg.format, cfg.deterministic);
    let mut s = Session::start(&cfg, grammar, hyps)?;
    let mut aborted = false;
    for step in &script.steps {
        if cfg.deterministic {
            while let Parked::AtCheck(_) = s.handle.wait_parked() {
                if s.log.len() as u64 >= step.at {
                    break;
                }
                s.handle.advance();
            }
        } else {
            let target = s.start + ms(step.at);
            while Instant::now() < target {
                s.wait_until(target);
                if s.quiescent(Duration::ZERO) {
                    std::thread::sleep(target.saturating_duration_since(Instant::now()));
                }
            }
        }
        match &step.action {
            Action::Poll => s.poll(&mut rep)?,
            Action::Abort => {
                let tick = s.handle.request_abort();
                s.handle.abort();
                rep.abort(step.at, s.log.count_after(tick))?;
                aborted = true;
                break;
            }
            Action::Reset(path) => {
                s.feeder.stop();
                let input = LatticeInput::Complete(resets[path].clone());
                if s.handle.reset(input).is_err() {
                    return Err(CliError::Config(format!(
                        "line {}: reset after the producer stopped",
                        step.line
                    )));
                }
                rep.reset(step.at, &path.display().to_string())?;
            }
        }
    }
    if !aborted {
        if cfg.deterministic {
            while let Parked::AtCheck(_) = s.handle.wait_parked() {
                s.handle.advance();
            }
        } else {
            while !s.quiescent(ms(50)) {
                s.feeder.pump(s.start);
            }
        }
    }
    // Whatever the slot holds last is the consumer's final answer.
    s.seen = match s.handle.get_result() {
        SlotValue::Ready(e) => Some((e.version, e.payload)),
        SlotValue::Void { .. } => None,
    };
    let stop = if aborted {
        Stop::Aborted
    } else {
        Stop::Quiescent
    };
    let code = s.finish(&mut rep, stop)?;
    let records = s.log.records();
    rep.transactions(&records)?;
    rep.rpg(&records)?;
    Ok(code)
}

pub fn cmd_check(
    grammar: &Path,
    lexicon: &Path,
    start: Option<&str>,
    format: Format,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let diags = check_sources(&read(grammar)?, &read(lexicon)?, start);
    let mut rep = Reporter::new(out, format, true);
    rep.diagnostics(&diags)?;
    Ok(if diags.iter().any(|d| d.severity == Severity::Error) {
        exit::CHECK_FAILED
    } else {
        exit::OK
    })
}
