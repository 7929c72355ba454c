//! Report output. JSON lines carry an `event` field; the text form is for
//! people and carries the same information.

use std::collections::BTreeMap;
use std::io::Write;

use anyparse::anytime::{measure_rpg, ParseSnapshot, RunId, TransactionRecord};
use anyparse::grammar::Diagnostic;
use serde::Serialize;
use serde_json::json;

use crate::config::Format;

/// Why the consumer stopped looking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    /// Batch parse or producer ran out of work.
    Quiescent,
    /// A complete analysis arrived.
    Satisfied,
    Deadline,
    /// The script aborted the producer.
    Aborted,
}

impl Stop {
    pub fn as_str(self) -> &'static str {
        match self {
            Stop::Quiescent => "quiescent",
            Stop::Satisfied => "satisfied",
            Stop::Deadline => "deadline",
            Stop::Aborted => "aborted",
        }
    }
}

#[derive(Serialize)]
struct TxLine<'a> {
    event: &'static str,
    run: RunId,
    seq: u64,
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration_ns: Option<u64>,
    edges_added: u32,
    failures: u32,
    published: bool,
    complete_added: u32,
    tick: u64,
}

pub struct Reporter<'w> {
    out: &'w mut dyn Write,
    format: Format,
    /// Leave out everything measured in wall-clock time.
    timeless: bool,
}

impl<'w> Reporter<'w> {
    pub fn new(out: &'w mut dyn Write, format: Format, timeless: bool) -> Self {
        Reporter {
            out,
            format,
            timeless,
        }
    }

    fn json(&mut self, value: serde_json::Value) -> std::io::Result<()> {
        writeln!(self.out, "{value}")
    }

    fn summary(snap: &ParseSnapshot) -> String {
        format!(
            "run {} tx {} coverage {} analyses {} readings {}{}{}",
            snap.run.generation,
            snap.transactions_executed,
            snap.coverage,
            snap.analysis_count(),
            snap.readings,
            if snap.finalized { " finalized" } else { "" },
            if snap.void { " void" } else { "" },
        )
    }

    fn analyses_text(&mut self, snap: &ParseSnapshot) -> std::io::Result<()> {
        for a in snap.analyses.iter().filter(|a| a.complete || a.fragment) {
            let mark = if a.complete { '*' } else { '~' };
            let flag = if a.consistent { "" } else { " (inconsistent)" };
            writeln!(
                self.out,
                "  {mark} {}-{} {} {} {}{flag}",
                a.from, a.to, a.category, a.score, a.derivation
            )?;
        }
        Ok(())
    }

    /// A snapshot the consumer observed.
    pub fn snapshot(&mut self, version: u64, snap: &ParseSnapshot) -> std::io::Result<()> {
        match self.format {
            Format::JsonLines => {
                self.json(json!({"event": "snapshot", "version": version, "snapshot": snap}))
            }
            Format::Text => {
                writeln!(self.out, "snapshot v{version} {}", Self::summary(snap))?;
                self.analyses_text(snap)
            }
        }
    }

    /// What the consumer ends up with. `version` is `None` when it never
    /// saw a result.
    pub fn final_result(
        &mut self,
        stop: Stop,
        version: Option<u64>,
        snap: &ParseSnapshot,
    ) -> std::io::Result<()> {
        let forest = snap.forest_dump();
        match self.format {
            Format::JsonLines => self.json(json!({
                "event": "final",
                "stop": stop,
                "version": version,
                "forest": forest,
                "snapshot": snap,
            })),
            Format::Text => {
                let v = version.map_or_else(|| "none".to_string(), |v| format!("v{v}"));
                writeln!(
                    self.out,
                    "final {} {v} {}",
                    stop.as_str(),
                    Self::summary(snap)
                )?;
                self.analyses_text(snap)
            }
        }
    }

    /// The batch forest on its own.
    pub fn forest(&mut self, snap: &ParseSnapshot) -> std::io::Result<()> {
        match self.format {
            Format::JsonLines => self.final_result(Stop::Quiescent, None, snap),
            Format::Text => write!(self.out, "{}", snap.forest_dump()),
        }
    }

    pub fn transactions(&mut self, records: &[TransactionRecord]) -> std::io::Result<()> {
        for r in records {
            let line = TxLine {
                event: "transaction",
                run: r.run,
                seq: r.seq,
                kind: r.kind.as_str(),
                duration_ns: (!self.timeless).then_some(r.duration_ns),
                edges_added: r.edges_added,
                failures: r.failures,
                published: r.published,
                complete_added: r.complete_added,
                tick: r.tick,
            };
            match self.format {
                Format::JsonLines => writeln!(self.out, "{}", serde_json::to_string(&line)?)?,
                Format::Text => writeln!(
                    self.out,
                    "tx {}.{} {} +{} edges{}",
                    r.run.generation,
                    r.seq,
                    line.kind,
                    r.edges_added,
                    if r.published { " published" } else { "" }
                )?,
            }
        }
        Ok(())
    }

    pub fn abort(&mut self, at: u64, transactions_after: usize) -> std::io::Result<()> {
        match self.format {
            Format::JsonLines => self.json(
                json!({"event": "abort", "at": at, "transactions_after": transactions_after}),
            ),
            Format::Text => writeln!(
                self.out,
                "abort at {at}: {transactions_after} transaction(s) after"
            ),
        }
    }

    pub fn reset(&mut self, at: u64, lattice: &str) -> std::io::Result<()> {
        match self.format {
            Format::JsonLines => self.json(json!({"event": "reset", "at": at, "lattice": lattice})),
            Format::Text => writeln!(self.out, "reset at {at} with {lattice}"),
        }
    }

    /// Result production granularity. Without timings only the counts are
    /// reported.
    pub fn rpg(&mut self, records: &[TransactionRecord]) -> std::io::Result<()> {
        if self.timeless || records.is_empty() {
            let mut per_kind: BTreeMap<&str, u64> = BTreeMap::new();
            for r in records {
                *per_kind.entry(r.kind.as_str()).or_default() += 1;
            }
            return match self.format {
                Format::JsonLines => {
                    self.json(json!({"event": "rpg", "count": records.len(), "per_kind": per_kind}))
                }
                Format::Text => {
                    writeln!(self.out, "transactions: {}", records.len())?;
                    for (k, n) in per_kind {
                        writeln!(self.out, "  {k}: {n}")?;
                    }
                    Ok(())
                }
            };
        }
        let report = measure_rpg(records).expect("log is not empty");
        match self.format {
            Format::JsonLines => {
                let per_kind: BTreeMap<&str, _> = report
                    .per_kind
                    .iter()
                    .map(|(k, s)| (k.as_str(), s))
                    .collect();
                self.json(json!({
                    "event": "rpg",
                    "count": report.count,
                    "mean_ms": report.mean_ms,
                    "max_ms": report.max_ms,
                    "expected_per_500ms": report.expected_per_500ms,
                    "buckets": report.buckets,
                    "per_kind": per_kind,
                }))
            }
            Format::Text => write!(self.out, "{report}"),
        }
    }

    pub fn diagnostics(&mut self, diags: &[Diagnostic]) -> std::io::Result<()> {
        for d in diags {
            match self.format {
                Format::JsonLines => self.json(json!({
                    "event": "diagnostic",
                    "source": d.source,
                    "line": d.line,
                    "severity": format!("{:?}", d.severity).to_lowercase(),
                    "message": d.message,
                }))?,
                Format::Text => writeln!(self.out, "{d}")?,
            }
        }
        Ok(())
    }
}
