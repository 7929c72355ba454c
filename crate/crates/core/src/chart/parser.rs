use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::fs::{FeatureStructure, Path, UnifyFailure};
use crate::grammar::{initial_layout, Grammar, RuleId};
use crate::lattice::{Lattice, Vertex, WordHypothesis};

use super::{Agenda, Chart, Edge, EdgeId, EdgeOrigin, Task, TaskKind};

/// Score of an edge built from two others.
pub fn combine_scores(active: f64, passive: f64) -> f64 {
    active * passive
}

/// The cheap test run before any unification: adjacent spans and the
/// passive category matching the symbol after the active edge's dot.
pub fn category_check(active: &Edge, passive: &Edge) -> bool {
    !active.is_passive()
        && passive.is_passive()
        && active.to == passive.from
        && active.expects.as_ref() == Some(&passive.category)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("input already ended")]
    InputEnded,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub category_checks: u64,
    pub fundamental_applications: u64,
    pub unification_failures: u64,
    pub finalize_failures: u64,
    pub scans: u64,
    pub unknown_words: u64,
    pub duplicate_edges: u64,
}

#[derive(Clone, Debug)]
pub struct TransactionOutcome {
    /// 1-based position of this transaction in the run.
    pub seq: u64,
    pub kind: TaskKind,
    pub edges_added: Vec<EdgeId>,
    pub failures: u32,
    pub duration: Duration,
    pub warning: Option<String>,
}

#[derive(Clone, Debug)]
pub enum StepResult {
    Transaction(TransactionOutcome),
    /// Nothing to do until more input arrives (or ever, once input ended).
    Quiescent,
}

/// Agenda-driven bottom-up chart parser. Each call to [`ChartParser::step`]
/// executes one task to completion.
#[derive(Clone, Debug)]
pub struct ChartParser {
    grammar: Arc<Grammar>,
    chart: Chart,
    agenda: Agenda,
    lattice: Lattice,
    input_ended: bool,
    end_processed: bool,
    predicted: HashSet<(RuleId, Vertex)>,
    inconsistent: BTreeSet<EdgeId>,
    refinements: BTreeMap<EdgeId, EdgeId>,
    stats: ParseStats,
    warnings: Vec<String>,
    transactions: u64,
}

impl ChartParser {
    pub fn new(grammar: Arc<Grammar>) -> Self {
        Self::with_beam(grammar, None)
    }

    /// `beam` bounds the agenda; the lowest-priority tasks are dropped.
    pub fn with_beam(grammar: Arc<Grammar>, beam: Option<usize>) -> Self {
        ChartParser {
            grammar,
            chart: Chart::new(),
            agenda: Agenda::new(beam),
            lattice: Lattice::new(),
            input_ended: false,
            end_processed: false,
            predicted: HashSet::new(),
            inconsistent: BTreeSet::new(),
            refinements: BTreeMap::new(),
            stats: ParseStats::default(),
            warnings: Vec::new(),
            transactions: 0,
        }
    }

    pub fn grammar(&self) -> &Arc<Grammar> {
        &self.grammar
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn stats(&self) -> &ParseStats {
        &self.stats
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn transactions(&self) -> u64 {
        self.transactions
    }

    pub fn agenda_len(&self) -> usize {
        self.agenda.len()
    }

    pub fn pruned(&self) -> u64 {
        self.agenda.pruned()
    }

    pub fn input_ended(&self) -> bool {
        self.input_ended
    }

    /// True once the end of the utterance has been processed and every
    /// deferred constraint has been checked.
    pub fn is_finalized(&self) -> bool {
        self.end_processed && self.agenda.is_empty()
    }

    pub fn is_inconsistent(&self, id: EdgeId) -> bool {
        self.inconsistent.contains(&id)
    }

    /// The finalised version of `id`, if it had deferred constraints that
    /// were satisfied.
    pub fn refinement_of(&self, id: EdgeId) -> Option<EdgeId> {
        self.refinements.get(&id).copied()
    }

    pub fn feed(&mut self, wh: WordHypothesis) -> Result<(), ChartError> {
        if self.input_ended {
            return Err(ChartError::InputEnded);
        }
        let score = wh.score;
        self.lattice.push(wh.clone());
        self.agenda.push(Task::Scan(wh), score);
        Ok(())
    }

    pub fn end_input(&mut self) {
        self.input_ended = true;
    }

    /// Executes the best task on the agenda. With an empty agenda and
    /// ended input, the first call processes the end of the utterance.
    pub fn step(&mut self) -> StepResult {
        let started = Instant::now();
        let (kind, edges_added, failures, warning) = match self.agenda.pop() {
            Some(task) => {
                let kind = task.kind();
                let (added, failures, warning) = self.execute(task);
                (kind, added, failures, warning)
            }
            None if self.input_ended && !self.end_processed => {
                self.end_processed = true;
                self.finalize_utterance();
                (TaskKind::EndOfInput, Vec::new(), 0, None)
            }
            None => return StepResult::Quiescent,
        };
        self.transactions += 1;
        StepResult::Transaction(TransactionOutcome {
            seq: self.transactions,
            kind,
            edges_added,
            failures,
            duration: started.elapsed(),
            warning,
        })
    }

    /// Steps until quiescent, returning the number of transactions run.
    pub fn run_to_quiescence(&mut self) -> u64 {
        let mut n = 0;
        while let StepResult::Transaction(_) = self.step() {
            n += 1;
        }
        n
    }

    fn execute(&mut self, task: Task) -> (Vec<EdgeId>, u32, Option<String>) {
        match task {
            Task::Scan(wh) => {
                let added = self.scan(&wh);
                let warning = if self.grammar.entries_for(&wh.word).is_empty() {
                    Some(format!(
                        "unknown word '{}' at {}..{}",
                        wh.word, wh.start, wh.end
                    ))
                } else {
                    None
                };
                (added, 0, warning)
            }
            Task::Combine {
                active,
                passive,
                choice,
            } => {
                let (a, p) = (self.chart.edge(active), self.chart.edge(passive));
                self.stats.category_checks += 1;
                if !category_check(a, p) {
                    return (Vec::new(), 0, None);
                }
                self.stats.fundamental_applications += 1;
                match self.fundamental_rule(a, p, choice) {
                    Ok(edge) => (self.add(edge).into_iter().collect(), 0, None),
                    Err(failure) => {
                        log::trace!("unification failed at {failure}");
                        self.stats.unification_failures += 1;
                        (Vec::new(), 1, None)
                    }
                }
            }
            Task::Predict { passive, rule } => {
                let added = self.predict_rule(passive, rule);
                (added.into_iter().collect(), 0, None)
            }
            Task::Finalize(id) => match self.finalize_edge(id) {
                Ok(refined) => (refined.into_iter().collect(), 0, None),
                Err(_) => (Vec::new(), 1, None),
            },
        }
    }

    /// Builds the edge produced by `passive` completing the next constituent
    /// of `active`, under disjunct combination `choice`. Pure: the chart is
    /// not touched.
    pub fn fundamental_rule(
        &self,
        active: &Edge,
        passive: &Edge,
        choice: Option<u32>,
    ) -> Result<Edge, UnifyFailure> {
        let EdgeOrigin::Rule(rule_id) = active.origin else {
            unreachable!("lexical edges are passive");
        };
        let rule = self.grammar.rule(rule_id);
        let k = active.dot + 1;
        let prefix = Path::new([k.to_string()]);
        let step = &rule.steps[active.dot];

        let mut fs = active.fs.unify(&passive.constituent_fs(k))?;
        for c in &step.fixed {
            fs = fs.unify(c)?;
        }
        let choice = choice.unwrap_or(0);
        for (d, alt) in step
            .disjunctions
            .iter()
            .zip(step.decode_choice(choice as usize))
        {
            fs = fs.unify(&d.alternatives[alt])?;
        }

        let mut pending = active.pending_final.clone();
        pending.extend(
            passive
                .pending_final
                .iter()
                .map(|c| Arc::new(c.embed(&prefix))),
        );
        pending.extend(step.deferred.iter().cloned());

        let mut children = active.children.clone();
        children.push(passive.id);
        let mut choices = active.choices.clone();
        choices.push(choice);
        let dot = k;
        Ok(Edge {
            id: EdgeId(u32::MAX),
            from: active.from,
            to: passive.to,
            origin: active.origin,
            category: active.category.clone(),
            dot,
            arity: active.arity,
            expects: rule.rule.rhs.get(dot).cloned(),
            fs: Arc::new(fs),
            score: combine_scores(active.score, passive.score),
            children,
            pending_final: pending,
            choices,
            refines: None,
            word: None,
        })
    }

    /// Adds one passive lexical edge per consistent reading of the word.
    /// Unknown words produce no edges and a logged warning.
    pub fn scan(&mut self, wh: &WordHypothesis) -> Vec<EdgeId> {
        self.stats.scans += 1;
        let grammar = Arc::clone(&self.grammar);
        let entries = grammar.entries_for(&wh.word);
        if entries.is_empty() {
            self.stats.unknown_words += 1;
            let msg = format!("unknown word '{}' at {}..{}", wh.word, wh.start, wh.end);
            log::warn!("{msg}");
            self.warnings.push(msg);
            return Vec::new();
        }
        let mut added = Vec::new();
        for &lex_id in entries {
            let lex = grammar.lex(lex_id);
            for (vi, variant) in lex.variants.iter().enumerate() {
                let edge = Edge {
                    id: EdgeId(u32::MAX),
                    from: wh.start,
                    to: wh.end,
                    origin: EdgeOrigin::Lexical {
                        entry: lex_id,
                        variant: vi as u32,
                    },
                    category: lex.entry.category.clone(),
                    dot: 0,
                    arity: 0,
                    expects: None,
                    fs: Arc::clone(&variant.fs),
                    score: wh.score,
                    children: Vec::new(),
                    pending_final: variant.pending.clone(),
                    choices: vec![variant.choice],
                    refines: None,
                    word: Some(wh.word.clone()),
                };
                added.extend(self.add(edge));
            }
        }
        added
    }

    /// Starts every rule whose first constituent is the category of
    /// `passive`, at its left vertex. Returns the new active edges.
    pub fn predict(&mut self, passive: EdgeId) -> Vec<EdgeId> {
        let category = self.chart.edge(passive).category.clone();
        let rules = self.grammar.rules_starting_with(&category).to_vec();
        rules
            .into_iter()
            .filter_map(|r| {
                let from = self.chart.edge(passive).from;
                self.predicted.insert((r, from));
                self.predict_rule(passive, r)
            })
            .collect()
    }

    fn predict_rule(&mut self, passive: EdgeId, rule_id: RuleId) -> Option<EdgeId> {
        let at = self.chart.edge(passive).from;
        let rule = &self.grammar.rule(rule_id).rule;
        let edge = Edge {
            id: EdgeId(u32::MAX),
            from: at,
            to: at,
            origin: EdgeOrigin::Rule(rule_id),
            category: rule.lhs.clone(),
            dot: 0,
            arity: rule.rhs.len(),
            expects: rule.rhs.first().cloned(),
            fs: Arc::new(initial_layout()),
            score: 1.0,
            children: Vec::new(),
            pending_final: Vec::new(),
            choices: Vec::new(),
            refines: None,
            word: None,
        };
        self.add(edge)
    }

    /// Schedules a finalisation task for every passive edge still carrying
    /// deferred constraints. Returns the edges scheduled.
    pub fn finalize_utterance(&mut self) -> Vec<EdgeId> {
        let ids: Vec<EdgeId> = self
            .chart
            .edges()
            .iter()
            .filter(|e| {
                e.is_passive()
                    && e.refines.is_none()
                    && !e.pending_final.is_empty()
                    && !self.refinements.contains_key(&e.id)
                    && !self.inconsistent.contains(&e.id)
            })
            .map(|e| e.id)
            .collect();
        for &id in &ids {
            let score = self.chart.edge(id).score;
            self.agenda.push(Task::Finalize(id), score);
        }
        ids
    }

    /// Applies the deferred constraints of `id`. On success the refined edge
    /// is added (`None` if it already existed); on failure the edge is
    /// marked inconsistent.
    pub fn finalize_edge(&mut self, id: EdgeId) -> Result<Option<EdgeId>, UnifyFailure> {
        let edge = self.chart.edge(id);
        let mut fs = (*edge.fs).clone();
        for c in &edge.pending_final {
            match fs.unify(c) {
                Ok(next) => fs = next,
                Err(failure) => {
                    log::debug!("edge {} fails deferred constraint at {failure}", id.0);
                    self.stats.finalize_failures += 1;
                    self.inconsistent.insert(id);
                    return Err(failure);
                }
            }
        }
        let mut refined = edge.clone();
        refined.fs = Arc::new(fs);
        refined.pending_final = Vec::new();
        refined.refines = Some(id);
        let new = self.chart.insert(refined);
        if let Some(new) = new {
            self.refinements.insert(id, new);
        }
        Ok(new)
    }

    /// Inserts `edge` and schedules the work it enables.
    fn add(&mut self, edge: Edge) -> Option<EdgeId> {
        let Some(id) = self.chart.insert(edge) else {
            self.stats.duplicate_edges += 1;
            return None;
        };
        let edge = self.chart.edge(id);
        let (from, to, score) = (edge.from, edge.to, edge.score);
        if edge.is_passive() {
            let category = edge.category.clone();
            let candidates = self.chart.actives_ending_at(from).to_vec();
            for a in candidates {
                self.schedule_combine(a, id);
            }
            for &r in self.grammar.rules_starting_with(&category) {
                if self.predicted.insert((r, from)) {
                    self.agenda.push(
                        Task::Predict {
                            passive: id,
                            rule: r,
                        },
                        score,
                    );
                }
            }
        } else {
            let candidates = self.chart.passives_starting_at(to).to_vec();
            for p in candidates {
                self.schedule_combine(id, p);
            }
        }
        Some(id)
    }

    fn schedule_combine(&mut self, active: EdgeId, passive: EdgeId) {
        let (a, p) = (self.chart.edge(active), self.chart.edge(passive));
        self.stats.category_checks += 1;
        if !category_check(a, p) {
            return;
        }
        let priority = combine_scores(a.score, p.score);
        let EdgeOrigin::Rule(rule) = a.origin else {
            return;
        };
        let step = &self.grammar.rule(rule).steps[a.dot];
        if step.disjunctions.is_empty() {
            self.agenda.push(
                Task::Combine {
                    active,
                    passive,
                    choice: None,
                },
                priority,
            );
        } else {
            for c in 0..step.choice_count() {
                self.agenda.push(
                    Task::Combine {
                        active,
                        passive,
                        choice: Some(c as u32),
                    },
                    priority,
                );
            }
        }
    }

    /// Passive edges with their finalised versions substituted, excluding
    /// edges superseded by a refinement.
    pub fn current_passives(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.chart
            .edges()
            .iter()
            .filter(move |e| e.is_passive() && !self.refinements.contains_key(&e.id))
    }

    /// Complete analyses of `start` over the whole utterance: passive, no
    /// deferred constraints left, not found inconsistent.
    pub fn forest(&self, start: &str) -> Vec<&Edge> {
        let end = self.lattice.span_end();
        self.current_passives()
            .filter(|e| {
                &*e.category == start
                    && e.from == 0
                    && e.to == end
                    && e.pending_final.is_empty()
                    && !self.inconsistent.contains(&e.id)
            })
            .collect()
    }

    /// Bracketed derivation, e.g. `(S:r0 (NP:r1 (Det the) (N dog)) ...)`.
    pub fn derivation(&self, id: EdgeId) -> String {
        let mut out = String::new();
        self.write_derivation(id, &mut out);
        out
    }

    fn write_derivation(&self, id: EdgeId, out: &mut String) {
        let e = self.chart.edge(id);
        match e.origin {
            EdgeOrigin::Lexical { .. } => {
                out.push('(');
                out.push_str(&e.category);
                out.push(' ');
                out.push_str(e.word.as_deref().unwrap_or("?"));
                out.push(')');
            }
            EdgeOrigin::Rule(r) => {
                out.push('(');
                out.push_str(&e.category);
                out.push_str(&format!(":r{}", r.0));
                for &c in &e.children {
                    out.push(' ');
                    self.write_derivation(c, out);
                }
                out.push(')');
            }
        }
    }

    /// The head structure of an edge, i.e. the value under `head-fs`.
    pub fn head_fs(&self, id: EdgeId) -> FeatureStructure {
        let e = self.chart.edge(id);
        e.fs.at(&Path::new([crate::grammar::HEAD]))
            .unwrap_or_else(FeatureStructure::empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fs::parse_fs;
    use crate::grammar::HEAD;
    use crate::lattice::from_words;

    const GRAMMAR: &str = "\
Rule S -> NP VP
  <1 agr> = <2 agr>
  <0 tense> = <2 tense>
Rule NP -> Det N
  <1 agr> = <2 agr>
  <0 agr> = <2 agr>
Rule VP -> V
  <0 agr> = <1 agr>
  <0 tense> = <1 tense>
";

    const LEXICON: &str = "\
Lex the Det
Lex a Det
  <0 agr num> = sg
Lex dog N
  <0 agr> = [num: sg, pers: 3]
Lex dogs N
  <0 agr> = [num: pl, pers: 3]
Lex sheep N
  <0 agr pers> = 3
  <0 agr num> = sg | pl
Lex walks V
  <0 agr> = [num: sg, pers: 3]
  <0 tense> = pres
Lex walk V
  <0 agr num> = pl
  <0 tense> = pres
";

    fn parser() -> ChartParser {
        let g = Grammar::from_sources(GRAMMAR, LEXICON).unwrap();
        ChartParser::new(Arc::new(g))
    }

    fn parse(words: &[&str]) -> ChartParser {
        let mut p = parser();
        for wh in from_words(words) {
            p.feed(wh).unwrap();
        }
        p.end_input();
        p.run_to_quiescence();
        p
    }

    #[test]
    fn parses_agreeing_sentence() {
        let p = parse(&["the", "dog", "walks"]);
        let forest = p.forest("S");
        assert_eq!(forest.len(), 1);
        assert_eq!(
            p.derivation(forest[0].id),
            "(S:r0 (NP:r1 (Det the) (N dog)) (VP:r2 (V walks)))"
        );
        let head = p.head_fs(forest[0].id);
        assert_eq!(head.to_string(), "[tense: pres]");
    }

    #[test]
    fn agreement_failure_blocks_sentence() {
        let p = parse(&["the", "dogs", "walks"]);
        assert!(p.forest("S").is_empty());
        assert!(p.stats().unification_failures > 0);
    }

    #[test]
    fn disjunctive_lexical_entry_gives_one_edge_per_reading() {
        let mut p = parser();
        let wh = WordHypothesis::new("sheep", 0, 1, 1.0).unwrap();
        let added = p.scan(&wh);
        assert_eq!(added.len(), 2);
        let p = parse(&["the", "sheep", "walk"]);
        assert_eq!(p.forest("S").len(), 1);
        let p = parse(&["the", "sheep", "walks"]);
        assert_eq!(p.forest("S").len(), 1);
    }

    #[test]
    fn unknown_word_is_skipped_with_warning() {
        let mut p = parser();
        let wh = WordHypothesis::new("cat", 1, 2, 1.0).unwrap();
        assert!(p.scan(&wh).is_empty());
        assert_eq!(p.warnings().len(), 1);
        assert_eq!(p.stats().unknown_words, 1);
    }

    #[test]
    fn fundamental_rule_advances_dot_and_multiplies_scores() {
        let mut p = parser();
        p.feed(WordHypothesis::new("the", 0, 1, 0.5).unwrap())
            .unwrap();
        p.feed(WordHypothesis::new("dog", 1, 2, 0.8).unwrap())
            .unwrap();
        p.run_to_quiescence();
        let np = p
            .chart()
            .edges()
            .iter()
            .find(|e| &*e.category == "NP" && e.is_passive())
            .unwrap();
        assert_eq!((np.from, np.to, np.dot), (0, 2, 2));
        assert!((np.score - 0.4).abs() < 1e-12);
        assert_eq!(
            p.head_fs(np.id),
            parse_fs("[agr: [num: sg, pers: 3]]").unwrap()
        );
    }

    #[test]
    fn category_check_requires_adjacency_and_matching_symbol() {
        let p = parse(&["the", "dog"]);
        let edges = p.chart().edges();
        let np_active = edges
            .iter()
            .find(|e| &*e.category == "NP" && e.dot == 0)
            .unwrap();
        let det = edges.iter().find(|e| &*e.category == "Det").unwrap();
        let n = edges.iter().find(|e| &*e.category == "N").unwrap();
        assert!(category_check(np_active, det));
        assert!(!category_check(np_active, n));
        assert!(!category_check(det, n));
    }

    #[test]
    fn category_checks_bound_unifications() {
        let p = parse(&["the", "sheep", "walks"]);
        let s = p.stats();
        assert!(s.category_checks >= s.fundamental_applications);
    }

    #[test]
    fn quiescent_only_after_input_and_agenda_exhausted() {
        let mut p = parser();
        assert!(matches!(p.step(), StepResult::Quiescent));
        p.feed(WordHypothesis::new("dog", 0, 1, 1.0).unwrap())
            .unwrap();
        p.run_to_quiescence();
        assert!(!p.is_finalized());
        p.end_input();
        match p.step() {
            StepResult::Transaction(t) => assert_eq!(t.kind, TaskKind::EndOfInput),
            StepResult::Quiescent => panic!("end of input not processed"),
        }
        assert!(matches!(p.step(), StepResult::Quiescent));
        assert!(p.is_finalized());
        assert_eq!(
            p.feed(WordHypothesis::new("dog", 1, 2, 1.0).unwrap()),
            Err(ChartError::InputEnded)
        );
    }

    const FINAL_GRAMMAR: &str = "\
Rule S -> NP VP
  <0 mood> = <2 mood>
  <2 mood> = decl !final
Rule NP -> N
Rule VP -> V
  <0 mood> = <1 mood>
";

    #[test]
    fn final_constraints_wait_for_end_of_utterance() {
        let lex = "Lex kim N\nLex sleeps V\n  <0 mood> = decl\nLex sleep V\n  <0 mood> = imp\n";
        let g = Arc::new(Grammar::from_sources(FINAL_GRAMMAR, lex).unwrap());

        let mut p = ChartParser::new(Arc::clone(&g));
        for wh in from_words(&["kim", "sleeps"]) {
            p.feed(wh).unwrap();
        }
        p.run_to_quiescence();
        assert!(
            p.forest("S").is_empty(),
            "pending constraints not yet applied"
        );
        p.end_input();
        p.run_to_quiescence();
        let forest = p.forest("S");
        assert_eq!(forest.len(), 1);
        assert!(forest[0].refines.is_some());
        assert_eq!(p.head_fs(forest[0].id).to_string(), "[mood: decl]");

        let mut p = ChartParser::new(g);
        for wh in from_words(&["kim", "sleep"]) {
            p.feed(wh).unwrap();
        }
        p.run_to_quiescence();
        let s = p
            .current_passives()
            .find(|e| &*e.category == "S")
            .map(|e| e.id)
            .expect("S built before the deferred check");
        p.end_input();
        p.run_to_quiescence();
        assert!(p.is_inconsistent(s));
        assert!(p.forest("S").is_empty());
        assert_eq!(p.stats().finalize_failures, 1);
    }

    #[test]
    fn parents_keep_only_the_heads_of_settled_children() {
        let p = parse(&["the", "dog", "walks"]);
        let s = p.forest("S")[0];
        let np = p.chart().edge(s.children[0]);
        assert!(
            np.fs.follow(&Path::new(["1"])).is_some(),
            "NP keeps its own constituents"
        );
        assert!(s.fs.follow(&Path::new(["1", HEAD])).is_some());
        assert!(
            s.fs.follow(&Path::new(["1", "1"])).is_none(),
            "grandchildren are not copied up"
        );
        assert_eq!(
            np.constituent_fs(1).at(&Path::new(["1", HEAD])),
            np.fs.at(&Path::new([HEAD]))
        );
    }
}
