//! Compilation of parsed items and static validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::fs::{Disjunction, Symbol};

use super::{
    initial_layout, parse_source, CompiledLex, CompiledRule, Diagnostic, Equation, Grammar,
    GrammarRule, LexEntry, LexId, LexVariant, RawItem, RawKind, RuleId, StepConstraints,
};

pub(super) fn build(items: Vec<RawItem>) -> (Grammar, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut rules = Vec::new();
    let mut lexicon = Vec::new();
    for item in items {
        match item.kind {
            RawKind::Rule { lhs, rhs } => {
                let rule = GrammarRule {
                    id: RuleId(rules.len() as u32),
                    lhs,
                    rhs,
                    equations: item.equations,
                    line: item.line,
                };
                rules.push(compile_rule(rule, &item.source, &mut diags));
            }
            RawKind::Lex { word, category } => {
                let entry = LexEntry {
                    id: LexId(lexicon.len() as u32),
                    word,
                    category,
                    equations: item.equations,
                    line: item.line,
                };
                lexicon.push(compile_lex(entry, &item.source, &mut diags));
            }
        }
    }

    let mut produced: BTreeSet<Symbol> = rules.iter().map(|r| r.rule.lhs.clone()).collect();
    produced.extend(lexicon.iter().map(|l| l.entry.category.clone()));
    for r in &rules {
        for cat in &r.rule.rhs {
            if !produced.contains(cat) {
                diags.push(Diagnostic::error(
                    "grammar",
                    r.rule.line,
                    format!("unknown category '{cat}' (no rule or lexical entry produces it)"),
                ));
            }
        }
    }
    unary_cycles(&rules, &mut diags);
    duplicates(&rules, &mut diags);

    let mut by_word: HashMap<Symbol, Vec<LexId>> = HashMap::new();
    for l in &lexicon {
        by_word
            .entry(l.entry.word.clone())
            .or_default()
            .push(l.entry.id);
    }
    let mut by_first: HashMap<Symbol, Vec<RuleId>> = HashMap::new();
    for r in &rules {
        by_first
            .entry(r.rule.rhs[0].clone())
            .or_default()
            .push(r.rule.id);
    }
    (
        Grammar {
            rules,
            lexicon,
            by_word,
            by_first,
            warnings: Vec::new(),
        },
        diags,
    )
}

fn compile_equations(
    equations: &[Equation],
    arity: usize,
    what: &str,
    source: &str,
    diags: &mut Vec<Diagnostic>,
) -> Vec<(usize, Equation, Vec<crate::fs::FeatureStructure>)> {
    let mut out = Vec::new();
    for eq in equations {
        let max = eq.max_constituent();
        if max > arity {
            diags.push(Diagnostic::error(
                source,
                eq.line,
                format!("constituent index {max} out of range for {what} with {arity} right-hand-side symbol(s)"),
            ));
            continue;
        }
        if eq.final_only && eq.alternatives.len() > 1 {
            diags.push(Diagnostic::error(
                source,
                eq.line,
                "disjunctive equations cannot be deferred with !final",
            ));
            continue;
        }
        match eq.compile() {
            Ok(alts) => out.push((max.max(1), eq.clone(), alts)),
            Err(msg) => diags.push(Diagnostic::error(source, eq.line, msg)),
        }
    }
    out
}

fn compile_rule(rule: GrammarRule, source: &str, diags: &mut Vec<Diagnostic>) -> CompiledRule {
    let mut steps = vec![StepConstraints::default(); rule.rhs.len()];
    let compiled = compile_equations(&rule.equations, rule.rhs.len(), "rule", source, diags);
    for (i, (step, eq, mut alts)) in compiled.into_iter().enumerate() {
        let slot = &mut steps[step - 1];
        if eq.final_only {
            slot.deferred.push(Arc::new(alts.remove(0)));
        } else if alts.len() == 1 {
            slot.fixed.push(alts.remove(0));
        } else {
            let origin = format!("rule {} equation {}", rule.id.0, i);
            slot.disjunctions
                .push(Disjunction::new(alts, origin).expect("parser yields alternatives"));
        }
    }
    CompiledRule { rule, steps }
}

fn compile_lex(entry: LexEntry, source: &str, diags: &mut Vec<Diagnostic>) -> CompiledLex {
    let compiled = compile_equations(&entry.equations, 0, "lexical entry", source, diags);
    let mut base = Some(initial_layout());
    let mut pending = Vec::new();
    let mut disjunctions = Vec::new();
    for (_, eq, mut alts) in compiled {
        if eq.final_only {
            pending.push(Arc::new(alts.remove(0)));
        } else if alts.len() == 1 {
            base = base.and_then(|b| b.unify(&alts[0]).ok());
        } else {
            disjunctions.push(alts);
        }
    }
    let mut variants = Vec::new();
    if let Some(base) = base {
        let combos: usize = disjunctions.iter().map(Vec::len).product();
        for choice in 0..combos {
            let mut c = choice;
            let mut fs = Some(base.clone());
            for alts in &disjunctions {
                let pick = &alts[c % alts.len()];
                c /= alts.len();
                fs = fs.and_then(|f| f.unify(pick).ok());
            }
            if let Some(fs) = fs {
                variants.push(LexVariant {
                    fs: Arc::new(fs),
                    pending: pending.clone(),
                    choice: choice as u32,
                });
            }
        }
    }
    if variants.is_empty() {
        diags.push(Diagnostic::warning(
            source,
            entry.line,
            format!(
                "lexical entry '{}' has inconsistent constraints and never applies",
                entry.word
            ),
        ));
    }
    CompiledLex { entry, variants }
}

/// Unary rules A -> B forming a cycle would let the chart grow forever.
fn unary_cycles(rules: &[CompiledRule], diags: &mut Vec<Diagnostic>) {
    let mut graph: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for r in rules {
        if r.rule.rhs.len() == 1 {
            graph
                .entry(&r.rule.lhs)
                .or_default()
                .push((&r.rule.rhs[0], r.rule.line));
        }
    }
    let mut reported = BTreeSet::new();
    for &start in graph.keys() {
        // Depth-first search for a path back to `start`.
        let mut stack: Vec<&str> = vec![start];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            for &(next, line) in graph.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                if next == start {
                    if reported.insert(start) {
                        diags.push(Diagnostic::error(
                            "grammar",
                            line,
                            format!("unary rule cycle through category '{start}'"),
                        ));
                    }
                } else if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
    }
}

fn duplicates(rules: &[CompiledRule], diags: &mut Vec<Diagnostic>) {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for r in rules {
        let eqs: Vec<String> = r.rule.equations.iter().map(|e| e.to_string()).collect();
        let key = format!(
            "{} -> {} {{{}}}",
            r.rule.lhs,
            r.rule.rhs.join(" "),
            eqs.join("; ")
        );
        if let Some(first) = seen.get(&key) {
            diags.push(Diagnostic::warning(
                "grammar",
                r.rule.line,
                format!("duplicate of rule on line {first}"),
            ));
        } else {
            seen.insert(key, r.rule.line);
        }
    }
}

/// Full static validation of a grammar/lexicon pair.
pub fn check_sources(grammar: &str, lexicon: &str, start: Option<&str>) -> Vec<Diagnostic> {
    let (mut items, mut diags) = parse_source(grammar, "grammar");
    let (items_l, diags_l) = parse_source(lexicon, "lexicon");
    items.extend(items_l);
    diags.extend(diags_l);
    let (g, more) = build(items);
    diags.extend(more);
    if let Some(start) = start {
        if !g.rules().iter().any(|r| &*r.rule.lhs == start)
            && !g.lexicon().iter().any(|l| &*l.entry.category == start)
        {
            diags.push(Diagnostic::warning(
                "grammar",
                0,
                format!("start category '{start}' is never produced"),
            ));
        }
    }
    diags.sort_by(|a, b| (a.source.as_str(), a.line).cmp(&(b.source.as_str(), b.line)));
    diags
}
