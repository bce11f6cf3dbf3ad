//! Context-free grammars with per-rule selection probabilities.
//!
//! Grammars are parsed from plain BNF text, validated, and annotated with
//! the structural metadata the depth-limited derivation needs: per-rule
//! recursion flags and the minimal tree depth each non-terminal (and each
//! rule) can finish in. Codons select rules through cumulative probability
//! intervals; a depth budget keeps every derivation inside `max_depth` by
//! admitting only rules whose cheapest completion still fits, falling back
//! to the cheapest-completion rules when nothing fits (possible only when
//! `max_depth < min_levels(start)`).

use std::collections::{BTreeSet, HashMap, HashSet};
use thiserror::Error;

/// Probabilities are considered normalized when they sum to 1 within this.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Candidate sets whose probability mass falls below this are treated as
/// degenerate and selected from uniformly.
const ZERO_MASS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("duplicate non-terminal <{0}>")]
    DuplicateNonTerminal(String),
    #[error("undeclared non-terminal <{name}> in a rule of <{owner}>")]
    UndeclaredNonTerminal { name: String, owner: String },
    #[error("non-terminal <{0}> cannot derive a finite phenotype")]
    NonTerminating(String),
    #[error("non-terminal <{0}> has no non-recursive rule")]
    NoNonRecursiveRule(String),
    #[error("unknown non-terminal <{0}>")]
    UnknownNonTerminal(String),
    #[error("invalid non-terminal name `{0}` (expected [A-Za-z0-9_]+)")]
    InvalidNonTerminalName(String),
    #[error("non-terminal <{0}> has an empty alternative")]
    EmptyRule(String),
    #[error("grammar declares no non-terminals")]
    Empty,
    #[error("input dimension must be at least 1")]
    InvalidDimension,
    #[error("invalid grouping spec: {0}")]
    InvalidGrouping(String),
}

/// One token of a production body: a literal terminal or a reference to a
/// declared non-terminal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Terminal(String),
    NonTerminal(String),
}

impl Symbol {
    pub fn text(&self) -> &str {
        match self {
            Symbol::Terminal(t) | Symbol::NonTerminal(t) => t,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }
}

/// One alternative expansion of a non-terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionRule {
    pub body: Vec<Symbol>,
    /// Selection probability within the owning non-terminal.
    pub probability: f64,
    /// True iff expanding this rule can eventually re-derive its head.
    pub recursive: bool,
    /// Tree levels needed below the head to finish this rule's cheapest
    /// derivation: 0 for all-terminal bodies, otherwise the largest
    /// `min_levels` among the body's non-terminals.
    pub(crate) min_extra_levels: usize,
}

/// A validated grammar: named non-terminals in declaration order, each with
/// its ordered rules. The first declared non-terminal is the start symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    names: Vec<String>,
    rules: Vec<Vec<ProductionRule>>,
    /// Minimal achievable derivation-tree depth rooted at each non-terminal
    /// (the root itself counts as one level).
    min_levels: Vec<usize>,
    index: HashMap<String, usize>,
    start: usize,
}

/// Instructions for regrouping rules into fresh non-terminals: for each
/// source non-terminal, which rule indices move into which new group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupingSpec {
    pub groups: Vec<GroupEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEntry {
    pub source: String,
    pub new_groups: Vec<(String, Vec<usize>)>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Grammar {
    /// Builds and validates a grammar from `(name, alternatives)` pairs; the
    /// first pair becomes the start symbol and every rule gets probability
    /// `1/k` among its `k` siblings.
    pub fn from_declarations(decls: Vec<(String, Vec<Vec<Symbol>>)>) -> Result<Self, GrammarError> {
        if decls.is_empty() {
            return Err(GrammarError::Empty);
        }
        let mut index = HashMap::new();
        for (name, _) in &decls {
            if !valid_name(name) {
                return Err(GrammarError::InvalidNonTerminalName(name.clone()));
            }
            if index.insert(name.clone(), index.len()).is_some() {
                return Err(GrammarError::DuplicateNonTerminal(name.clone()));
            }
        }
        let mut names = Vec::with_capacity(decls.len());
        let mut rules: Vec<Vec<ProductionRule>> = Vec::with_capacity(decls.len());
        for (name, alts) in decls {
            if alts.is_empty() {
                return Err(GrammarError::EmptyRule(name));
            }
            let k = alts.len();
            let mut nt_rules = Vec::with_capacity(k);
            for body in alts {
                if body.is_empty() {
                    return Err(GrammarError::EmptyRule(name));
                }
                for sym in &body {
                    match sym {
                        Symbol::Terminal(t) => {
                            if t.is_empty() || t.chars().any(char::is_whitespace) {
                                return Err(GrammarError::Syntax {
                                    line: 0,
                                    column: 0,
                                    message: format!("invalid terminal token `{t}`"),
                                });
                            }
                        }
                        Symbol::NonTerminal(m) => {
                            if !index.contains_key(m) {
                                return Err(GrammarError::UndeclaredNonTerminal {
                                    name: m.clone(),
                                    owner: name.clone(),
                                });
                            }
                        }
                    }
                }
                nt_rules.push(ProductionRule {
                    body,
                    probability: 1.0 / k as f64,
                    recursive: false,
                    min_extra_levels: 0,
                });
            }
            names.push(name);
            rules.push(nt_rules);
        }

        let mut grammar = Grammar {
            names,
            rules,
            min_levels: Vec::new(),
            index,
            start: 0,
        };
        grammar.compute_recursion_flags();
        grammar.compute_min_levels();
        // A non-terminal whose minimal depth never resolves can only loop:
        // no finite derivation exists and depth consolidation has nothing
        // to consolidate to.
        if let Some(nt) = grammar.min_levels.iter().position(|&l| l == usize::MAX) {
            return Err(GrammarError::NonTerminating(grammar.names[nt].clone()));
        }
        Ok(grammar)
    }

    fn id(&self, sym: &Symbol) -> Option<usize> {
        match sym {
            Symbol::Terminal(_) => None,
            Symbol::NonTerminal(m) => Some(self.index[m]),
        }
    }

    /// Marks each rule whose body can eventually re-derive its own head.
    fn compute_recursion_flags(&mut self) {
        let n = self.names.len();
        // reach[a][b]: expanding a can produce a sentential form containing b
        let mut reach = vec![vec![false; n]; n];
        for nt in 0..n {
            for rule in &self.rules[nt] {
                for sym in &rule.body {
                    if let Some(m) = self.id(sym) {
                        reach[nt][m] = true;
                    }
                }
            }
        }
        loop {
            let mut changed = false;
            for a in 0..n {
                for b in 0..n {
                    if !reach[a][b] {
                        continue;
                    }
                    for c in 0..n {
                        if reach[b][c] && !reach[a][c] {
                            reach[a][c] = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for nt in 0..n {
            let heads: Vec<bool> = self.rules[nt]
                .iter()
                .map(|rule| {
                    rule.body.iter().any(|sym| {
                        self.id(sym)
                            .map(|m| m == nt || reach[m][nt])
                            .unwrap_or(false)
                    })
                })
                .collect();
            for (rule, recursive) in self.rules[nt].iter_mut().zip(heads) {
                rule.recursive = recursive;
            }
        }
    }

    /// Fixpoint over `min_levels(n) = 1 + min over rules of max over body
    /// non-terminals of min_levels(m)` (0 for all-terminal bodies). A
    /// non-terminal stuck at the `usize::MAX` sentinel cannot terminate;
    /// validation rejects such grammars.
    fn compute_min_levels(&mut self) {
        let n = self.names.len();
        let mut levels = vec![usize::MAX; n];
        let rule_extra = |levels: &[usize], rule: &ProductionRule| -> usize {
            let mut extra = 0usize;
            for sym in &rule.body {
                if let Symbol::NonTerminal(m) = sym {
                    extra = extra.max(levels[self.index[m]]);
                }
            }
            extra
        };
        loop {
            let mut changed = false;
            for nt in 0..n {
                let mut best = usize::MAX;
                for rule in &self.rules[nt] {
                    let extra = rule_extra(&levels, rule);
                    if extra != usize::MAX {
                        best = best.min(extra + 1);
                    }
                }
                if best < levels[nt] {
                    levels[nt] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for nt in 0..n {
            let extras: Vec<usize> = self.rules[nt]
                .iter()
                .map(|rule| rule_extra(&levels, rule))
                .collect();
            for (rule, extra) in self.rules[nt].iter_mut().zip(extras) {
                rule.min_extra_levels = extra;
            }
        }
        self.min_levels = levels;
    }

    pub fn nonterminal_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, nt: usize) -> &str {
        &self.names[nt]
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn start_symbol(&self) -> &str {
        &self.names[self.start]
    }

    pub fn rules(&self, nt: usize) -> &[ProductionRule] {
        &self.rules[nt]
    }

    /// Minimal achievable derivation-tree depth rooted at `nt`.
    pub fn min_levels(&self, nt: usize) -> usize {
        self.min_levels[nt]
    }

    /// Snapshot of all rule probabilities, indexed `[non-terminal][rule]`.
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        self.rules
            .iter()
            .map(|rs| rs.iter().map(|r| r.probability).collect())
            .collect()
    }

    pub(crate) fn set_probabilities(&mut self, nt: usize, probs: &[f64]) {
        assert_eq!(probs.len(), self.rules[nt].len(), "probability vector shape");
        for (rule, &p) in self.rules[nt].iter_mut().zip(probs) {
            rule.probability = p;
        }
    }

    /// Selects among the rules of `nt` admitted by `admit`, splitting [0,1)
    /// into consecutive intervals proportional to the admitted rules'
    /// renormalized probabilities. Returns `None` when nothing is admitted.
    fn select_rule(&self, nt: usize, codon: f64, admit: impl Fn(usize) -> bool) -> Option<usize> {
        let rules = &self.rules[nt];
        let mut mass = 0.0;
        let mut count = 0usize;
        let mut last = None;
        for (i, rule) in rules.iter().enumerate() {
            if admit(i) {
                mass += rule.probability;
                count += 1;
                last = Some(i);
            }
        }
        count.checked_sub(1)?;
        if mass <= ZERO_MASS {
            // Degenerate candidate mass: fall back to a uniform split.
            let k = ((codon * count as f64) as usize).min(count - 1);
            return rules
                .iter()
                .enumerate()
                .filter(|(i, _)| admit(*i))
                .nth(k)
                .map(|(i, _)| i);
        }
        let mut cum = 0.0;
        for (i, rule) in rules.iter().enumerate() {
            if admit(i) {
                cum += rule.probability / mass;
                if codon < cum {
                    return Some(i);
                }
            }
        }
        last // cumulative sum fell short of 1 by rounding
    }

    /// Codon-to-rule selection over all rules, or over the non-recursive
    /// rules (with probabilities renormalized) when `allow_recursive` is
    /// false.
    pub fn rule_for_codon(
        &self,
        nonterminal: &str,
        codon: f64,
        allow_recursive: bool,
    ) -> Result<usize, GrammarError> {
        let nt = self
            .id_of(nonterminal)
            .ok_or_else(|| GrammarError::UnknownNonTerminal(nonterminal.to_string()))?;
        let picked = if allow_recursive {
            self.select_rule(nt, codon, |_| true)
        } else {
            self.select_rule(nt, codon, |i| !self.rules[nt][i].recursive)
        };
        // Layered grammars may terminate only through another
        // non-terminal, leaving no directly non-recursive rule to pick.
        picked.ok_or_else(|| GrammarError::NoNonRecursiveRule(nonterminal.to_string()))
    }

    /// True iff the rule's cheapest completion from a head sitting at
    /// `level` stays within `max_depth`.
    fn within_budget(&self, nt: usize, rule: usize, level: usize, max_depth: usize) -> bool {
        level.saturating_add(self.rules[nt][rule].min_extra_levels) <= max_depth
    }

    fn any_within_budget(&self, nt: usize, level: usize, max_depth: usize) -> bool {
        (0..self.rules[nt].len()).any(|i| self.within_budget(nt, i, level, max_depth))
    }

    /// The smallest completion cost among `nt`'s rules. Expanding only
    /// such rules reaches terminals in exactly `min_levels(nt)` levels.
    fn cheapest_extra(&self, nt: usize) -> usize {
        self.rules[nt]
            .iter()
            .map(|r| r.min_extra_levels)
            .min()
            .expect("validated grammars have rules")
    }

    /// Depth-aware selection used by mapping and enumeration: admit the
    /// rules that can still finish within `max_depth` from `level`; if none
    /// can (only possible when the budget was already broken at the root),
    /// consolidate to the cheapest-completion rules, which finish as
    /// quickly as the grammar allows.
    pub(crate) fn select_within_depth(
        &self,
        nt: usize,
        level: usize,
        max_depth: usize,
        codon: f64,
    ) -> usize {
        let picked = if self.any_within_budget(nt, level, max_depth) {
            self.select_rule(nt, codon, |i| self.within_budget(nt, i, level, max_depth))
        } else {
            let cheapest = self.cheapest_extra(nt);
            self.select_rule(nt, codon, |i| self.rules[nt][i].min_extra_levels == cheapest)
        };
        picked.expect("the cheapest-completion rule set is never empty")
    }

    /// Moves the listed rules of each source non-terminal into fresh
    /// non-terminals (inserted right after their source); the source keeps
    /// its unlisted rules plus one reference rule per group. Probabilities
    /// re-initialize to uniform and all metadata is recomputed.
    pub fn apply_function_grouping(&self, spec: &GroupingSpec) -> Result<Grammar, GrammarError> {
        let mut new_names: HashSet<&str> = HashSet::new();
        let mut by_source: HashMap<usize, &GroupEntry> = HashMap::new();
        for entry in &spec.groups {
            let nt = self
                .id_of(&entry.source)
                .ok_or_else(|| GrammarError::UnknownNonTerminal(entry.source.clone()))?;
            if by_source.insert(nt, entry).is_some() {
                return Err(GrammarError::InvalidGrouping(format!(
                    "non-terminal <{}> is listed twice",
                    entry.source
                )));
            }
            let mut moved = HashSet::new();
            for (new_name, indices) in &entry.new_groups {
                if !valid_name(new_name) {
                    return Err(GrammarError::InvalidNonTerminalName(new_name.clone()));
                }
                if self.index.contains_key(new_name) || !new_names.insert(new_name) {
                    return Err(GrammarError::InvalidGrouping(format!(
                        "group name <{new_name}> collides with an existing non-terminal"
                    )));
                }
                if indices.is_empty() {
                    return Err(GrammarError::InvalidGrouping(format!(
                        "group <{new_name}> lists no rules"
                    )));
                }
                for &i in indices {
                    if i >= self.rules[nt].len() {
                        return Err(GrammarError::InvalidGrouping(format!(
                            "rule index {i} out of range for <{}>",
                            entry.source
                        )));
                    }
                    if !moved.insert(i) {
                        return Err(GrammarError::InvalidGrouping(format!(
                            "rule index {i} of <{}> listed twice",
                            entry.source
                        )));
                    }
                }
            }
        }

        let mut decls: Vec<(String, Vec<Vec<Symbol>>)> = Vec::new();
        for nt in 0..self.names.len() {
            match by_source.get(&nt) {
                None => {
                    let alts = self.rules[nt].iter().map(|r| r.body.clone()).collect();
                    decls.push((self.names[nt].clone(), alts));
                }
                Some(entry) => {
                    let moved: HashSet<usize> = entry
                        .new_groups
                        .iter()
                        .flat_map(|(_, idx)| idx.iter().copied())
                        .collect();
                    let mut alts: Vec<Vec<Symbol>> = (0..self.rules[nt].len())
                        .filter(|i| !moved.contains(i))
                        .map(|i| self.rules[nt][i].body.clone())
                        .collect();
                    for (new_name, _) in &entry.new_groups {
                        alts.push(vec![Symbol::NonTerminal(new_name.clone())]);
                    }
                    decls.push((self.names[nt].clone(), alts));
                    for (new_name, indices) in &entry.new_groups {
                        let bodies = indices
                            .iter()
                            .map(|&i| self.rules[nt][i].body.clone())
                            .collect();
                        decls.push((new_name.clone(), bodies));
                    }
                }
            }
        }
        Grammar::from_declarations(decls)
    }

    /// Walks every derivation whose tree depth stays within `max_depth`
    /// (same depth budget as mapping) and hands each complete phenotype to
    /// `visit`. Streams without materializing the language; duplicate
    /// phenotypes reached through different derivations are revisited.
    pub fn enumerate_visit(&self, max_depth: usize, visit: &mut dyn FnMut(&str)) {
        #[derive(Clone, Copy)]
        enum Item {
            // Terminal token addressed as (non-terminal, rule, body position)
            Tok(usize, usize, usize),
            Expand(usize, usize), // (non-terminal, level)
        }
        fn admit(g: &Grammar, nt: usize, level: usize, max_depth: usize, i: usize) -> bool {
            if g.any_within_budget(nt, level, max_depth) {
                g.within_budget(nt, i, level, max_depth)
            } else {
                g.rules[nt][i].min_extra_levels == g.cheapest_extra(nt)
            }
        }
        fn walk(
            g: &Grammar,
            max_depth: usize,
            agenda: &mut Vec<Item>,
            buf: &mut String,
            visit: &mut dyn FnMut(&str),
        ) {
            let Some(item) = agenda.pop() else {
                visit(buf);
                return;
            };
            match item {
                Item::Tok(nt, rule, pos) => {
                    let tok = g.rules[nt][rule].body[pos].text();
                    let save = buf.len();
                    if !buf.is_empty() {
                        buf.push(' ');
                    }
                    buf.push_str(tok);
                    walk(g, max_depth, agenda, buf, visit);
                    buf.truncate(save);
                }
                Item::Expand(nt, level) => {
                    for i in 0..g.rules[nt].len() {
                        if !admit(g, nt, level, max_depth, i) {
                            continue;
                        }
                        let mark = agenda.len();
                        for (pos, sym) in g.rules[nt][i].body.iter().enumerate().rev() {
                            agenda.push(match sym {
                                Symbol::Terminal(_) => Item::Tok(nt, i, pos),
                                Symbol::NonTerminal(m) => Item::Expand(g.index[m], level + 1),
                            });
                        }
                        walk(g, max_depth, agenda, buf, visit);
                        agenda.truncate(mark);
                    }
                }
            }
            agenda.push(item);
        }
        let mut agenda = vec![Item::Expand(self.start, 1)];
        let mut buf = String::new();
        walk(self, max_depth, &mut agenda, &mut buf, visit);
    }

    /// The deduplicated, sorted language generated within `max_depth`.
    /// Exponential in `max_depth`; callers keep the bound small.
    pub fn enumerate_language(&self, max_depth: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.enumerate_visit(max_depth, &mut |s| {
            if !out.contains(s) {
                out.insert(s.to_string());
            }
        });
        out
    }

    /// True iff every non-terminal's probabilities sum to 1 within
    /// [`NORMALIZATION_TOLERANCE`].
    pub fn normalize_check(&self) -> bool {
        self.rules.iter().all(|rs| {
            let sum: f64 = rs.iter().map(|r| r.probability).sum();
            (sum - 1.0).abs() <= NORMALIZATION_TOLERANCE
        })
    }

    /// Renders the grammar back to the BNF text format (one declaration per
    /// line, probabilities omitted: parsing the result re-initializes them
    /// uniform).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for nt in 0..self.names.len() {
            out.push('<');
            out.push_str(&self.names[nt]);
            out.push_str("> ::= ");
            for (i, rule) in self.rules[nt].iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                for (k, sym) in rule.body.iter().enumerate() {
                    if k > 0 {
                        out.push(' ');
                    }
                    match sym {
                        Symbol::Terminal(t) => out.push_str(t),
                        Symbol::NonTerminal(m) => {
                            out.push('<');
                            out.push_str(m);
                            out.push('>');
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut toks = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut rest = line;
        let mut offset = 0;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            let after = &rest[start..];
            let end = after
                .find(char::is_whitespace)
                .unwrap_or(after.len());
            toks.push(Token {
                text: &after[..end],
                line: ln + 1,
                column: offset + start + 1,
            });
            offset += start + end;
            rest = &after[end..];
        }
    }
    toks
}

fn nonterminal_ref(tok: &Token) -> Result<Option<String>, GrammarError> {
    let t = tok.text;
    if !t.starts_with('<') {
        return Ok(None);
    }
    let inner = t
        .strip_prefix('<')
        .and_then(|s| s.strip_suffix('>'))
        .filter(|s| valid_name(s));
    match inner {
        Some(name) => Ok(Some(name.to_string())),
        None => Err(GrammarError::Syntax {
            line: tok.line,
            column: tok.column,
            message: format!("malformed non-terminal reference `{t}`"),
        }),
    }
}

/// Parses the BNF grammar format. `input_dim` drives the `x[n]` macro: an
/// alternative consisting of exactly the terminal `x[n]` expands into one
/// alternative per input variable, `x[0] | ... | x[input_dim-1]`.
pub fn parse_bnf(text: &str, input_dim: usize) -> Result<Grammar, GrammarError> {
    if input_dim == 0 {
        return Err(GrammarError::InvalidDimension);
    }
    let toks = tokenize(text);
    if toks.is_empty() {
        return Err(GrammarError::Empty);
    }
    let starts_declaration = |i: usize| -> Result<bool, GrammarError> {
        Ok(matches!(nonterminal_ref(&toks[i]), Ok(Some(_)))
            && i + 1 < toks.len()
            && toks[i + 1].text == "::=")
    };

    let mut decls: Vec<(String, Vec<Vec<Symbol>>)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let head = nonterminal_ref(&toks[i])?.ok_or_else(|| GrammarError::Syntax {
            line: toks[i].line,
            column: toks[i].column,
            message: format!("expected a `<name> ::=` declaration, found `{}`", toks[i].text),
        })?;
        if i + 1 >= toks.len() || toks[i + 1].text != "::=" {
            return Err(GrammarError::Syntax {
                line: toks[i].line,
                column: toks[i].column,
                message: format!("declaration of <{head}> is missing `::=`"),
            });
        }
        i += 2;
        let mut alts: Vec<(Vec<Symbol>, usize, usize)> = Vec::new();
        let mut current: Vec<Symbol> = Vec::new();
        let (mut alt_line, mut alt_col) = (toks[i - 1].line, toks[i - 1].column);
        while i < toks.len() && !starts_declaration(i)? {
            let tok = &toks[i];
            if tok.text == "|" {
                if current.is_empty() {
                    return Err(GrammarError::Syntax {
                        line: tok.line,
                        column: tok.column,
                        message: format!("empty alternative in <{head}>"),
                    });
                }
                alts.push((std::mem::take(&mut current), alt_line, alt_col));
                (alt_line, alt_col) = (tok.line, tok.column);
            } else if tok.text == "::=" {
                return Err(GrammarError::Syntax {
                    line: tok.line,
                    column: tok.column,
                    message: "`::=` without a non-terminal head".to_string(),
                });
            } else if let Some(name) = nonterminal_ref(tok)? {
                current.push(Symbol::NonTerminal(name));
            } else {
                current.push(Symbol::Terminal(tok.text.to_string()));
            }
            i += 1;
        }
        if current.is_empty() {
            return Err(GrammarError::Syntax {
                line: alt_line,
                column: alt_col,
                message: format!("empty alternative in <{head}>"),
            });
        }
        alts.push((current, alt_line, alt_col));

        // x[n] macro expansion
        let mut expanded: Vec<Vec<Symbol>> = Vec::new();
        for (body, line, column) in alts {
            let uses_macro = body
                .iter()
                .any(|s| matches!(s, Symbol::Terminal(t) if t == "x[n]"));
            if !uses_macro {
                expanded.push(body);
            } else if body.len() == 1 {
                for d in 0..input_dim {
                    expanded.push(vec![Symbol::Terminal(format!("x[{d}]"))]);
                }
            } else {
                return Err(GrammarError::Syntax {
                    line,
                    column,
                    message: "`x[n]` must be the only symbol of its alternative".to_string(),
                });
            }
        }
        decls.push((head, expanded));
    }
    Grammar::from_declarations(decls)
}

/// Parses the grouping-spec format: one `split <source> -> <newName>: i,j,k`
/// directive per line, `#` comment lines allowed. Directives for the same
/// source merge into one entry in first-appearance order.
pub fn parse_grouping_spec(text: &str) -> Result<GroupingSpec, GrammarError> {
    let strip_brackets = |s: &str| -> String {
        s.strip_prefix('<')
            .and_then(|t| t.strip_suffix('>'))
            .unwrap_or(s)
            .to_string()
    };
    let mut spec = GroupingSpec::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| {
            GrammarError::InvalidGrouping(format!("line {}: {}", ln + 1, msg))
        };
        let rest = line
            .strip_prefix("split")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| err("expected `split <source> -> <newName>: i,j,k`".into()))?;
        let (source, rest) = rest
            .split_once("->")
            .ok_or_else(|| err("missing `->`".into()))?;
        let (new_name, indices) = rest
            .split_once(':')
            .ok_or_else(|| err("missing `:` before the rule indices".into()))?;
        let source = strip_brackets(source.trim());
        let new_name = strip_brackets(new_name.trim());
        if source.is_empty() || new_name.is_empty() {
            return Err(err("empty non-terminal name".into()));
        }
        let mut parsed = Vec::new();
        for part in indices.split(',') {
            let part = part.trim();
            let idx: usize = part
                .parse()
                .map_err(|_| err(format!("invalid rule index `{part}`")))?;
            parsed.push(idx);
        }
        if parsed.is_empty() {
            return Err(err("no rule indices listed".into()));
        }
        match spec.groups.iter_mut().find(|e| e.source == source) {
            Some(entry) => entry.new_groups.push((new_name, parsed)),
            None => spec.groups.push(GroupEntry {
                source,
                new_groups: vec![(new_name, parsed)],
            }),
        }
    }
    Ok(spec)
}
