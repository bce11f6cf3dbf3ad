//! Genotype-to-phenotype mapping.
//!
//! A genotype holds one ordered list of float codons per non-terminal.
//! Mapping performs the depth-first leftmost derivation from the start
//! symbol: each expansion of a non-terminal consumes the next unused codon
//! of its list (drawing a fresh one from the rng only when the list runs
//! out) and selects a rule through the grammar's depth-aware cumulative
//! intervals. The derivation simultaneously produces the phenotype string,
//! an evaluable expression tree, per-rule expansion counts, and the
//! consumption counts used to trim the genotype to its expressed prefix.

use rand::Rng;

use crate::grammar::{Grammar, Symbol};

/// Protected division returns 1 when the denominator is this close to zero.
pub const DIVISION_EPSILON: f64 = 1e-9;

/// Intermediate values beyond this magnitude poison the evaluation: the
/// final result is reported as NaN so callers assign their worst fitness.
pub const SATURATION_LIMIT: f64 = 1e12;

/// One codon list per non-terminal, indexed like the grammar's
/// non-terminals. Codons live in [0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    lists: Vec<Vec<f64>>,
}

impl Genotype {
    pub fn empty(grammar: &Grammar) -> Self {
        Genotype { lists: vec![Vec::new(); grammar.nonterminal_count()] }
    }

    pub fn from_lists(lists: Vec<Vec<f64>>) -> Self {
        Genotype { lists }
    }

    pub fn list(&self, nt: usize) -> &[f64] {
        &self.lists[nt]
    }

    pub fn list_count(&self) -> usize {
        self.lists.len()
    }

    pub(crate) fn lists_mut(&mut self) -> &mut Vec<Vec<f64>> {
        &mut self.lists
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Sin,
    Cos,
    Sqrt,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree built during derivation. `Opaque` stands in for
/// phenotypes whose shape is not arithmetic (possible under custom
/// grammars); it evaluates to NaN.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprTree {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<ExprTree>),
    Binary(BinaryOp, Box<ExprTree>, Box<ExprTree>),
    Opaque,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("variable x[{index}] out of range for a {width}-column input row")]
    VariableOutOfRange { index: usize, width: usize },
}

/// Everything one mapping produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    /// Space-joined terminal frontier of the derivation tree.
    pub phenotype: String,
    pub tree: ExprTree,
    /// Deepest non-terminal level reached; the start symbol sits at 1.
    pub depth: usize,
    /// Rule-selection counts, indexed `[non-terminal][rule]`.
    pub expansion_counts: Vec<Vec<u64>>,
    /// Codons consumed per non-terminal.
    pub consumed: Vec<usize>,
}

/// Intermediate classification of one element of a rule body while the
/// expression tree is assembled.
#[derive(Debug, Clone)]
enum Frag {
    Value(ExprTree),
    Unary(UnaryOp),
    Binary(BinaryOp),
    Open,
    Close,
    Other,
}

fn classify_terminal(tok: &str) -> Frag {
    match tok {
        "+" => Frag::Binary(BinaryOp::Add),
        "-" => Frag::Binary(BinaryOp::Sub),
        "*" => Frag::Binary(BinaryOp::Mul),
        "/" => Frag::Binary(BinaryOp::Div),
        "sin" => Frag::Unary(UnaryOp::Sin),
        "cos" => Frag::Unary(UnaryOp::Cos),
        "sqrt" => Frag::Unary(UnaryOp::Sqrt),
        "square" => Frag::Unary(UnaryOp::Square),
        "(" => Frag::Open,
        ")" => Frag::Close,
        _ => {
            if let Some(idx) = tok
                .strip_prefix("x[")
                .and_then(|s| s.strip_suffix(']'))
                .and_then(|s| s.parse::<usize>().ok())
            {
                Frag::Value(ExprTree::Var(idx))
            } else if let Ok(v) = tok.parse::<f64>() {
                Frag::Value(ExprTree::Const(v))
            } else {
                Frag::Other
            }
        }
    }
}

/// Collapses `( ... )` groups innermost-first, then folds the flat
/// sequence. Anything that fails to match an arithmetic shape becomes
/// `Other`, which surfaces as `ExprTree::Opaque` at the top.
fn reduce(mut items: Vec<Frag>) -> Frag {
    loop {
        let Some(close) = items.iter().position(|f| matches!(f, Frag::Close)) else {
            break;
        };
        let Some(open) = items[..close]
            .iter()
            .rposition(|f| matches!(f, Frag::Open))
        else {
            return Frag::Other; // unbalanced
        };
        let inner: Vec<Frag> = items.drain(open..=close).skip(1).collect();
        let inner = &inner[..inner.len() - 1];
        items.insert(open, reduce_flat(inner));
    }
    if items.iter().any(|f| matches!(f, Frag::Open)) {
        return Frag::Other; // unbalanced
    }
    reduce_flat(&items)
}

fn reduce_flat(items: &[Frag]) -> Frag {
    match items {
        [single] => single.clone(),
        [Frag::Unary(op), Frag::Value(v)] => {
            Frag::Value(ExprTree::Unary(*op, Box::new(v.clone())))
        }
        [Frag::Value(first), rest @ ..] if !rest.is_empty() => {
            // value (operator value)* folds left-associatively
            let mut acc = first.clone();
            for pair in rest.chunks(2) {
                match pair {
                    [Frag::Binary(op), Frag::Value(v)] => {
                        acc = ExprTree::Binary(*op, Box::new(acc), Box::new(v.clone()));
                    }
                    _ => return Frag::Other,
                }
            }
            Frag::Value(acc)
        }
        _ => Frag::Other,
    }
}

struct MapState<'a, R: Rng + ?Sized> {
    lists: Vec<Vec<f64>>,
    cursor: Vec<usize>,
    counts: Vec<Vec<u64>>,
    phenotype: String,
    deepest: usize,
    rng: &'a mut R,
}

fn expand<R: Rng + ?Sized>(
    grammar: &Grammar,
    max_depth: usize,
    st: &mut MapState<'_, R>,
    nt: usize,
    level: usize,
) -> Frag {
    st.deepest = st.deepest.max(level);
    let cursor = st.cursor[nt];
    if cursor == st.lists[nt].len() {
        let fresh: f64 = st.rng.gen();
        st.lists[nt].push(fresh);
    }
    st.cursor[nt] += 1;
    let codon = st.lists[nt][cursor];
    let rule = grammar.select_within_depth(nt, level, max_depth, codon);
    st.counts[nt][rule] += 1;

    let body_len = grammar.rules(nt)[rule].body.len();
    let mut items = Vec::with_capacity(body_len);
    for pos in 0..body_len {
        match &grammar.rules(nt)[rule].body[pos] {
            Symbol::Terminal(tok) => {
                if !st.phenotype.is_empty() {
                    st.phenotype.push(' ');
                }
                st.phenotype.push_str(tok);
                items.push(classify_terminal(tok));
            }
            Symbol::NonTerminal(name) => {
                let m = grammar.id_of(name).expect("validated grammar");
                items.push(expand(grammar, max_depth, st, m, level + 1));
            }
        }
    }
    reduce(items)
}

/// Depth-first leftmost derivation of `genotype` under `grammar`.
///
/// Returns the derivation plus the genotype trimmed to exactly the consumed
/// codons (including any that were drawn on demand). A genotype that
/// already holds enough codons maps deterministically with `rng` untouched.
/// The derivation depth never exceeds `max_depth` provided `max_depth ≥
/// grammar.min_levels(start)`; below that bound every choice consolidates
/// to cheapest-completion rules and the minimal depth is reached instead.
pub fn map_genotype<R: Rng + ?Sized>(
    genotype: &Genotype,
    grammar: &Grammar,
    max_depth: usize,
    rng: &mut R,
) -> (Derivation, Genotype) {
    assert!(max_depth >= 1, "max_depth must be at least 1");
    let n = grammar.nonterminal_count();
    assert_eq!(genotype.list_count(), n, "genotype/grammar shape mismatch");
    let mut st = MapState {
        lists: genotype.lists.clone(),
        cursor: vec![0; n],
        counts: (0..n).map(|nt| vec![0; grammar.rules(nt).len()]).collect(),
        phenotype: String::new(),
        deepest: 0,
        rng,
    };
    let top = expand(grammar, max_depth, &mut st, grammar.start(), 1);
    let tree = match top {
        Frag::Value(t) => t,
        _ => ExprTree::Opaque,
    };
    let mut lists = st.lists;
    for (list, &used) in lists.iter_mut().zip(&st.cursor) {
        list.truncate(used);
    }
    let derivation = Derivation {
        phenotype: st.phenotype,
        tree,
        depth: st.deepest,
        expansion_counts: st.counts,
        consumed: st.cursor,
    };
    (derivation, Genotype { lists })
}

/// Maps an empty genotype, generating every codon on demand, and returns
/// the trimmed result.
pub fn random_individual_genotype<R: Rng + ?Sized>(
    grammar: &Grammar,
    max_depth: usize,
    rng: &mut R,
) -> Genotype {
    map_genotype(&Genotype::empty(grammar), grammar, max_depth, rng).1
}

/// Infix rendering with full parenthesization of binary operations.
pub fn render_tree(tree: &ExprTree) -> String {
    match tree {
        // {:?} keeps a decimal point on integral constants (1.0, not 1),
        // matching how they appear in grammar terminals.
        ExprTree::Const(v) => format!("{v:?}"),
        ExprTree::Var(i) => format!("x[{i}]"),
        ExprTree::Unary(op, a) => {
            let name = match op {
                UnaryOp::Sin => "sin",
                UnaryOp::Cos => "cos",
                UnaryOp::Sqrt => "sqrt",
                UnaryOp::Square => "square",
            };
            format!("{name}({})", render_tree(a))
        }
        ExprTree::Binary(op, a, b) => {
            let sign = match op {
                BinaryOp::Add => "+",
                BinaryOp::Sub => "-",
                BinaryOp::Mul => "*",
                BinaryOp::Div => "/",
            };
            format!("({} {sign} {})", render_tree(a), render_tree(b))
        }
        ExprTree::Opaque => "?".to_string(),
    }
}

fn eval_node(tree: &ExprTree, row: &[f64], saturated: &mut bool) -> Result<f64, EvalError> {
    let v = match tree {
        ExprTree::Const(c) => *c,
        ExprTree::Var(i) => {
            if *i >= row.len() {
                return Err(EvalError::VariableOutOfRange { index: *i, width: row.len() });
            }
            row[*i]
        }
        ExprTree::Unary(op, a) => {
            let a = eval_node(a, row, saturated)?;
            match op {
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Sqrt => a.abs().sqrt(),
                UnaryOp::Square => a * a,
            }
        }
        ExprTree::Binary(op, a, b) => {
            let a = eval_node(a, row, saturated)?;
            let b = eval_node(b, row, saturated)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b.abs() < DIVISION_EPSILON {
                        1.0
                    } else {
                        a / b
                    }
                }
            }
        }
        ExprTree::Opaque => f64::NAN,
    };
    if !v.is_finite() || v.abs() > SATURATION_LIMIT {
        *saturated = true;
    }
    Ok(v)
}

/// Evaluates with protected semantics: division by (near-)zero yields 1,
/// sqrt acts on the absolute value, and any intermediate beyond
/// [`SATURATION_LIMIT`] makes the final result NaN.
pub fn eval_tree(tree: &ExprTree, row: &[f64]) -> Result<f64, EvalError> {
    let mut saturated = false;
    let v = eval_node(tree, row, &mut saturated)?;
    Ok(if saturated { f64::NAN } else { v })
}
