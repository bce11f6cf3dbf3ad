//! Shared fixtures for unit tests: reference grammars and scriptable rngs.

use rand_chacha::rand_core::{impls, RngCore};

use crate::grammar::{parse_bnf, parse_grouping_spec, Grammar, GroupingSpec};

pub(crate) const REGRESSION_BNF: &str = "\
<start> ::= <expr>
<expr> ::= <expr> <op> <expr> | <pre_op> ( <expr> ) | <var>
<op> ::= + | - | * | /
<pre_op> ::= sin | cos | sqrt | square
<var> ::= 1.0 | x[n]
";

/// Same language with the unary operators and the expression/variable choice
/// factored into dedicated non-terminal layers.
pub(crate) const LAYERED_REGRESSION_BNF: &str = "\
<start> ::= <expr_var>
<expr_var> ::= <expr> | <var>
<expr> ::= <expr_var> <op> <expr_var> | <pre_op> ( <expr_var> )
<op> ::= + | - | * | /
<pre_op> ::= <trig_op> | <pow_op>
<trig_op> ::= sin | cos
<pow_op> ::= sqrt | square
<var> ::= 1.0 | x[n]
";

pub(crate) fn regression_grammar() -> Grammar {
    parse_bnf(REGRESSION_BNF, 1).unwrap()
}

pub(crate) fn unary_split() -> GroupingSpec {
    parse_grouping_spec("split pre_op -> trig_op: 0,1\nsplit pre_op -> pow_op: 2,3\n").unwrap()
}

/// Yields a scripted sequence of `gen::<f64>()` values, then panics.
pub(crate) struct ScriptedRng {
    values: Vec<f64>,
    next: usize,
}

impl ScriptedRng {
    pub(crate) fn new(values: &[f64]) -> Self {
        ScriptedRng { values: values.to_vec(), next: 0 }
    }

    pub(crate) fn constant(value: f64, len: usize) -> Self {
        ScriptedRng { values: vec![value; len], next: 0 }
    }
}

impl RngCore for ScriptedRng {
    fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }

    fn next_u64(&mut self) -> u64 {
        // rand 0.8 builds a standard f64 as (next_u64 >> 11) * 2^-53.
        let v = self.values[self.next];
        self.next += 1;
        assert!((0.0..1.0).contains(&v), "scripted value out of [0,1)");
        ((v * (1u64 << 53) as f64) as u64) << 11
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_chacha::rand_core::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Fails the test if anything draws from it.
pub(crate) struct PanicRng;

impl RngCore for PanicRng {
    fn next_u32(&mut self) -> u32 {
        panic!("rng must not be touched");
    }

    fn next_u64(&mut self) -> u64 {
        panic!("rng must not be touched");
    }

    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        panic!("rng must not be touched");
    }

    fn try_fill_bytes(&mut self, _dest: &mut [u8]) -> Result<(), rand_chacha::rand_core::Error> {
        panic!("rng must not be touched");
    }
}
