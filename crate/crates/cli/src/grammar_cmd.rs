//! `gramevo grammar`: validate grammar files, apply grouping transforms,
//! and enumerate bounded languages.

use std::fs;
use std::path::Path;

use gramevo::grammar::{parse_bnf, parse_grouping_spec, Grammar};

use crate::{io_error, CliError};

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn parse_grammar(path: &Path, dim: usize) -> Result<Grammar, CliError> {
    parse_bnf(&read(path)?, dim)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn cmd_check(file: &Path, dim: usize) -> Result<(), CliError> {
    let grammar = parse_grammar(file, dim)?;
    let rule_total: usize = (0..grammar.nonterminal_count())
        .map(|nt| grammar.rules(nt).len())
        .sum();
    outln!(
        "grammar OK: {} non-terminals, {} rules, start symbol <{}>",
        grammar.nonterminal_count(),
        rule_total,
        grammar.start_symbol()
    );
    for nt in 0..grammar.nonterminal_count() {
        let rules = grammar.rules(nt);
        outln!(
            "<{}>: {} rule(s), min depth {}",
            grammar.name(nt),
            rules.len(),
            grammar.min_levels(nt)
        );
        for (i, rule) in rules.iter().enumerate() {
            let body: Vec<String> = rule
                .body
                .iter()
                .map(|sym| {
                    if sym.is_terminal() {
                        sym.text().to_string()
                    } else {
                        format!("<{}>", sym.text())
                    }
                })
                .collect();
            outln!(
                "  [{i}] {}  p = {}{}",
                body.join(" "),
                rule.probability,
                if rule.recursive { "  (recursive)" } else { "" }
            );
        }
    }
    Ok(())
}

pub fn cmd_transform(
    file: &Path,
    groups: &Path,
    output: Option<&Path>,
    dim: usize,
) -> Result<(), CliError> {
    let grammar = parse_grammar(file, dim)?;
    let spec = parse_grouping_spec(&read(groups)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", groups.display())))?;
    let transformed = grammar
        .apply_function_grouping(&spec)
        .map_err(|e| CliError::Usage(format!("{}: {e}", groups.display())))?;
    let rendered = transformed.render();
    match output {
        Some(path) => fs::write(path, rendered).map_err(|e| io_error(path, e)),
        None => {
            crate::write_stdout(format_args!("{rendered}"));
            Ok(())
        }
    }
}

pub fn cmd_enumerate(file: &Path, depth: usize, dim: usize) -> Result<(), CliError> {
    if depth == 0 {
        return Err(CliError::Usage("depth must be at least 1".to_string()));
    }
    let grammar = parse_grammar(file, dim)?;
    for phenotype in grammar.enumerate_language(depth) {
        outln!("{phenotype}");
    }
    Ok(())
}
