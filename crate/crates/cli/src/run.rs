//! `gramevo run`: execute a seeded batch of evolution runs and write one
//! CSV log per run plus a summary and a resolved-spec echo for provenance.
//!
//! Runs are independent: each owns its rng streams and its output file, so
//! a batch may execute on several worker threads. Workers claim run
//! indices from a shared counter; the summary is assembled sequentially
//! afterwards, in run order, making every output byte independent of
//! scheduling. `GRAMEVO_THREADS` caps the worker count (default: one
//! worker per run).

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gramevo::engine::{evolve, EvolutionConfig, Fitness};
use gramevo::fitness::{load_csv, make_pagie, make_quartic, Dataset, DatasetFitness, FitnessError};
use gramevo::grammar::{parse_bnf, parse_grouping_spec, Grammar};

use crate::config::{parse_spec, Benchmark, ExperimentSpec};
use crate::{io_error, CliError};

fn fitness_to_cli(err: FitnessError) -> CliError {
    match err {
        FitnessError::Io { ref path, ref message } => {
            CliError::Io(format!("{path}: {message}"))
        }
        other => CliError::Usage(other.to_string()),
    }
}

fn load_dataset(spec: &ExperimentSpec) -> Result<Dataset, CliError> {
    match &spec.benchmark {
        Benchmark::Quartic => Ok(make_quartic()),
        Benchmark::Pagie => Ok(make_pagie()),
        Benchmark::Csv { path, target_column } => {
            // The split is seeded by the batch's base seed: every run sees
            // the same train/test partition and re-runs reproduce it.
            load_csv(path, target_column, spec.train_fraction, spec.base_seed)
                .map_err(fitness_to_cli)
        }
    }
}

fn load_grammar(spec: &ExperimentSpec, input_dim: usize) -> Result<Grammar, CliError> {
    let text = fs::read_to_string(&spec.grammar_path)
        .map_err(|e| io_error(&spec.grammar_path, e))?;
    let grammar = parse_bnf(&text, input_dim)
        .map_err(|e| CliError::Usage(format!("{}: {e}", spec.grammar_path.display())))?;
    match &spec.grouping_spec_path {
        None => Ok(grammar),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let groups = parse_grouping_spec(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            grammar
                .apply_function_grouping(&groups)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

fn worker_count(runs: usize) -> Result<usize, CliError> {
    match std::env::var("GRAMEVO_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(runs),
        Err(e) => Err(CliError::Usage(format!("GRAMEVO_THREADS: {e}"))),
        Ok(raw) => {
            let cap: usize = raw.parse().map_err(|_| {
                CliError::Usage(format!(
                    "GRAMEVO_THREADS: expected a positive integer, got `{raw}`"
                ))
            })?;
            if cap == 0 {
                return Err(CliError::Usage(
                    "GRAMEVO_THREADS: expected a positive integer, got `0`".to_string(),
                ));
            }
            Ok(cap.min(runs))
        }
    }
}

/// Final state of one run, kept for the summary.
struct RunOutcome {
    seed: u64,
    best_fitness_train: f64,
    best_fitness_test: f64,
    best_phenotype: String,
}

fn csv_field(s: &str) -> String {
    if s.contains(&[',', '"', '\n'][..]) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn execute_run(
    spec: &ExperimentSpec,
    grammar: &Grammar,
    fitness: &dyn Fitness,
    run_index: usize,
) -> Result<RunOutcome, CliError> {
    let seed = spec.base_seed + run_index as u64;
    let config = EvolutionConfig { seed, ..spec.engine.clone() };
    let (log, _, _) = evolve(&config, grammar, fitness)
        .map_err(|e| CliError::Usage(format!("run {run_index}: {e}")))?;
    let path = spec.output_dir.join(format!("run_{seed}.csv"));
    fs::write(&path, log.to_csv(seed)).map_err(|e| io_error(&path, e))?;
    let last = log
        .generations
        .last()
        .expect("a validated config runs at least one generation");
    Ok(RunOutcome {
        seed,
        best_fitness_train: last.best_fitness_train,
        best_fitness_test: last.best_fitness_test,
        best_phenotype: last.best_phenotype.clone(),
    })
}

fn write_summary(spec: &ExperimentSpec, outcomes: &[RunOutcome]) -> Result<(), CliError> {
    let mut out = format!("# base_seed = {}\n", spec.base_seed);
    out.push_str("run,seed,best_fitness_train,best_fitness_test,best_phenotype\n");
    for (run, o) in outcomes.iter().enumerate() {
        out.push_str(&format!(
            "{run},{},{},{},{}\n",
            o.seed,
            o.best_fitness_train,
            o.best_fitness_test,
            csv_field(&o.best_phenotype)
        ));
    }
    let path = spec.output_dir.join("summary.csv");
    fs::write(&path, out).map_err(|e| io_error(&path, e))
}

pub fn cmd_run(spec_path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path).map_err(|e| io_error(spec_path, e))?;
    let base_dir = spec_path.parent().unwrap_or_else(|| Path::new(""));
    let spec = parse_spec(&text, base_dir)?;

    let dataset = load_dataset(&spec)?;
    let grammar = load_grammar(&spec, dataset.dim())?;
    let fitness = DatasetFitness::new(&dataset);
    fs::create_dir_all(&spec.output_dir).map_err(|e| io_error(&spec.output_dir, e))?;

    let workers = worker_count(spec.runs)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutcome, CliError>>>> =
        Mutex::new((0..spec.runs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let run_index = next.fetch_add(1, Ordering::Relaxed);
                if run_index >= spec.runs {
                    break;
                }
                let outcome = execute_run(&spec, &grammar, &fitness, run_index);
                results.lock().unwrap()[run_index] = Some(outcome);
            });
        }
    });

    let mut outcomes = Vec::with_capacity(spec.runs);
    for slot in results.into_inner().unwrap() {
        outcomes.push(slot.expect("every run index was claimed by a worker")?);
    }
    write_summary(&spec, &outcomes)?;

    let echo_path = spec.output_dir.join("spec_echo.txt");
    fs::write(&echo_path, spec.render_resolved()).map_err(|e| io_error(&echo_path, e))?;

    outln!(
        "wrote {} run file(s), summary.csv, and spec_echo.txt to {}",
        spec.runs,
        spec.output_dir.display()
    );
    Ok(())
}
