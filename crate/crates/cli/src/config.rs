//! Experiment spec files: flat `key = value` text with `#` comments.
//! Unknown and duplicate keys are hard errors so a spec file can always be
//! trusted as the complete provenance of a result directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gramevo::engine::EvolutionConfig;

use crate::CliError;

/// Which fitness problem a batch evaluates against.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    Quartic,
    Pagie,
    Csv { path: PathBuf, target_column: String },
}

/// A fully parsed experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub grammar_path: PathBuf,
    pub grouping_spec_path: Option<PathBuf>,
    pub benchmark: Benchmark,
    /// Fraction of csv rows used for training; fixed at 1.0 for the
    /// built-in benchmarks.
    pub train_fraction: f64,
    pub runs: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Engine parameters; the `seed` field is ignored (run r uses
    /// `base_seed + r`).
    pub engine: EvolutionConfig,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| usage(format!("key `{key}`: invalid value `{value}` ({e})")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(usage(format!(
            "key `{key}`: expected `true` or `false`, got `{other}`"
        ))),
    }
}

fn parse_benchmark(value: &str, base_dir: &Path) -> Result<Benchmark, CliError> {
    match value {
        "quartic" => Ok(Benchmark::Quartic),
        "pagie" => Ok(Benchmark::Pagie),
        other => {
            let rest = other.strip_prefix("csv:").ok_or_else(|| {
                usage(format!(
                    "key `benchmark`: expected `quartic`, `pagie`, or \
                     `csv:<path>:<target column>`, got `{other}`"
                ))
            })?;
            let (path, column) = rest.rsplit_once(':').ok_or_else(|| {
                usage("key `benchmark`: csv form needs `csv:<path>:<target column>`".to_string())
            })?;
            if path.is_empty() || column.is_empty() {
                return Err(usage(
                    "key `benchmark`: csv path and target column must be non-empty".to_string(),
                ));
            }
            Ok(Benchmark::Csv {
                path: base_dir.join(path),
                target_column: column.to_string(),
            })
        }
    }
}

/// Parses a spec file's text. Relative paths inside the file resolve
/// against `base_dir`, the directory containing the spec file.
pub fn parse_spec(text: &str, base_dir: &Path) -> Result<ExperimentSpec, CliError> {
    let mut seen = BTreeSet::new();
    let mut grammar_path = None;
    let mut grouping_spec_path = None;
    let mut benchmark = None;
    let mut train_fraction = None;
    let mut runs = None;
    let mut base_seed = None;
    let mut output_dir = None;
    let mut engine = EvolutionConfig::default();

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("line {}: expected `key = value`", ln + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(usage(format!("line {}: key `{key}` has no value", ln + 1)));
        }
        if !seen.insert(key.to_string()) {
            return Err(usage(format!("line {}: duplicate key `{key}`", ln + 1)));
        }
        match key {
            "grammar" => grammar_path = Some(base_dir.join(value)),
            "grouping_spec" => grouping_spec_path = Some(base_dir.join(value)),
            "benchmark" => benchmark = Some(parse_benchmark(value, base_dir)?),
            "train_fraction" => train_fraction = Some(parse_value(key, value)?),
            "runs" => runs = Some(parse_value(key, value)?),
            "base_seed" => base_seed = Some(parse_value(key, value)?),
            "output_dir" => output_dir = Some(base_dir.join(value)),
            "population_size" => engine.population_size = parse_value(key, value)?,
            "generations" => engine.generations = parse_value(key, value)?,
            "tournament_size" => engine.tournament_size = parse_value(key, value)?,
            "elite_size" => engine.elite_size = parse_value(key, value)?,
            "crossover_probability" => engine.crossover_probability = parse_value(key, value)?,
            "starting_mutation_probability" => {
                engine.starting_mutation_probability = parse_value(key, value)?
            }
            "sigma" => engine.sigma = parse_value(key, value)?,
            "learning_factor" => engine.learning_factor = parse_value(key, value)?,
            "max_depth" => engine.max_depth = parse_value(key, value)?,
            "worst_fitness" => engine.worst_fitness = parse_value(key, value)?,
            "adaptive_pcfg" => engine.adaptive_pcfg = parse_bool(key, value)?,
            "adaptive_mutation" => engine.adaptive_mutation = parse_bool(key, value)?,
            other => return Err(usage(format!("line {}: unknown key `{other}`", ln + 1))),
        }
    }

    let benchmark = benchmark.ok_or_else(|| usage("missing required key `benchmark`"))?;
    if train_fraction.is_some() && !matches!(benchmark, Benchmark::Csv { .. }) {
        return Err(usage(
            "key `train_fraction` only applies to csv benchmarks \
             (the built-ins train on every row)",
        ));
    }
    let train_fraction = train_fraction.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(usage(format!(
            "key `train_fraction`: {train_fraction} is outside [0, 1]"
        )));
    }
    let runs = runs.ok_or_else(|| usage("missing required key `runs`"))?;
    if runs < 1 {
        return Err(usage("key `runs` must be at least 1"));
    }

    let spec = ExperimentSpec {
        grammar_path: grammar_path.ok_or_else(|| usage("missing required key `grammar`"))?,
        grouping_spec_path,
        benchmark,
        train_fraction,
        runs,
        base_seed: base_seed.ok_or_else(|| usage("missing required key `base_seed`"))?,
        output_dir: output_dir.ok_or_else(|| usage("missing required key `output_dir`"))?,
        engine,
    };
    spec.engine
        .validate()
        .map_err(|e| usage(format!("invalid engine configuration: {e}")))?;
    Ok(spec)
}

impl ExperimentSpec {
    /// Renders every setting, defaulted or not, as the `key = value` text
    /// written next to the results for provenance.
    pub fn render_resolved(&self) -> String {
        let mut out = String::from("# resolved experiment spec\n");
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        push("grammar", self.grammar_path.display().to_string());
        if let Some(g) = &self.grouping_spec_path {
            push("grouping_spec", g.display().to_string());
        }
        match &self.benchmark {
            Benchmark::Quartic => push("benchmark", "quartic".to_string()),
            Benchmark::Pagie => push("benchmark", "pagie".to_string()),
            Benchmark::Csv { path, target_column } => {
                push("benchmark", format!("csv:{}:{target_column}", path.display()));
                push("train_fraction", self.train_fraction.to_string());
            }
        }
        push("runs", self.runs.to_string());
        push("base_seed", self.base_seed.to_string());
        push("output_dir", self.output_dir.display().to_string());
        let e = &self.engine;
        push("population_size", e.population_size.to_string());
        push("generations", e.generations.to_string());
        push("tournament_size", e.tournament_size.to_string());
        push("elite_size", e.elite_size.to_string());
        push("crossover_probability", e.crossover_probability.to_string());
        push(
            "starting_mutation_probability",
            e.starting_mutation_probability.to_string(),
        );
        push("sigma", e.sigma.to_string());
        push("learning_factor", e.learning_factor.to_string());
        push("max_depth", e.max_depth.to_string());
        push("worst_fitness", e.worst_fitness.to_string());
        push("adaptive_pcfg", e.adaptive_pcfg.to_string());
        push("adaptive_mutation", e.adaptive_mutation.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "grammar = g.bnf\nbenchmark = quartic\nruns = 3\nbase_seed = 7\noutput_dir = out\n"
    }

    #[test]
    fn parses_minimal_spec_with_defaults() {
        let spec = parse_spec(minimal(), Path::new("/tmp/specs")).unwrap();
        assert_eq!(spec.grammar_path, Path::new("/tmp/specs/g.bnf"));
        assert_eq!(spec.benchmark, Benchmark::Quartic);
        assert_eq!(spec.runs, 3);
        assert_eq!(spec.base_seed, 7);
        assert_eq!(spec.output_dir, Path::new("/tmp/specs/out"));
        assert_eq!(spec.train_fraction, 1.0);
        assert_eq!(spec.engine, EvolutionConfig::default());
        assert!(spec.grouping_spec_path.is_none());
    }

    #[test]
    fn parses_overrides_comments_and_csv_benchmark() {
        let text = "\
# a comment
grammar = g.bnf
grouping_spec = u.groups
benchmark = csv:data/p.csv:y
train_fraction = 0.75
runs = 2
base_seed = 11
output_dir = out

population_size = 20
generations = 5
tournament_size = 4
elite_size = 2
crossover_probability = 0.8
starting_mutation_probability = 0.2
sigma = 0.1
learning_factor = 0.02
max_depth = 6
worst_fitness = 1000000
adaptive_pcfg = false
adaptive_mutation = false
";
        let spec = parse_spec(text, Path::new("base")).unwrap();
        assert_eq!(
            spec.benchmark,
            Benchmark::Csv {
                path: PathBuf::from("base/data/p.csv"),
                target_column: "y".to_string()
            }
        );
        assert_eq!(spec.train_fraction, 0.75);
        assert_eq!(spec.grouping_spec_path, Some(PathBuf::from("base/u.groups")));
        assert_eq!(spec.engine.population_size, 20);
        assert_eq!(spec.engine.generations, 5);
        assert_eq!(spec.engine.tournament_size, 4);
        assert_eq!(spec.engine.elite_size, 2);
        assert_eq!(spec.engine.crossover_probability, 0.8);
        assert_eq!(spec.engine.starting_mutation_probability, 0.2);
        assert_eq!(spec.engine.sigma, 0.1);
        assert_eq!(spec.engine.learning_factor, 0.02);
        assert_eq!(spec.engine.max_depth, 6);
        assert_eq!(spec.engine.worst_fitness, 1e6);
        assert!(!spec.engine.adaptive_pcfg);
        assert!(!spec.engine.adaptive_mutation);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let unknown = format!("{}mystery = 4\n", minimal());
        let err = parse_spec(&unknown, Path::new(".")).unwrap_err();
        assert!(err.message().contains("unknown key `mystery`"), "{err:?}");

        let duplicate = format!("{}runs = 4\n", minimal());
        let err = parse_spec(&duplicate, Path::new(".")).unwrap_err();
        assert!(err.message().contains("duplicate key `runs`"), "{err:?}");
    }

    #[test]
    fn rejects_malformed_lines_values_and_misplaced_fraction() {
        let err = parse_spec("grammar g.bnf\n", Path::new(".")).unwrap_err();
        assert!(err.message().contains("expected `key = value`"), "{err:?}");

        let bad = "grammar = g.bnf\nbenchmark = quartic\nruns = soon\nbase_seed = 1\noutput_dir = o\n";
        let err = parse_spec(bad, Path::new(".")).unwrap_err();
        assert!(err.message().contains("key `runs`"), "{err:?}");

        let fraction = format!("{}train_fraction = 0.5\n", minimal());
        let err = parse_spec(&fraction, Path::new(".")).unwrap_err();
        assert!(err.message().contains("only applies to csv"), "{err:?}");

        let zero_runs = minimal().replace("runs = 3", "runs = 0");
        let err = parse_spec(&zero_runs, Path::new(".")).unwrap_err();
        assert!(err.message().contains("at least 1"), "{err:?}");

        let bad_bench = minimal().replace("benchmark = quartic", "benchmark = cubic");
        let err = parse_spec(&bad_bench, Path::new(".")).unwrap_err();
        assert!(err.message().contains("key `benchmark`"), "{err:?}");
    }

    #[test]
    fn rejects_invalid_engine_configuration() {
        let text = format!("{}population_size = 0\n", minimal());
        let err = parse_spec(&text, Path::new(".")).unwrap_err();
        assert!(err.message().contains("invalid engine configuration"), "{err:?}");
    }

    #[test]
    fn resolved_rendering_reparses_to_the_same_spec() {
        let text = format!("{}sigma = 0.25\n", minimal());
        let spec = parse_spec(&text, Path::new("specs")).unwrap();
        let echoed = spec.render_resolved();
        // The echo resolves paths, so reparse against the current directory.
        let again = parse_spec(&echoed, Path::new("")).unwrap();
        assert_eq!(again.grammar_path, spec.grammar_path);
        assert_eq!(again.benchmark, spec.benchmark);
        assert_eq!(again.runs, spec.runs);
        assert_eq!(again.base_seed, spec.base_seed);
        assert_eq!(again.engine, spec.engine);
    }
}
