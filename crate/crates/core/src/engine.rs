//! Generational evolutionary engine.
//!
//! Individuals pair a genotype with a per-non-terminal mutation-rate array.
//! Each generation evaluates everyone, logs population statistics, carries
//! the elite genotypes unchanged, refills the rest through tournament
//! selection followed by crossover (or cloning the fitter selection) and
//! per-non-terminal mutation, perturbs every mutation array with Gaussian
//! noise, and finally pulls the grammar's rule probabilities toward the
//! generation best's observed rule usage.
//!
//! Determinism: every random decision draws from a stream derived from
//! (seed, purpose, generation, index), so runs are pure functions of the
//! seed and skipping one mechanism (say, perturbation) cannot shift the
//! draws of another.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::grammar::Grammar;
use crate::mapping::{map_genotype, random_individual_genotype, Derivation, Genotype};
use crate::rng::{stream, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expansion counts do not match the grammar's rule shape")]
    CountShapeMismatch,
}

/// Train/test fitness of one derivation; lower is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub train: f64,
    pub test: f64,
}

/// A deterministic fitness function over derivations.
pub trait Fitness: Sync {
    fn evaluate(&self, derivation: &Derivation) -> Scores;
}

/// Cached result of mapping and scoring one genotype. Variation operators
/// drop the cache; elites keep it, which is what protects them from being
/// re-mapped under a later grammar.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub derivation: Derivation,
    pub train_fitness: f64,
    pub test_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genotype: Genotype,
    /// One mutation probability per non-terminal.
    pub mutation_rates: Vec<f64>,
    pub evaluation: Option<Evaluation>,
}

impl Individual {
    /// Train fitness, or +inf while unevaluated so unevaluated individuals
    /// sort last.
    pub fn train_fitness(&self) -> f64 {
        self.evaluation
            .as_ref()
            .map_or(f64::INFINITY, |e| e.train_fitness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub elite_size: usize,
    pub crossover_probability: f64,
    pub starting_mutation_probability: f64,
    /// Standard deviation of the per-generation Gaussian perturbation
    /// applied to every mutation rate.
    pub sigma: f64,
    /// Smoothing weight pulling rule probabilities toward the generation
    /// best's observed usage frequencies.
    pub learning_factor: f64,
    pub max_depth: usize,
    pub seed: u64,
    /// Stands in for non-finite fitness values.
    pub worst_fitness: f64,
    /// When false, rule probabilities stay fixed for the whole run.
    pub adaptive_pcfg: bool,
    /// When false, mutation rates stay at `starting_mutation_probability`.
    pub adaptive_mutation: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 100,
            generations: 50,
            tournament_size: 3,
            elite_size: 1,
            crossover_probability: 0.9,
            starting_mutation_probability: 0.1,
            sigma: 0.05,
            learning_factor: 0.01,
            max_depth: 9,
            seed: 1,
            worst_fitness: 1e10,
            adaptive_pcfg: true,
            adaptive_mutation: true,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |msg: &str| Err(EngineError::Config(msg.to_string()));
        if self.population_size == 0 {
            return fail("population_size must be at least 1");
        }
        if self.generations == 0 {
            return fail("generations must be at least 1");
        }
        if self.tournament_size == 0 {
            return fail("tournament_size must be at least 1");
        }
        if self.elite_size > self.population_size {
            return fail("elite_size cannot exceed population_size");
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return fail("crossover_probability must lie in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.starting_mutation_probability) {
            return fail("starting_mutation_probability must lie in [0,1]");
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return fail("sigma must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.learning_factor) {
            return fail("learning_factor must lie in [0,1]");
        }
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1");
        }
        if !self.worst_fitness.is_finite() {
            return fail("worst_fitness must be finite");
        }
        Ok(())
    }
}

/// Uniform index in `0..n` driven by one `f64` draw, so scripted rngs can
/// steer selection exactly.
pub(crate) fn uniform_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((rng.gen::<f64>() * n as f64) as usize).min(n - 1)
}

/// Tournament selection with replacement: draws `size` contestants and
/// returns the index of the fittest (ties go to the lowest index).
pub fn tournament_select<R: Rng + ?Sized>(
    population: &[Individual],
    size: usize,
    rng: &mut R,
) -> usize {
    assert!(!population.is_empty() && size >= 1);
    let mut winner = uniform_index(rng, population.len());
    for _ in 1..size {
        let contender = uniform_index(rng, population.len());
        if (population[contender].train_fitness(), contender)
            < (population[winner].train_fitness(), winner)
        {
            winner = contender;
        }
    }
    winner
}

/// Uniform per-non-terminal crossover with an explicit mask: `false` takes
/// the codon list from `a`, `true` from `b`. The offspring inherits the
/// mutation-rate array of the fitter parent (`a` on ties) and starts
/// unevaluated.
pub fn crossover_with_mask(a: &Individual, b: &Individual, mask: &[bool]) -> Individual {
    assert_eq!(mask.len(), a.genotype.list_count());
    assert_eq!(a.genotype.list_count(), b.genotype.list_count());
    let lists = mask
        .iter()
        .enumerate()
        .map(|(nt, &from_b)| {
            let source = if from_b { &b.genotype } else { &a.genotype };
            source.list(nt).to_vec()
        })
        .collect();
    let rates = if b.train_fitness() < a.train_fitness() {
        b.mutation_rates.clone()
    } else {
        a.mutation_rates.clone()
    };
    Individual {
        genotype: Genotype::from_lists(lists),
        mutation_rates: rates,
        evaluation: None,
    }
}

/// Uniform crossover: a fair coin per non-terminal decides which parent
/// contributes that codon list.
pub fn crossover<R: Rng + ?Sized>(a: &Individual, b: &Individual, rng: &mut R) -> Individual {
    let mask: Vec<bool> = (0..a.genotype.list_count())
        .map(|_| rng.gen_bool(0.5))
        .collect();
    crossover_with_mask(a, b, &mask)
}

/// Per-non-terminal mutation: each codon of non-terminal `n` is replaced by
/// a fresh uniform draw with probability `mutation_rates[n]`. Always draws
/// the coin so rng consumption does not depend on the rates. Drops any
/// cached evaluation.
pub fn facilitated_mutate<R: Rng + ?Sized>(individual: &mut Individual, rng: &mut R) {
    for (nt, rate) in individual.mutation_rates.clone().into_iter().enumerate() {
        let list = &mut individual.genotype.lists_mut()[nt];
        for codon in list.iter_mut() {
            if rng.gen::<f64>() < rate {
                *codon = rng.gen();
            }
        }
    }
    individual.evaluation = None;
}

/// Adds an independent N(0, sigma) draw to every mutation rate of every
/// individual (elites included) and clamps to [0,1]. Fitness is unaffected
/// because genotypes are untouched.
pub fn perturb_mutation_arrays<R: Rng + ?Sized>(
    population: &mut [Individual],
    sigma: f64,
    rng: &mut R,
) {
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    for individual in population.iter_mut() {
        for rate in individual.mutation_rates.iter_mut() {
            *rate = (*rate + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
}

/// Pulls each rule probability toward the usage frequency observed in
/// `best`: p ← (1−λ)·p + λ·(count/total). Non-terminals the derivation
/// never expanded keep their probabilities; per-non-terminal sums stay 1
/// because both mixed terms sum to 1.
pub fn update_pcfg(
    grammar: &Grammar,
    best: &Derivation,
    learning_factor: f64,
) -> Result<Grammar, EngineError> {
    let n = grammar.nonterminal_count();
    if best.expansion_counts.len() != n
        || (0..n).any(|nt| best.expansion_counts[nt].len() != grammar.rules(nt).len())
    {
        return Err(EngineError::CountShapeMismatch);
    }
    let mut updated = grammar.clone();
    for nt in 0..n {
        let counts = &best.expansion_counts[nt];
        let total: u64 = counts.iter().sum();
        if total == 0 {
            continue;
        }
        let probs: Vec<f64> = grammar
            .rules(nt)
            .iter()
            .zip(counts)
            .map(|(rule, &c)| {
                (1.0 - learning_factor) * rule.probability
                    + learning_factor * (c as f64 / total as f64)
            })
            .collect();
        updated.set_probabilities(nt, &probs);
    }
    Ok(updated)
}

/// Per-generation population statistics, logged before variation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness_train: f64,
    pub best_fitness_test: f64,
    pub mean_fitness: f64,
    pub best_phenotype: String,
    /// Population mean of each non-terminal's mutation rate.
    pub mean_mutation_rates: Vec<f64>,
    /// Rule probabilities in force when this generation was evaluated.
    pub rule_probabilities: Vec<Vec<f64>>,
}

/// Full per-generation history of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub nonterminals: Vec<String>,
    pub rule_counts: Vec<usize>,
    pub generations: Vec<GenerationRecord>,
}

fn csv_field(s: &str) -> String {
    if s.contains(&[',', '"', '\n'][..]) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl RunLog {
    /// Column count of the CSV form: the five fixed columns, one mutation
    /// column per non-terminal, one probability column per rule.
    pub fn column_count(&self) -> usize {
        5 + self.nonterminals.len() + self.rule_counts.iter().sum::<usize>()
    }

    /// Renders the log as CSV with a `# seed = N` provenance comment.
    /// Floats use Rust's shortest round-trip formatting, so equal logs
    /// serialize byte-identically.
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = format!("# seed = {seed}\n");
        let mut header = vec![
            "generation".to_string(),
            "best_fitness_train".to_string(),
            "best_fitness_test".to_string(),
            "mean_fitness".to_string(),
            "best_phenotype".to_string(),
        ];
        for name in &self.nonterminals {
            header.push(format!("mut_{name}"));
        }
        for (name, &rules) in self.nonterminals.iter().zip(&self.rule_counts) {
            for rule in 0..rules {
                header.push(format!("p_{name}_{rule}"));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for rec in &self.generations {
            let mut row = vec![
                rec.generation.to_string(),
                rec.best_fitness_train.to_string(),
                rec.best_fitness_test.to_string(),
                rec.mean_fitness.to_string(),
                csv_field(&rec.best_phenotype),
            ];
            for rate in &rec.mean_mutation_rates {
                row.push(rate.to_string());
            }
            for probs in &rec.rule_probabilities {
                for p in probs {
                    row.push(p.to_string());
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn finite_or(value: f64, fallback: f64) -> f64 {
    if value.is_finite() { value } else { fallback }
}

/// Population indices sorted best-first by (train fitness, index).
fn ranked_indices(population: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        (population[a].train_fitness(), a)
            .partial_cmp(&(population[b].train_fitness(), b))
            .expect("sanitized fitness is never NaN")
    });
    order
}

/// Runs the full evolutionary loop and returns the per-generation log, the
/// final best individual, and the grammar as last adapted. The result is a
/// pure function of `config` (given the same grammar and fitness).
pub fn evolve<F: Fitness + ?Sized>(
    config: &EvolutionConfig,
    grammar: &Grammar,
    fitness: &F,
) -> Result<(RunLog, Individual, Grammar), EngineError> {
    config.validate()?;
    let n = grammar.nonterminal_count();
    let mut grammar = grammar.clone();
    let mut population: Vec<Individual> = (0..config.population_size)
        .map(|i| {
            let mut rng = stream(config.seed, Stream::Init, 0, i as u64);
            Individual {
                genotype: random_individual_genotype(&grammar, config.max_depth, &mut rng),
                mutation_rates: vec![config.starting_mutation_probability; n],
                evaluation: None,
            }
        })
        .collect();

    let mut log = RunLog {
        nonterminals: grammar.names().to_vec(),
        rule_counts: (0..n).map(|nt| grammar.rules(nt).len()).collect(),
        generations: Vec::new(),
    };

    for generation in 0..config.generations {
        for (i, individual) in population.iter_mut().enumerate() {
            if individual.evaluation.is_some() {
                continue; // elites keep their evaluation under the old grammar
            }
            let mut rng = stream(config.seed, Stream::Map, generation as u64, i as u64);
            let (derivation, trimmed) =
                map_genotype(&individual.genotype, &grammar, config.max_depth, &mut rng);
            individual.genotype = trimmed;
            let scores = fitness.evaluate(&derivation);
            individual.evaluation = Some(Evaluation {
                derivation,
                // Selection needs a comparable train fitness, so non-finite
                // values become the worst-fitness sentinel. Test fitness is
                // only reported and stays as computed (NaN for datasets
                // without a test split).
                train_fitness: finite_or(scores.train, config.worst_fitness),
                test_fitness: scores.test,
            });
        }

        let order = ranked_indices(&population);
        let best = &population[order[0]];
        let best_eval = best.evaluation.as_ref().expect("just evaluated");
        log.generations.push(GenerationRecord {
            generation,
            best_fitness_train: best_eval.train_fitness,
            best_fitness_test: best_eval.test_fitness,
            mean_fitness: population.iter().map(Individual::train_fitness).sum::<f64>()
                / population.len() as f64,
            best_phenotype: best_eval.derivation.phenotype.clone(),
            mean_mutation_rates: (0..n)
                .map(|nt| {
                    population.iter().map(|ind| ind.mutation_rates[nt]).sum::<f64>()
                        / population.len() as f64
                })
                .collect(),
            rule_probabilities: grammar.probabilities(),
        });

        if generation + 1 == config.generations {
            let winner = population[order[0]].clone();
            return Ok((log, winner, grammar));
        }

        let best_derivation = best_eval.derivation.clone();
        let mut next: Vec<Individual> = order[..config.elite_size]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        for slot in config.elite_size..config.population_size {
            let mut rng = stream(config.seed, Stream::Variation, generation as u64, slot as u64);
            let a = tournament_select(&population, config.tournament_size, &mut rng);
            let b = tournament_select(&population, config.tournament_size, &mut rng);
            let mut child = if rng.gen::<f64>() < config.crossover_probability {
                crossover(&population[a], &population[b], &mut rng)
            } else {
                let fitter = if population[b].train_fitness() < population[a].train_fitness() {
                    b
                } else {
                    a
                };
                population[fitter].clone()
            };
            facilitated_mutate(&mut child, &mut rng);
            next.push(child);
        }
        population = next;

        if config.adaptive_mutation {
            let mut rng = stream(config.seed, Stream::Perturb, generation as u64, 0);
            perturb_mutation_arrays(&mut population, config.sigma, &mut rng);
        }
        if config.adaptive_pcfg {
            grammar = update_pcfg(&grammar, &best_derivation, config.learning_factor)?;
        }
    }
    unreachable!("the generation loop always returns on its last iteration")
}
