//! Grammar-guided genetic programming with probabilistic grammars and
//! per-non-terminal self-adaptive mutation rates.
//!
//! The pipeline: [`grammar`] parses and transforms BNF grammars annotated
//! with per-rule selection probabilities; [`mapping`] derives executable
//! expression trees from float-codon genotypes under a depth limit;
//! [`engine`] runs the generational loop (tournament selection, list-level
//! crossover, per-non-terminal mutation with Gaussian-perturbed rates, and
//! probability learning from the generation best); [`fitness`] supplies
//! regression datasets and RMSE scoring with protected operators; [`stats`]
//! compares result samples with the Mann-Whitney U test.
//!
//! Every run is a pure function of its seed: all randomness flows through
//! per-purpose ChaCha streams derived in [`rng`].

pub mod engine;
pub mod fitness;
pub mod grammar;
pub mod mapping;
mod rng;
pub mod stats;

#[cfg(test)]
pub(crate) mod testsupport;
