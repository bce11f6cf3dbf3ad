//! Datasets and RMSE fitness for symbolic regression.
//!
//! Ships two synthetic benchmarks (a quartic polynomial and the Pagie-1
//! surface, both train-only) plus CSV ingestion with a seeded shuffled
//! train/test split. Evaluation runs the protected expression semantics of
//! [`crate::mapping::eval_tree`], so every phenotype yields a score:
//! failures surface as NaN and the engine maps them to its worst-fitness
//! sentinel.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{Fitness, Scores};
use crate::mapping::{eval_tree, Derivation};

#[derive(Debug, Error, PartialEq)]
pub enum FitnessError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("no column named {0:?} in the header")]
    UnknownColumn(String),
    #[error("train_fraction must lie in [0,1], got {0}")]
    InvalidFraction(f64),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// An immutable regression dataset with a disjoint train/test row split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    /// Validates the shape invariants: equal-width rows of dimension ≥ 1,
    /// one target per row, and a train/test partition of all rows.
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self, FitnessError> {
        let invalid = |msg: &str| Err(FitnessError::Invalid(msg.to_string()));
        if inputs.is_empty() {
            return invalid("a dataset needs at least one row");
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return invalid("input rows need at least one column");
        }
        if inputs.iter().any(|row| row.len() != dim) {
            return invalid("input rows differ in width");
        }
        if targets.len() != inputs.len() {
            return invalid("target count differs from row count");
        }
        let mut seen = vec![false; inputs.len()];
        for &row in train.iter().chain(&test) {
            if row >= inputs.len() || seen[row] {
                return invalid("train/test must partition the row indices");
            }
            seen[row] = true;
        }
        if seen.iter().any(|s| !s) {
            return invalid("train/test must partition the row indices");
        }
        Ok(Dataset { name: name.into(), inputs, targets, train, test })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.inputs.len()
    }

    /// Number of input variables per row.
    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn input(&self, row: usize) -> &[f64] {
        &self.inputs[row]
    }

    pub fn target(&self, row: usize) -> f64 {
        self.targets[row]
    }

    pub fn train_rows(&self) -> &[usize] {
        &self.train
    }

    pub fn test_rows(&self) -> &[usize] {
        &self.test
    }
}

/// Root mean squared error. Panics on length mismatch or empty input —
/// callers compare like-shaped vectors by construction.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len(), "rmse over unequal lengths");
    assert!(!predictions.is_empty(), "rmse over empty vectors");
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    (sum / predictions.len() as f64).sqrt()
}

fn quartic_target(x: f64) -> f64 {
    x + x * x + x * x * x + x * x * x * x
}

/// Quartic polynomial x + x² + x³ + x⁴ sampled at the 21 points
/// x ∈ {−1.0, −0.9, …, 1.0}; all rows train.
pub fn make_quartic() -> Dataset {
    let inputs: Vec<Vec<f64>> = (0..=20).map(|k| vec![(k as f64 - 10.0) / 10.0]).collect();
    let targets = inputs.iter().map(|row| quartic_target(row[0])).collect();
    let train = (0..inputs.len()).collect();
    Dataset::new("quartic", inputs, targets, train, Vec::new()).expect("static shape")
}

fn pagie_target(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + x.powi(-4)) + 1.0 / (1.0 + y.powi(-4))
}

/// Pagie-1 surface 1/(1+x⁻⁴) + 1/(1+y⁻⁴) over the 26×26 grid
/// x, y ∈ {−5.0, −4.6, …, 5.0}; all rows train.
pub fn make_pagie() -> Dataset {
    let axis: Vec<f64> = (0..=25).map(|k| (2.0 * k as f64 - 25.0) / 5.0).collect();
    let mut inputs = Vec::with_capacity(axis.len() * axis.len());
    for &x in &axis {
        for &y in &axis {
            inputs.push(vec![x, y]);
        }
    }
    let targets = inputs.iter().map(|row| pagie_target(row[0], row[1])).collect();
    let train = (0..inputs.len()).collect();
    Dataset::new("pagie", inputs, targets, train, Vec::new()).expect("static shape")
}

/// Reads a comma-separated UTF-8 file (header line naming the columns,
/// numeric cells, `.` decimal point) and splits its rows into train and
/// test with a seeded shuffle. `train_fraction` of the rows (rounded)
/// train; index lists come out sorted so equal seeds give identical
/// datasets.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    train_fraction: f64,
    seed: u64,
) -> Result<Dataset, FitnessError> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(FitnessError::InvalidFraction(train_fraction));
    }
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| FitnessError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| FitnessError::Parse {
        path: shown.clone(),
        line: 1,
        message: "empty file".to_string(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let target_idx = columns
        .iter()
        .position(|c| *c == target_column)
        .ok_or_else(|| FitnessError::UnknownColumn(target_column.to_string()))?;
    if columns.len() < 2 {
        return Err(FitnessError::Parse {
            path: shown.clone(),
            line: 1,
            message: "need at least one input column besides the target".to_string(),
        });
    }

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(FitnessError::Parse {
                path: shown.clone(),
                line: line_no,
                message: format!("expected {} cells, found {}", columns.len(), cells.len()),
            });
        }
        let mut row = Vec::with_capacity(columns.len() - 1);
        let mut target = 0.0;
        for (col, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| FitnessError::Parse {
                path: shown.clone(),
                line: line_no,
                message: format!("{cell:?} is not a number"),
            })?;
            if col == target_idx {
                target = value;
            } else {
                row.push(value);
            }
        }
        inputs.push(row);
        targets.push(target);
    }
    if inputs.is_empty() {
        return Err(FitnessError::Parse {
            path: shown,
            line: 1,
            message: "no data rows".to_string(),
        });
    }

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * inputs.len() as f64).round() as usize;
    let mut train = order[..cut].to_vec();
    let mut test = order[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    Dataset::new(name, inputs, targets, train, test)
}

/// RMSE fitness over a dataset's train and test rows. Evaluation failures
/// and saturated expressions surface as NaN scores; an empty test split
/// reports NaN test fitness.
pub struct DatasetFitness<'a> {
    dataset: &'a Dataset,
}

impl<'a> DatasetFitness<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        DatasetFitness { dataset }
    }

    fn score_rows(&self, derivation: &Derivation, rows: &[usize]) -> f64 {
        if rows.is_empty() {
            return f64::NAN;
        }
        let mut sum = 0.0;
        for &row in rows {
            match eval_tree(&derivation.tree, self.dataset.input(row)) {
                Ok(prediction) => {
                    let diff = prediction - self.dataset.target(row);
                    sum += diff * diff;
                }
                Err(_) => return f64::NAN,
            }
        }
        (sum / rows.len() as f64).sqrt()
    }
}

impl Fitness for DatasetFitness<'_> {
    fn evaluate(&self, derivation: &Derivation) -> Scores {
        Scores {
            train: self.score_rows(derivation, self.dataset.train_rows()),
            test: self.score_rows(derivation, self.dataset.test_rows()),
        }
    }
}
