//! Stochastic and mini-batch gradient descent.
//!
//! [`train_step`] is the online entry point a host process calls once per
//! timestep with fresh ground truth. [`fit`] runs offline epochs over a
//! [`SampleSet`].

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::csvio::{self, CsvError};
use crate::layers::Mode;
use crate::losses::{LossError, LossRegistry};
use crate::network::{Network, NetworkError};
use crate::rng;

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("unknown loss `{0}`")]
    UnknownLoss(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no training samples")]
    EmptyData,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth { row: u64, expected: usize, found: usize },
    #[error("row {row}, column {column}: `{value}` is not a number")]
    NumericParse { row: u64, column: usize, value: String },
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<CsvError> for TrainError {
    fn from(err: CsvError) -> Self {
        match err {
            CsvError::Io(source) => TrainError::Io {
                path: String::new(),
                source,
            },
            CsvError::Csv(msg) => TrainError::Csv(msg),
            CsvError::RowWidth { row, expected, found } => TrainError::RowWidth { row, expected, found },
            CsvError::NumericParse { row, column, value } => TrainError::NumericParse { row, column, value },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss_name: String,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 1,
            batch_size: 1,
            loss_name: "mse".into(),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// A learning rate of zero is accepted and leaves parameters unchanged.
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Paired input and target rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self, TrainError> {
        if inputs.len() != targets.len() {
            return Err(TrainError::DimensionMismatch(format!(
                "{} input rows but {} target rows",
                inputs.len(),
                targets.len()
            )));
        }
        for (name, rows) in [("input", &inputs), ("target", &targets)] {
            if let Some(first) = rows.first() {
                if let Some(i) = rows.iter().position(|r| r.len() != first.len()) {
                    return Err(TrainError::DimensionMismatch(format!(
                        "{name} row {} has {} values, expected {}",
                        i + 1,
                        rows[i].len(),
                        first.len()
                    )));
                }
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn target_dim(&self) -> Option<usize> {
        self.targets.first().map(Vec::len)
    }
}

/// Reads samples whose first `input_dim` columns are features and whose
/// remaining `output_dim` columns are targets.
pub fn read_samples(reader: impl Read, input_dim: usize, output_dim: usize) -> Result<SampleSet, TrainError> {
    let rows = csvio::read_rows(reader, Some(input_dim + output_dim))?;
    let (inputs, targets) = rows
        .into_iter()
        .map(|mut row| {
            let targets = row.values.split_off(input_dim);
            (row.values, targets)
        })
        .unzip();
    Ok(SampleSet { inputs, targets })
}

pub fn load_csv(path: impl AsRef<Path>, input_dim: usize, output_dim: usize) -> Result<SampleSet, TrainError> {
    let path = path.as_ref();
    let with_path = |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(with_path)?;
    read_samples(file, input_dim, output_dim).map_err(|e| match e {
        TrainError::Io { source, .. } => with_path(source),
        other => other,
    })
}

/// One forward, backprop and update cycle on a single sample. Returns
/// the loss measured before the update. The network must already be in
/// training mode.
pub fn train_step(net: &mut Network, x: &[f64], y_true: &[f64], lr: f64) -> Result<f64, TrainError> {
    net.zero_grads();
    net.forward(x)?;
    let loss = net.backprop(y_true)?;
    net.update(lr);
    Ok(loss)
}

/// Runs `cfg.epochs` passes over `data` and returns the mean per-sample
/// loss of each epoch. Gradients are averaged over each batch before a
/// single update. The network is left in the mode it started in, bound
/// to the configured loss.
pub fn fit(
    net: &mut Network,
    data: &SampleSet,
    cfg: &TrainConfig,
    losses: &LossRegistry,
) -> Result<Vec<f64>, TrainError> {
    cfg.validate()?;
    let loss = losses.get(&cfg.loss_name).map_err(|e| match e {
        LossError::UnknownLoss(name) => TrainError::UnknownLoss(name),
        other => TrainError::Network(other.into()),
    })?;
    net.set_loss(loss)?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if data.input_dim() != Some(net.input_dim()) || data.target_dim() != Some(net.output_dim()) {
        return Err(TrainError::DimensionMismatch(format!(
            "samples are {:?} -> {:?}, network is {} -> {}",
            data.input_dim(),
            data.target_dim(),
            net.input_dim(),
            net.output_dim()
        )));
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(history);
    }

    let initial_mode = net.mode();
    net.set_mode(Mode::Training);
    net.reseed(rng::derive_seed(&[cfg.seed, DROPOUT_STREAM]));
    net.zero_grads();
    let mut shuffler = rng::stream(rng::derive_seed(&[cfg.seed, SHUFFLE_STREAM]));
    let mut order: Vec<usize> = (0..data.len()).collect();

    let result = (|| {
        for _ in 0..cfg.epochs {
            if cfg.shuffle {
                order.shuffle(&mut shuffler);
            }
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                for &i in batch {
                    net.forward(&data.inputs[i])?;
                    total += net.backprop(&data.targets[i])?;
                }
                net.scale_grads(1.0 / batch.len() as f64);
                net.update(cfg.learning_rate);
            }
            history.push(total / data.len() as f64);
        }
        Ok::<_, TrainError>(())
    })();
    net.set_mode(initial_mode);
    result.map(|()| history)
}
