//! Ensembles of networks with Gaussian input perturbation.
//!
//! Each member sees its own noisy copy of the input, drawn from a stream
//! keyed by `(seed, call, member)`. Members may be evaluated on several
//! threads; their outputs are always reduced in member order with a
//! running mean, so results do not depend on scheduling.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::format::{parse_model, FormatError, MODEL_EXTENSION};
use crate::network::{Network, NetworkError};
use crate::rng::{self, PolarGaussian};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no .{MODEL_EXTENSION} models in {0}")]
    EmptyDirectory(PathBuf),
    #[error("{}", .0.iter().map(|(f, e)| format!("{f}: {e}")).collect::<Vec<_>>().join("; "))]
    Parse(Vec<(String, FormatError)>),
    #[error("member {index} is {found:?} but the ensemble is {expected:?} (input, output)")]
    HeterogeneousDimensions {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("an ensemble needs at least one member")]
    NoMembers,
    #[error("noise level {0} must be finite and non-negative")]
    InvalidNoise(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug)]
pub struct Ensemble {
    members: Vec<Network>,
    noise: f64,
    seed: u64,
    calls: AtomicU64,
}

impl Clone for Ensemble {
    fn clone(&self) -> Self {
        Self {
            members: self.members.clone(),
            noise: self.noise,
            seed: self.seed,
            calls: AtomicU64::new(self.calls.load(Ordering::Relaxed)),
        }
    }
}

impl Ensemble {
    pub fn new(members: Vec<Network>, noise: f64, seed: u64) -> Result<Self, EnsembleError> {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(EnsembleError::InvalidNoise(noise));
        }
        let first = members.first().ok_or(EnsembleError::NoMembers)?;
        let expected = (first.input_dim(), first.output_dim());
        if let Some((index, m)) = members
            .iter()
            .enumerate()
            .find(|(_, m)| (m.input_dim(), m.output_dim()) != expected)
        {
            return Err(EnsembleError::HeterogeneousDimensions {
                index,
                expected,
                found: (m.input_dim(), m.output_dim()),
            });
        }
        Ok(Self {
            members,
            noise,
            seed,
            calls: AtomicU64::new(0),
        })
    }

    pub fn members(&self) -> &[Network] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].output_dim()
    }

    /// Averaged prediction with fresh noise. Successive calls advance a
    /// call counter, so the sequence of outputs is reproducible from the
    /// seed.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, EnsembleError> {
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        self.predict_at(x, call)
    }

    /// Averaged prediction using the noise draws of call number `call`.
    pub fn predict_at(&self, x: &[f64], call: u64) -> Result<Vec<f64>, EnsembleError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            }
            .into());
        }
        let outputs = self.member_outputs(x, call)?;
        Ok(running_mean(&outputs))
    }

    fn member_output(&self, k: usize, x: &[f64], call: u64) -> Result<Vec<f64>, NetworkError> {
        let member = &self.members[k];
        if self.noise == 0.0 {
            return member.predict(x);
        }
        let mut stream = rng::stream(rng::derive_seed(&[self.seed, call, k as u64]));
        let mut gauss = PolarGaussian::new();
        let noisy: Vec<f64> = x
            .iter()
            .map(|v| v + self.noise * gauss.sample(&mut stream))
            .collect();
        member.predict(&noisy)
    }

    #[cfg(feature = "parallel")]
    fn member_outputs(&self, x: &[f64], call: u64) -> Result<Vec<Vec<f64>>, NetworkError> {
        use rayon::prelude::*;
        (0..self.members.len())
            .into_par_iter()
            .map(|k| self.member_output(k, x, call))
            .collect()
    }

    #[cfg(not(feature = "parallel"))]
    fn member_outputs(&self, x: &[f64], call: u64) -> Result<Vec<Vec<f64>>, NetworkError> {
        (0..self.members.len())
            .map(|k| self.member_output(k, x, call))
            .collect()
    }
}

/// Equal-weight mean in index order via `m += (v − m) / k`. Identical
/// inputs give back exactly that value.
pub fn running_mean(outputs: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = outputs[0].clone();
    for (k, out) in outputs.iter().enumerate().skip(1) {
        let count = (k + 1) as f64;
        for (m, v) in mean.iter_mut().zip(out) {
            *m += (v - *m) / count;
        }
    }
    mean
}

/// Model files in `dir`, sorted by file name.
pub fn model_files(dir: &Path) -> Result<Vec<PathBuf>, EnsembleError> {
    let io_err = |source| EnsembleError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == MODEL_EXTENSION) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads every `*.fkbx` file in `dir` as an ensemble member. Parse
/// failures are collected across all files before reporting.
pub fn load_ensemble(dir: impl AsRef<Path>, noise: f64, seed: u64) -> Result<Ensemble, EnsembleError> {
    let dir = dir.as_ref();
    let files = model_files(dir)?;
    if files.is_empty() {
        return Err(EnsembleError::EmptyDirectory(dir.to_path_buf()));
    }
    let mut members = Vec::with_capacity(files.len());
    let mut failures = Vec::new();
    for path in &files {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let bytes = fs::read(path).map_err(|source| EnsembleError::Io {
            path: path.clone(),
            source,
        })?;
        match parse_model(bytes) {
            Ok(spec) => members.push(Network::from_spec(&spec)?),
            Err(e) => failures.push((name, e)),
        }
    }
    if !failures.is_empty() {
        return Err(EnsembleError::Parse(failures));
    }
    Ensemble::new(members, noise, seed)
}
