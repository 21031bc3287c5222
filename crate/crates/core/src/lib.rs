//! An embeddable neural-network runtime for scientific hosts.
//!
//! Models are sequential stacks of dense, dropout and batchnorm layers
//! described by the plain-text FKBX format ([`format`]). A [`Network`]
//! built from a spec can predict, train online one sample at a time
//! ([`training::train_step`]) or offline over a dataset
//! ([`training::fit`]), and be written back out losslessly. An
//! [`Ensemble`] averages several networks under Gaussian input noise.

pub mod activation;
pub mod csvio;
pub mod ensemble;
pub mod format;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod losses;
pub mod network;
pub mod rng;
pub mod training;

pub use ensemble::{load_ensemble, Ensemble, EnsembleError};
pub use format::{
    parse_model, serialize_model, validate_spec, ActivationKind, ActivationSpec, FormatError, LayerSpec,
    ModelSpec,
};
pub use init::SpecBuilder;
pub use layers::{Layer, Mode};
pub use losses::{GradientTarget, LossFunction, LossRegistry};
pub use network::{Network, NetworkError};
pub use training::{fit, train_step, SampleSet, TrainConfig};
