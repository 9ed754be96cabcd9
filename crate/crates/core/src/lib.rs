//! Randomized-kernel multiview learning: random Fourier features per view,
//! a shared orthonormal embedding, and learned variable scalings selected
//! with simplex or sparse-group penalties.

pub mod cli;
pub mod data;
pub mod error;
pub mod fista;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod outcome;
pub mod prox;
pub mod randfeatures;
pub mod seed;
pub mod simdata;
mod trig;

pub use data::{ColumnScaling, MultiviewDataset};
pub use error::{Error, Result};
pub use model::{FittedModel, Prediction};
pub use optimizer::{fit, FitConfig, ModelState};
pub use outcome::{ClassLabels, Outcome, OutcomeMeta};
pub use prox::{GroupStructure, Penalty, SparseGroup};
pub use randfeatures::RandomFeatureMap;
