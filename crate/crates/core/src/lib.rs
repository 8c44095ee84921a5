//! Tsetlin Machine engine and the composite layer that fuses independently
//! trained, differently booleanized members into one team decision.
//!
//! The crate is organised bottom-up:
//!
//! * [`datasets`] loads IDX and CIFAR binary files into [`LabeledImageSet`]s.
//! * [`booleanize`] turns pixels into bit-packed [`BooleanTensor`]s.
//! * [`tm`] holds the clause bank, convolutional evaluation and training.
//! * [`composite`] normalises and adds class sums of several members.
//! * [`persist`] reads and writes `.tmmodel` files and `.tmc` manifests.
//! * [`eval`] and [`commands`] implement the analyses behind the `tmc` CLI.

pub mod booleanize;
pub mod commands;
pub mod composite;
pub mod datasets;
pub mod error;
pub mod eval;
mod kv;
pub mod persist;
pub mod tm;

pub use booleanize::{BooleanTensor, BooleanizerSpec};
pub use composite::{ClassSumMatrix, CompositeManifest, CompositePrediction, Normalization};
pub use datasets::{Dataset, LabeledImageSet, Split};
pub use error::{Error, Result};
pub use tm::{Hyperparams, Prediction, TmModel, Window};
