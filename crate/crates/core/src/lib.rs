//! Small-object motion detection modeled on the avian retina → optic tectum →
//! nucleus rotundus pathway.

pub mod circuit;
pub mod cli;
pub mod config;
pub mod conv;
pub mod dendrite;
pub mod error;
pub mod eval;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod raster;
pub mod retina;
pub mod rt;
pub mod soma;
pub mod stack;
pub mod synth;

pub use config::{FlickerNorm, PipelineConfig};
pub use error::{Error, Result};
pub use raster::{Frame, Raster, Sequence};
pub use rt::Detection;
pub use stack::DirectionalStack;
pub use pipeline::{detect_sequence, Detector};
