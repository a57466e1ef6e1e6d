//! 360-degree visual question answering at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! - [`geom`]: equirectangular / sphere / cubemap geometry and resampling
//! - [`synth`]: procedural annotated panoramic scenes
//! - [`qgen`]: templated question generation, balancing and vocabularies
//! - [`tensor`]: a small reverse-mode differentiation engine with Adam
//! - [`model`]: question encoder, CNN backbone, bilinear and Tucker fusion,
//!   cross-cubemap attention with diffusion, answer prediction
//! - [`harness`]: dataset assembly, training, evaluation, ablations, figures
//! - [`io`]: PNG and JSON/JSONL file formats

pub mod error;
pub mod geom;
pub mod harness;
pub mod io;
pub mod model;
pub mod qgen;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
