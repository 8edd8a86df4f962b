//! Joint viewpoint-descriptor learning and 3D orientation regression from
//! synthetic depth patches.
//!
//! The pipeline renders procedural objects from icosphere viewpoints into
//! normalized depth patches, trains a small convolutional network with a
//! multi-task loss (pose regression + triplet/pair descriptor learning), and
//! evaluates both nearest-neighbor pose retrieval and direct regression.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod loss;
pub mod meshio;
pub mod net;
pub mod noise;
pub mod render;
pub mod retrieval;
pub mod train;
pub mod viewsphere;

pub use error::{Error, Result};
