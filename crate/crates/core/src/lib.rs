//! Classification of health-related text by writing style.

pub mod balance;
pub mod citations;
pub mod cluster;
pub mod cleaning;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod http;
pub mod models;
pub mod rng;
pub mod synth;

pub use corpus::{ClassLabel, Document, Manifest};
pub use error::{Error, Result};
