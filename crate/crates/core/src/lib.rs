//! Planar cycle covering (PCC) lower bounds and exact planar Ising ground
//! states for binary pairwise MRFs.

pub mod embedding;
pub mod error;
pub mod harness;
pub mod ising;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod pcc;

pub use error::{Error, Result};
