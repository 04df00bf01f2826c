//! Batch evaluation of embedding-based face recognition through six-member
//! lineups, with classical image features and a failure-prediction ensemble
//! that decides which lineups are worth restoring.

pub mod corpus;
pub mod error;
pub mod failpred;
pub mod imgfeat;
pub mod lineup;
pub mod pipeline;
pub mod rng;
pub mod simindex;

pub use error::{Error, Result};
