//! Almost-Auerbach M-bases in Hilbert space: block constructions, stability
//! certificates, conditionality witnesses, renormings and Walsh character
//! demonstrators.

pub mod blockbasis;
pub mod characters;
pub mod cli;
pub mod conditionality;
pub mod error;
pub mod linalg;
pub mod renorm;
pub mod search;
pub mod seqplan;
pub mod verify;

pub use error::{Error, Result};
