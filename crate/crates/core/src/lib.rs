pub mod bookmaker;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod hist_ability;
pub mod match_prob;
pub mod persist;
pub mod plus_minus;
pub mod predictors;
pub mod simulator;
pub mod synth;
pub mod tournament;

pub use error::{Error, Result};
