//! Black-box auditing of DP-SGD.
//!
//! Trains a model many times on a dataset with and without one canary sample,
//! turns the final canary losses into false-positive/false-negative bounds and
//! reports the privacy loss those bounds certify. The initial parameters can be
//! random or pretrained on auxiliary data, which makes the audit much tighter.

pub mod audit;
pub mod campaign;
pub mod canary;
pub mod data;
pub mod dpsgd;
pub mod error;
pub mod gdp;
pub mod nncore;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
