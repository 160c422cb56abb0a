//! Semi-supervised preference-based reward learning with temporal-cropping
//! augmentation, embedded in an off-policy RL loop.

mod codec;
pub mod agent;
pub mod augment;
pub mod data;
pub mod envs;
pub mod feedback_api;
pub mod error;
pub mod ndmath;
pub mod reward;
pub mod runner;
pub mod teacher;

pub use error::{Error, Result};
