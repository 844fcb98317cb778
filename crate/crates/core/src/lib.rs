//! Emotion dynamics for song lyrics.
//!
//! A lexicon-feature ridge regressor scores each verse, and a linear Gaussian
//! state space model turns the per-verse scores of a song into a smoothed
//! emotion trajectory.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod corpus;
pub mod error;
pub mod evalstats;
pub mod lexicons;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod ssm;
pub mod verse_model;

pub use error::{Error, Result};
