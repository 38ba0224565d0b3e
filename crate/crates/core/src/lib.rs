//! Reward redistribution from multiple sequence alignment of demonstrations.
//!
//! The pipeline turns demonstrations into event sequences ([`events`]),
//! aligns them ([`alignment`]), builds a position-specific scoring matrix
//! ([`profile`]) and redistributes an episodic return over the steps of an
//! episode by differences of prefix alignment scores ([`redistribution`]).
//! [`envs`], [`learning`] and [`harness`] provide the gridworld benchmarks,
//! tabular learners and experiment runner built on top of it.

pub mod alignment;
pub mod envs;
pub mod error;
pub mod events;
pub mod harness;
pub mod learning;
pub mod matrix;
pub mod profile;
pub mod redistribution;
pub mod util;

pub use error::{Category, Error, Result};
