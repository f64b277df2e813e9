//! Memory-augmented Q-networks for stream-based active one-shot learning.
//!
//! An agent sees a stream of images, one at a time, and for each one either
//! predicts its (episode-local) class or pays a small cost to request the
//! label. The action values come from an LSTM controller, optionally backed by
//! an NTM-style or LRUA external memory, trained by Q-learning with full
//! backpropagation through each episode.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, dataset
//! ingestion, the parallel training driver and the command line live in the
//! `roal` companion crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod cms;
pub mod data;
pub mod env;
mod error;
pub mod memory;
pub mod metrics;
pub mod model;
pub mod nn;
mod real;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use real::Real;
