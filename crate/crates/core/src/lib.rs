//! Sequential block-wise pairwise ranking for implicit-feedback
//! recommendation.
//!
//! Each user's time-ordered stream is cut into blocks (a run of shown but
//! not clicked items followed by the clicks that end it) and a latent factor
//! model is updated block by block on a regularized logistic pairwise loss.
//! Two trainers are provided: [`train::train_saros_b`], which discards all
//! updates of users whose block count falls outside `[b, B]`, and
//! [`train::train_saros_m`], which smooths block gradients with momentum.
//! Popularity and BPR baselines, and NDCG@K / MAP@K evaluation, complete the
//! toolkit.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, parsing and
//! the command-line front end live in the companion `saros` crate.
#![no_std]

extern crate alloc;

pub mod baselines;
pub mod blocking;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use model::{InitSpec, ItemId, LatentModel, UserId};
