//! Conversational question answering over an n-ary knowledge graph.
//!
//! The engine keeps a set of context entities per conversation, runs one
//! policy-network agent from each of them, and aggregates the endpoints the
//! agents pick. It learns with REINFORCE from implicit feedback: a follow-up
//! that restates the previous question means the answer was wrong, a new
//! question means it was right.
//!
//! Start with [`kg::KgIndex`], [`context::ContextTracker`] and
//! [`trainer::Trainer`]; the `examples/` directory walks through each part.

pub mod agent;
pub mod answerer;
pub mod bandit;
pub mod checkpoint;
pub mod config;
pub mod context;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod kg;
pub mod ned;
pub mod policy;
pub mod refpred;
pub mod service;
pub mod synthetic;
pub mod text;
pub mod trainer;
pub mod user_sim;

pub use error::{Error, Result};
