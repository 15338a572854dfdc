//! Core library for inducing domain-specific word embeddings and an
//! aggression/loss lexicon from an unlabeled tweet corpus, building
//! user-history and user-interaction context features, and training a
//! cascaded context-augmented CNN (plus a linear baseline) for 3-way
//! tweet classification, with a permutation-test evaluation harness.

pub mod context;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod model;
pub mod splex;

mod error;
mod vecops;

pub use error::{Error, Result};
