//! Knowledge-graph embeddings over a small anchor vocabulary.
//!
//! Every entity is described by its nearest anchors, their hop distances and
//! the relation types around it. An MLP turns that description into an
//! embedding, so the parameter count depends on the vocabulary rather than on
//! the number of entities, and nodes added after training can be embedded
//! without retraining.
//!
//! The pipeline is [`graph`] → [`anchors`] → [`tokenizer`] → [`encoder`] →
//! [`train`] → [`eval`]. The guide in `book/` walks through it; its examples
//! run as doctests of this crate.

pub mod anchors;
pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod memory;
pub mod negatives;
pub mod optim;
pub mod params;
pub mod seed;
pub mod synth;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/anchors.md")]
    mod anchors {}
    #[doc = include_str!("../../../book/src/tokenization.md")]
    mod tokenization {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
