//! Headline generation for news articles, end to end and from scratch.
//!
//! The pipeline: train a subword or word tokenizer on a JSONL corpus of
//! text/title pairs, split the corpus, train an LSTM encoder-decoder with
//! additive attention (optionally with a copy head that can emit
//! out-of-vocabulary source tokens), decode headlines with beam search, and
//! score them with ROUGE and BLEU. Every numeric building block runs on a
//! small reverse-mode autodiff engine that is checked against central finite
//! differences.

pub mod autodiff;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod fixture;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
