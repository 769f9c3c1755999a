//! Beam-search inference with extended-vocabulary resolution, plus the
//! first-sentence baselines.

mod baseline;
mod beam;
mod resolve;

pub use baseline::{first_sentence, first_sentence_modified};
pub use beam::{beam_search, greedy_decode, BeamConfig, Hypothesis, ModelScorer, SequenceScorer};
pub use resolve::resolve_and_postprocess;
