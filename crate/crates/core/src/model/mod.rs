//! LSTM encoder-decoder with additive attention and an optional copy head.
//!
//! The copy head scores every unmasked source position, shares one
//! normalization with the generate scores, and pools position mass onto
//! outcome ids so the model can emit out-of-vocabulary source tokens through
//! the example's extended vocabulary. All forward math runs on the autodiff
//! tape, so training, inference and gradient checking share one code path.

mod checkpoint;
mod config;
mod net;
mod params;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use net::{
    attention, decoder_step, encode_source, initial_state, joint_distribution, lstm_step,
    DecoderState, EncoderOutput,
};
pub use params::{BoundParams, ModelParams};
