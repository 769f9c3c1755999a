use serde::{Deserialize, Serialize};

use crate::tokenizer::TokenLevel;

/// Architecture hyperparameters. The trainable weight count is a pure
/// function of this struct (see [`ModelConfig::param_count`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub token_level: TokenLevel,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub encoder_hidden_dim: usize,
    pub decoder_hidden_dim: usize,
    pub use_copy: bool,
    pub bidirectional_encoder: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn directions(&self) -> usize {
        if self.bidirectional_encoder {
            2
        } else {
            1
        }
    }

    /// Decoder LSTM input width: previous-token embedding, attention
    /// context, and (with the copy head) the selective-read vector.
    pub fn decoder_input_dim(&self) -> usize {
        self.embedding_dim
            + self.decoder_hidden_dim
            + if self.use_copy {
                self.decoder_hidden_dim
            } else {
                0
            }
    }

    /// Named tensor shapes, in a fixed order. The single source of truth for
    /// initialization, parameter counting and checkpoint layout.
    ///
    /// Orientation: `w · x` matrices are `[out, in]`; matrices applied to
    /// stacked rows (`H · w`) are `[in, out]`.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let v = self.vocab_size;
        let e = self.embedding_dim;
        let he = self.encoder_hidden_dim;
        let hd = self.decoder_hidden_dim;
        let dirs = self.directions();
        let mut shapes = vec![
            ("embedding.source".to_string(), vec![v, e]),
            ("embedding.target".to_string(), vec![v, e]),
            ("encoder.fwd.w".to_string(), vec![4 * he, e + he]),
            ("encoder.fwd.b".to_string(), vec![4 * he]),
        ];
        if self.bidirectional_encoder {
            shapes.push(("encoder.bwd.w".to_string(), vec![4 * he, e + he]));
            shapes.push(("encoder.bwd.b".to_string(), vec![4 * he]));
        }
        shapes.extend([
            ("encoder.proj.w".to_string(), vec![dirs * he, hd]),
            ("encoder.proj.b".to_string(), vec![hd]),
            ("encoder.init_h.w".to_string(), vec![hd, dirs * he]),
            ("encoder.init_h.b".to_string(), vec![hd]),
            ("encoder.init_c.w".to_string(), vec![hd, dirs * he]),
            ("encoder.init_c.b".to_string(), vec![hd]),
            (
                "decoder.lstm.w".to_string(),
                vec![4 * hd, self.decoder_input_dim() + hd],
            ),
            ("decoder.lstm.b".to_string(), vec![4 * hd]),
            ("attention.w_s".to_string(), vec![hd, hd]),
            ("attention.w_h".to_string(), vec![hd, hd]),
            ("attention.v".to_string(), vec![hd]),
            ("generate.w".to_string(), vec![v, hd]),
            ("generate.b".to_string(), vec![v]),
        ]);
        if self.use_copy {
            shapes.push(("copy.w".to_string(), vec![hd, hd]));
        }
        shapes
    }

    /// Total trainable weight count.
    pub fn param_count(&self) -> usize {
        self.tensor_shapes()
            .iter()
            .map(|(_, shape)| shape.iter().product::<usize>())
            .sum()
    }
}
