//! Trainable byte-pair encoding and a word-level tokenizer.
//!
//! Both levels share the same normalization (lowercase, collapse whitespace)
//! and the same vocabulary conventions: PAD/UNK/BOS/EOS at ids 0-3, learned
//! ids ranked by frequency. Subword decoding is lossless on normalized text
//! whose characters were seen in training.

mod bpe;
mod io;
mod vocab;
mod words;

use serde::{Deserialize, Serialize};

pub use bpe::{train_bpe, BpeModel, DEFAULT_MARKER};
pub use io::{from_text, load_model, save_model, to_text};
pub use vocab::{
    Vocabulary, BOS_ID, BOS_TOKEN, EOS_ID, EOS_TOKEN, PAD_ID, PAD_TOKEN, SPECIAL_TOKENS, UNK_ID,
    UNK_TOKEN,
};
pub use words::{detokenize, normalize, word_tokenize, PUNCTUATION};

/// Tokenization granularity a model is trained at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenLevel {
    Word,
    Subword,
}

impl std::fmt::Display for TokenLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TokenLevel::Word => write!(f, "word"),
            TokenLevel::Subword => write!(f, "subword"),
        }
    }
}

impl std::str::FromStr for TokenLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(TokenLevel::Word),
            "subword" => Ok(TokenLevel::Subword),
            other => Err(format!("unknown token level {other:?} (word|subword)")),
        }
    }
}

/// A trained tokenizer at either level, with one aligned surface/id view so
/// the copy mechanism can always recover the surface form of a source token.
#[derive(Debug, Clone, PartialEq)]
pub enum TokenizerModel {
    Subword(BpeModel),
    Word(Vocabulary),
}

impl TokenizerModel {
    /// Builds a word-level tokenizer from a corpus, capped at `max_size`.
    pub fn train_word<I: IntoIterator<Item = String>>(texts: I, max_size: usize) -> Self {
        let mut counts: std::collections::HashMap<String, u64> = std::collections::HashMap::new();
        for text in texts {
            for token in word_tokenize(&normalize(&text)) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        TokenizerModel::Word(Vocabulary::from_counts(counts, max_size))
    }

    pub fn level(&self) -> TokenLevel {
        match self {
            TokenizerModel::Subword(_) => TokenLevel::Subword,
            TokenizerModel::Word(_) => TokenLevel::Word,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            TokenizerModel::Subword(bpe) => bpe.vocab(),
            TokenizerModel::Word(vocab) => vocab,
        }
    }

    /// Ids for a text; surfaces are dropped.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.tokenize_with_ids(text).1
    }

    /// Aligned (surface token, id) pairs for a normalized text. Surfaces of
    /// out-of-vocabulary tokens are preserved verbatim alongside UNK ids.
    pub fn tokenize_with_ids(&self, text: &str) -> (Vec<String>, Vec<u32>) {
        match self {
            TokenizerModel::Subword(bpe) => {
                let tokens = bpe.tokenize(text);
                let ids = tokens.iter().map(|t| bpe.vocab().id_or_unk(t)).collect();
                (tokens, ids)
            }
            TokenizerModel::Word(vocab) => {
                let tokens = word_tokenize(&normalize(text));
                let ids = tokens.iter().map(|t| vocab.id_or_unk(t)).collect();
                (tokens, ids)
            }
        }
    }

    /// Renders generated token surfaces back into a headline string.
    pub fn render(&self, tokens: &[String]) -> String {
        match self {
            TokenizerModel::Subword(bpe) => bpe.decode_tokens(tokens.iter().cloned()),
            TokenizerModel::Word(_) => detokenize(tokens),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_vocab_maps_unseen_token_to_unk() {
        let model =
            TokenizerModel::train_word(vec!["министр прибыл в москву".to_string()], 100);
        let (tokens, ids) = model.tokenize_with_ids("министр прибыл в севилью");
        assert_eq!(tokens.last().unwrap(), "севилью");
        assert_eq!(*ids.last().unwrap(), UNK_ID);
        assert!(ids[..3].iter().all(|&id| id != UNK_ID));
    }

    #[test]
    fn encode_never_emits_reserved_specials() {
        let model = TokenizerModel::train_word(vec!["a b c a".to_string()], 100);
        let (_, ids) = model.tokenize_with_ids("a b c d");
        assert!(ids
            .iter()
            .all(|&id| id != PAD_ID && id != BOS_ID && id != EOS_ID));
    }

    #[test]
    fn subword_surface_alignment_matches_ids() {
        let bpe = train_bpe(&["порог порог входа".to_string()], 25).unwrap();
        let model = TokenizerModel::Subword(bpe);
        let (tokens, ids) = model.tokenize_with_ids("порог входа");
        assert_eq!(tokens.len(), ids.len());
        let rendered = model.render(&tokens);
        assert_eq!(rendered, "порог входа");
    }

    #[test]
    fn token_level_parses_and_displays() {
        assert_eq!("word".parse::<TokenLevel>().unwrap(), TokenLevel::Word);
        assert_eq!(
            "subword".parse::<TokenLevel>().unwrap(),
            TokenLevel::Subword
        );
        assert!("chars".parse::<TokenLevel>().is_err());
        assert_eq!(TokenLevel::Subword.to_string(), "subword");
    }
}
