use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::tokenizer::{TokenizerModel, BOS_ID, EOS_ID};

/// Maps generated ids back to surface tokens (extended ids through the
/// example's out-of-vocabulary map), strips BOS/EOS and renders a headline
/// string at the tokenizer's level.
pub fn resolve_and_postprocess(
    ids: &[u32],
    example: &EncodedExample,
    tokenizer: &TokenizerModel,
) -> Result<String> {
    let vocab = tokenizer.vocab();
    let mut tokens: Vec<String> = Vec::with_capacity(ids.len());
    for &id in ids {
        if id == BOS_ID || id == EOS_ID {
            continue;
        }
        let token = if (id as usize) < example.vocab_size {
            vocab
                .token_of(id)
                .ok_or(Error::UnresolvableId { id })?
                .to_string()
        } else {
            example
                .token_of_extended(id)
                .ok_or(Error::UnresolvableId { id })?
                .to_string()
        };
        tokens.push(token);
    }
    Ok(tokenizer.render(&tokens))
}
