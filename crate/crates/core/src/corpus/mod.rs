//! Dataset ingestion, deterministic splitting, encoding with per-example
//! extended-vocabulary bookkeeping, truncation and token-budget batching.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tokenizer::{normalize, TokenLevel, TokenizerModel, BOS_ID, EOS_ID, PAD_ID, UNK_ID};

/// One news item: article body and reference headline, normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub title: String,
}

/// 90:5:5 by default; parts must be positive and sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_parts: u32,
    pub val_parts: u32,
    pub test_parts: u32,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(train_parts: u32, val_parts: u32, test_parts: u32, seed: u64) -> Result<Self> {
        if train_parts == 0
            || val_parts == 0
            || test_parts == 0
            || train_parts + val_parts + test_parts != 100
        {
            return Err(Error::InvalidRatio {
                ratio: format!("{train_parts}:{val_parts}:{test_parts}"),
            });
        }
        Ok(Self {
            train_parts,
            val_parts,
            test_parts,
            seed,
        })
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_parts: 90,
            val_parts: 5,
            test_parts: 5,
            seed: 0,
        }
    }
}

/// Source-length caps before out-of-vocabulary mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationLimits {
    pub word_limit: usize,
    pub subword_limit: usize,
}

impl Default for TruncationLimits {
    fn default() -> Self {
        Self {
            word_limit: 400,
            subword_limit: 800,
        }
    }
}

impl TruncationLimits {
    pub fn for_level(&self, level: TokenLevel) -> usize {
        match level {
            TokenLevel::Word => self.word_limit,
            TokenLevel::Subword => self.subword_limit,
        }
    }
}

/// A document encoded for training/decoding. Extended ids address distinct
/// out-of-vocabulary source tokens, contiguously from `vocab_size` in order
/// of first occurrence, so the copy head can emit them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub source_ids: Vec<u32>,
    pub source_tokens: Vec<String>,
    pub target_ids: Vec<u32>,
    pub extended_target_ids: Vec<u32>,
    /// Ordered (surface token, extended id).
    pub oov_map: Vec<(String, u32)>,
    pub vocab_size: usize,
}

impl EncodedExample {
    pub fn extended_id_of(&self, token: &str) -> Option<u32> {
        self.oov_map
            .iter()
            .find(|(t, _)| t == token)
            .map(|&(_, id)| id)
    }

    pub fn token_of_extended(&self, id: u32) -> Option<&str> {
        self.oov_map
            .iter()
            .find(|&&(_, eid)| eid == id)
            .map(|(t, _)| t.as_str())
    }

    /// Outcome id of a source position under the joint distribution: the
    /// vocabulary id when known, otherwise the position's extended id.
    pub fn outcome_id(&self, position: usize) -> u32 {
        let id = self.source_ids[position];
        if id == UNK_ID {
            self.extended_id_of(&self.source_tokens[position])
                .expect("every OOV source token is in the map")
        } else {
            id
        }
    }
}

/// Writes documents as UTF-8 JSONL with "text" and "title" fields.
pub fn write_jsonl(docs: &[Document], path: &Path) -> Result<()> {
    use std::io::Write;
    let display = path.display().to_string();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    for doc in docs {
        let line = serde_json::to_string(doc).expect("document serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(&display, e))?;
    }
    Ok(())
}

/// Loads a JSONL file of `{"text": ..., "title": ...}` objects, in order,
/// normalizing both fields.
pub fn load_jsonl(path: &Path) -> Result<Vec<Document>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&display, line_no, format!("invalid JSON: {e}")))?;
        let field = |name: &str| -> Result<String> {
            value
                .get(name)
                .and_then(|v| v.as_str())
                .map(normalize)
                .ok_or_else(|| Error::MissingField {
                    field: name.to_string(),
                    line: line_no,
                })
        };
        let text = field("text")?;
        let title = field("title")?;
        if text.is_empty() || title.is_empty() {
            return Err(Error::parse(
                &display,
                line_no,
                format!(
                    "field {:?} is empty after normalization",
                    if text.is_empty() { "text" } else { "title" }
                ),
            ));
        }
        docs.push(Document { text, title });
    }
    Ok(docs)
}

/// Deterministic shuffle by seed, then partition: val and test get
/// `round(n*parts/100)` documents each, train takes the remainder.
pub fn split_dataset(
    docs: &[Document],
    config: &SplitConfig,
) -> Result<(Vec<Document>, Vec<Document>, Vec<Document>)> {
    let n = docs.len();
    if n < 20 {
        return Err(Error::TooFewDocuments { got: n, min: 20 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::seed_from(config.seed).shuffle(&mut order);

    let rounded = |parts: u32| -> usize {
        ((n as f64) * (parts as f64) / 100.0).round() as usize
    };
    let val_n = rounded(config.val_parts);
    let test_n = rounded(config.test_parts);
    let train_n = n - val_n - test_n;

    let pick = |range: std::ops::Range<usize>| -> Vec<Document> {
        order[range].iter().map(|&i| docs[i].clone()).collect()
    };
    Ok((
        pick(0..train_n),
        pick(train_n..train_n + val_n),
        pick(train_n + val_n..n),
    ))
}

/// Encodes one document: prefix-truncates the source to the level's limit,
/// assigns extended ids to distinct OOV source tokens by first occurrence,
/// and rewrites target UNKs that the source can cover.
pub fn encode_example(
    doc: &Document,
    tokenizer: &TokenizerModel,
    limits: &TruncationLimits,
) -> Result<EncodedExample> {
    let limit = limits.for_level(tokenizer.level());
    let (mut source_tokens, mut source_ids) = tokenizer.tokenize_with_ids(&doc.text);
    source_tokens.truncate(limit);
    source_ids.truncate(limit);
    if source_ids.is_empty() {
        return Err(Error::EmptySource);
    }

    let vocab_size = tokenizer.vocab().len();
    let mut oov_map: Vec<(String, u32)> = Vec::new();
    for (token, &id) in source_tokens.iter().zip(&source_ids) {
        if id == UNK_ID && !oov_map.iter().any(|(t, _)| t == token) {
            let ext = (vocab_size + oov_map.len()) as u32;
            oov_map.push((token.clone(), ext));
        }
    }

    let (target_tokens, target_raw_ids) = tokenizer.tokenize_with_ids(&doc.title);
    let mut target_ids = Vec::with_capacity(target_raw_ids.len() + 2);
    target_ids.push(BOS_ID);
    target_ids.extend(&target_raw_ids);
    target_ids.push(EOS_ID);

    let mut extended_target_ids = target_ids.clone();
    for (pos, token) in target_tokens.iter().enumerate() {
        if target_raw_ids[pos] == UNK_ID {
            if let Some(ext) = oov_map.iter().find(|(t, _)| t == token).map(|&(_, e)| e) {
                extended_target_ids[pos + 1] = ext;
            }
        }
    }

    Ok(EncodedExample {
        source_ids,
        source_tokens,
        target_ids,
        extended_target_ids,
        oov_map,
        vocab_size,
    })
}

/// A group of examples whose padded source tensor fits the token budget.
#[derive(Debug, Clone)]
pub struct Batch {
    pub example_indices: Vec<usize>,
    pub padded_sources: Vec<Vec<u32>>,
    /// 1.0 at real positions, 0.0 at padding.
    pub source_masks: Vec<Vec<f64>>,
}

/// Groups examples (sorted by source length) so the padded token count per
/// batch stays within `max_tokens_per_batch`, pads with PAD, then shuffles
/// batch order deterministically by `seed`.
pub fn make_batches(
    examples: &[EncodedExample],
    max_tokens_per_batch: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if let Some(longest) = examples.iter().map(|e| e.source_ids.len()).max() {
        if longest > max_tokens_per_batch {
            return Err(Error::BatchBudgetExceeded {
                length: longest,
                budget: max_tokens_per_batch,
            });
        }
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by_key(|&i| examples[i].source_ids.len());

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for &idx in &order {
        let len = examples[idx].source_ids.len();
        // Ascending order makes the newest length the batch max.
        if !current.is_empty() && (current.len() + 1) * len > max_tokens_per_batch {
            groups.push(std::mem::take(&mut current));
        }
        current.push(idx);
    }
    if !current.is_empty() {
        groups.push(current);
    }

    let mut batches: Vec<Batch> = groups
        .into_iter()
        .map(|indices| {
            let width = indices
                .iter()
                .map(|&i| examples[i].source_ids.len())
                .max()
                .unwrap();
            let padded_sources: Vec<Vec<u32>> = indices
                .iter()
                .map(|&i| {
                    let mut row = examples[i].source_ids.clone();
                    row.resize(width, PAD_ID);
                    row
                })
                .collect();
            let source_masks: Vec<Vec<f64>> = indices
                .iter()
                .map(|&i| {
                    let real = examples[i].source_ids.len();
                    let mut row = vec![1.0; real];
                    row.resize(width, 0.0);
                    row
                })
                .collect();
            Batch {
                example_indices: indices,
                padded_sources,
                source_masks,
            }
        })
        .collect();

    Rng::seed_from(seed).shuffle(&mut batches);
    Ok(batches)
}
