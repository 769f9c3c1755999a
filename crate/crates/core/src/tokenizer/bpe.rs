use std::collections::{BTreeMap, HashMap, HashSet};

use super::vocab::Vocabulary;
use super::words::normalize;
use crate::error::{Error, Result};

/// Word-boundary marker emitted as its own symbol before every word. Early
/// merges typically glue it onto word-initial symbols, which is what makes
/// decoding lossless: replacing the marker with a space reconstructs the
/// original spacing.
pub const DEFAULT_MARKER: &str = "\u{2581}";

/// Trained byte-pair encoding model: an ordered merge list plus the
/// vocabulary derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    pub(crate) merges: Vec<(String, String)>,
    pub(crate) vocab: Vocabulary,
    pub(crate) marker: String,
    /// Base symbols (marker + single characters) seen in training; anything
    /// outside this alphabet encodes to UNK.
    pub(crate) alphabet: HashSet<String>,
}

/// Greedy merge training: repeatedly merge the most frequent adjacent symbol
/// pair until the vocabulary reaches `target_vocab_size` or no pair occurs
/// at least twice. Ties break lexicographically by (left, right) so training
/// is deterministic; counts are global, so document order does not matter.
pub fn train_bpe(corpus: &[String], target_vocab_size: usize) -> Result<BpeModel> {
    // Distinct words with counts; symbol sequences start with the marker.
    let mut word_counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    let mut base_chars: HashSet<char> = HashSet::new();
    for doc in corpus {
        for word in normalize(doc).split_whitespace() {
            base_chars.extend(word.chars());
            let symbols = decompose(word, DEFAULT_MARKER);
            *word_counts.entry(symbols).or_insert(0) += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let floor = 4 + base_chars.len();
    if target_vocab_size <= floor {
        return Err(Error::VocabTooSmall {
            target: target_vocab_size,
            floor,
        });
    }

    let mut alphabet: HashSet<String> = HashSet::new();
    for word in word_counts.keys() {
        alphabet.extend(word.iter().cloned());
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut vocab_size = 4 + alphabet.len();
    while vocab_size < target_vocab_size {
        let Some(pair) = best_pair(&word_counts) else { break };
        word_counts = word_counts
            .into_iter()
            .map(|(symbols, count)| (apply_merge(symbols, &pair.0, &pair.1), count))
            .collect();
        merges.push(pair);
        vocab_size += 1;
    }

    // Ids by frequency in the fully merged corpus; absorbed intermediate
    // symbols keep a zero count but stay in the vocabulary because encoding
    // unseen words can still produce them.
    let mut symbol_counts: BTreeMap<String, u64> = alphabet
        .iter()
        .map(|s| (s.clone(), 0))
        .chain(merges.iter().map(|(l, r)| (format!("{l}{r}"), 0)))
        .collect();
    for (symbols, count) in &word_counts {
        for s in symbols {
            *symbol_counts.get_mut(s).expect("symbol tracked") += count;
        }
    }
    let vocab = Vocabulary::from_counts(symbol_counts, target_vocab_size);

    Ok(BpeModel {
        merges,
        vocab,
        marker: DEFAULT_MARKER.to_string(),
        alphabet,
    })
}

fn decompose(word: &str, marker: &str) -> Vec<String> {
    std::iter::once(marker.to_string())
        .chain(word.chars().map(|c| c.to_string()))
        .collect()
}

/// Most frequent adjacent pair occurring at least twice; ties break by
/// (left, right) lexicographically.
fn best_pair(word_counts: &BTreeMap<Vec<String>, u64>) -> Option<(String, String)> {
    let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
    for (symbols, count) in word_counts {
        for window in symbols.windows(2) {
            *pair_counts
                .entry((window[0].as_str(), window[1].as_str()))
                .or_insert(0) += count;
        }
    }
    pair_counts
        .into_iter()
        .filter(|&(_, count)| count >= 2)
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|((l, r), _)| (l.to_string(), r.to_string()))
}

/// Replaces adjacent (left, right) with the concatenation, scanning left to
/// right. Training and encoding share this exact procedure.
fn apply_merge(symbols: Vec<String>, left: &str, right: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

impl BpeModel {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Subword token strings for a text. Characters outside the training
    /// alphabet stay as their literal surface (they map to UNK ids but keep
    /// a copyable surface form).
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let normalized = normalize(text);
        let mut out = Vec::new();
        for word in normalized.split_whitespace() {
            let mut symbols = decompose(word, &self.marker);
            // Unknown symbols are left in place; merges never touch them
            // because merge sides are always alphabet members or products.
            for (left, right) in &self.merges {
                symbols = apply_merge(symbols, left, right);
            }
            out.extend(symbols);
        }
        out
    }

    /// Encodes to ids: tokenize, then map each symbol through the
    /// vocabulary, with out-of-alphabet symbols becoming UNK.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.tokenize(text)
            .iter()
            .map(|s| self.vocab.id_or_unk(s))
            .collect()
    }

    /// Inverse of `encode` on texts covered by the alphabet:
    /// `decode(encode(t)) == normalize(t)`.
    pub fn decode(&self, ids: &[u32]) -> String {
        let tokens: Vec<&str> = ids
            .iter()
            .filter_map(|&id| self.vocab.token_of(id))
            .collect();
        self.decode_tokens(tokens.iter().map(|s| s.to_string()))
    }

    /// Joins token surfaces and turns markers back into spaces.
    pub fn decode_tokens<I: IntoIterator<Item = String>>(&self, tokens: I) -> String {
        let joined: String = tokens.into_iter().collect();
        joined
            .replace(&self.marker, " ")
            .trim()
            .to_string()
    }

    pub fn in_alphabet(&self, symbol: &str) -> bool {
        self.alphabet.contains(symbol)
    }
}
