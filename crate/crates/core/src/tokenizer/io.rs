use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::bpe::BpeModel;
use super::vocab::Vocabulary;
use super::TokenizerModel;
use crate::error::{Error, Result};

/// Serializes a tokenizer to its text format:
///
/// ```text
/// bpe v1 <vocab_size> <marker>      (or: word v1 <vocab_size>)
/// left<TAB>right                    (one merge per line, training order)
/// #vocab
/// token<TAB>id                      (one per line)
/// ```
pub fn to_text(model: &TokenizerModel) -> String {
    let mut out = String::new();
    match model {
        TokenizerModel::Subword(bpe) => {
            out.push_str(&format!("bpe v1 {} {}\n", bpe.vocab.len(), bpe.marker));
            for (left, right) in &bpe.merges {
                out.push_str(&format!("{left}\t{right}\n"));
            }
            out.push_str("#vocab\n");
            for (token, id) in bpe.vocab.tokens() {
                out.push_str(&format!("{token}\t{id}\n"));
            }
        }
        TokenizerModel::Word(vocab) => {
            out.push_str(&format!("word v1 {}\n", vocab.len()));
            out.push_str("#vocab\n");
            for (token, id) in vocab.tokens() {
                out.push_str(&format!("{token}\t{id}\n"));
            }
        }
    }
    out
}

pub fn save_model(model: &TokenizerModel, path: &Path) -> Result<()> {
    fs::write(path, to_text(model)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn from_text(text: &str, path: &str) -> Result<TokenizerModel> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let bad_header = || Error::parse(path, 1, format!("bad header {header:?}"));

    let (kind, declared_size, marker) = match fields.as_slice() {
        ["bpe", "v1", size, marker] => ("bpe", size, Some(marker.to_string())),
        ["word", "v1", size] => ("word", size, None),
        _ => return Err(bad_header()),
    };
    let declared_size: usize = declared_size.parse().map_err(|_| bad_header())?;

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut entries: Vec<(String, u32)> = Vec::new();
    let mut in_vocab = kind == "word";
    let mut saw_vocab_header = false;
    let mut last_valid = 1;

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        if line == "#vocab" {
            if saw_vocab_header {
                return Err(Error::parse(path, line_no, "duplicate #vocab section"));
            }
            in_vocab = true;
            saw_vocab_header = true;
            last_valid = line_no;
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected two tab-separated fields (last valid line {last_valid})"),
            ));
        };
        if in_vocab {
            let id: u32 = b.parse().map_err(|_| {
                Error::parse(path, line_no, format!("bad vocabulary id {b:?}"))
            })?;
            entries.push((a.to_string(), id));
        } else {
            merges.push((a.to_string(), b.to_string()));
        }
        last_valid = line_no;
    }

    if kind == "bpe" && !saw_vocab_header {
        return Err(Error::parse(
            path,
            last_valid,
            format!("missing #vocab section (last valid line {last_valid})"),
        ));
    }
    if entries.len() != declared_size {
        return Err(Error::parse(
            path,
            last_valid,
            format!(
                "header declares {declared_size} vocabulary entries, found {} (last valid line {last_valid})",
                entries.len()
            ),
        ));
    }
    let vocab = Vocabulary::from_entries(entries)
        .map_err(|e| Error::parse(path, last_valid, e.to_string()))?;

    match kind {
        "bpe" => {
            let marker = marker.unwrap();
            // The alphabet is recoverable: base symbols are vocabulary tokens
            // that are not merge products.
            let products: HashSet<String> = merges
                .iter()
                .map(|(l, r)| format!("{l}{r}"))
                .collect();
            let alphabet: HashSet<String> = vocab
                .tokens()
                .filter(|(t, id)| *id >= 4 && !products.contains(*t))
                .map(|(t, _)| t.to_string())
                .collect();
            Ok(TokenizerModel::Subword(BpeModel {
                merges,
                vocab,
                marker,
                alphabet,
            }))
        }
        _ => Ok(TokenizerModel::Word(vocab)),
    }
}

pub fn load_model(path: &Path) -> Result<TokenizerModel> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    from_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::bpe::train_bpe;
    use tempfile::tempdir;

    fn trained() -> TokenizerModel {
        TokenizerModel::Subword(
            train_bpe(&["низкий низкий порог порог входа".to_string()], 30).unwrap(),
        )
    }

    #[test]
    fn save_load_round_trip_preserves_merges_and_vocab() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.bpe");
        let model = trained();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn loaded_model_encodes_identically() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.bpe");
        let model = trained();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for text in ["низкий порог", "вход", "x y z", ""] {
            assert_eq!(model.encode(text), loaded.encode(text));
        }
    }

    #[test]
    fn truncated_file_reports_last_valid_line() {
        let model = trained();
        let text = to_text(&model);
        // Drop everything from #vocab on.
        let cut = text.find("#vocab").unwrap();
        let err = from_text(&text[..cut], "trunc.bpe").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("last valid line"), "got: {msg}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = from_text("bpe v1 5 \u{2581}\nno-tab-here\n#vocab\n", "bad.bpe").unwrap_err();
        assert!(err.to_string().contains("bad.bpe:2"), "got: {err}");
    }

    #[test]
    fn word_model_round_trips() {
        let vocab = Vocabulary::from_counts(
            vec![("дом".to_string(), 3u64), ("мир".to_string(), 1)],
            100,
        );
        let model = TokenizerModel::Word(vocab);
        let text = to_text(&model);
        let loaded = from_text(&text, "word.vocab").unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn save_is_deterministic() {
        let a = to_text(&trained());
        let b = to_text(&trained());
        assert_eq!(a, b);
    }
}
