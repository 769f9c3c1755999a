use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use headliner::corpus::{
    encode_example, load_jsonl, split_dataset, write_jsonl, Document, EncodedExample,
};
use headliner::decoder::{
    beam_search, first_sentence, first_sentence_modified, resolve_and_postprocess, BeamConfig,
    ModelScorer,
};
use headliner::metrics::evaluate_corpus;
use headliner::model::{Checkpoint, ModelConfig};
use headliner::tokenizer::{self, TokenLevel, TokenizerModel};
use headliner::trainer::Trainer;

use crate::config::{parse_ratio, parse_run_config, RunConfig};
use crate::{usage, BaselineMode, UsageError};

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

pub fn bpe_train(input: &Path, vocab_size: usize, out: &Path) -> Result<()> {
    require_file(input, "input corpus")?;
    let docs = load_jsonl(input)?;
    // Text and title both feed the encoding, as the model sees both.
    let corpus: Vec<String> = docs
        .into_iter()
        .flat_map(|d| [d.text, d.title])
        .collect();
    let model = tokenizer::train_bpe(&corpus, vocab_size)?;
    eprintln!(
        "trained {} merges, vocabulary {}",
        model.merges().len(),
        model.vocab().len()
    );
    tokenizer::save_model(&TokenizerModel::Subword(model), out)?;
    Ok(())
}

pub fn split(input: &Path, ratio: &str, seed: u64, out_dir: &Path) -> Result<()> {
    require_file(input, "input corpus")?;
    let config = parse_ratio(ratio, seed).map_err(|e| usage(e.to_string()))?;
    let docs = load_jsonl(input)?;
    let (train, val, test) = split_dataset(&docs, &config)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    write_jsonl(&train, &out_dir.join("train.jsonl"))?;
    write_jsonl(&val, &out_dir.join("val.jsonl"))?;
    write_jsonl(&test, &out_dir.join("test.jsonl"))?;
    let manifest = serde_json::json!({
        "seed": seed,
        "ratio": ratio,
        "counts": {"train": train.len(), "val": val.len(), "test": test.len()},
    });
    fs::write(
        out_dir.join("split.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    eprintln!("split {}/{}/{}", train.len(), val.len(), test.len());
    Ok(())
}

/// Loads or builds the tokenizer a run needs. Word-level models may omit
/// `paths.tokenizer`; the vocabulary is then built from the training split,
/// capped at the configured vocabulary size.
fn resolve_tokenizer(config: &RunConfig, train_docs: &[Document]) -> Result<TokenizerModel> {
    match (&config.tokenizer, config.model.token_level) {
        (Some(path), _) => {
            require_file(path, "tokenizer model")?;
            let model = tokenizer::load_model(path)?;
            if model.level() != config.model.token_level {
                return Err(usage(format!(
                    "tokenizer at {} is {} level but the run wants {}",
                    path.display(),
                    model.level(),
                    config.model.token_level
                )));
            }
            Ok(model)
        }
        (None, TokenLevel::Word) => Ok(TokenizerModel::train_word(
            train_docs
                .iter()
                .flat_map(|d| [d.text.clone(), d.title.clone()]),
            config.model.vocab_size,
        )),
        (None, TokenLevel::Subword) => Err(usage(
            "subword runs need paths.tokenizer pointing at a trained bpe model",
        )),
    }
}

pub fn train(config_path: &Path, out_dir: &Path, resume: bool) -> Result<()> {
    require_file(config_path, "run config")?;
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let config = parse_run_config(&text, config_path)
        .map_err(|e| anyhow::Error::new(UsageError(format!("{e:#}"))))?;
    require_file(&config.train_data, "training dataset")?;
    require_file(&config.val_data, "validation dataset")?;

    let train_docs = load_jsonl(&config.train_data)?;
    let val_docs = load_jsonl(&config.val_data)?;
    let tok = resolve_tokenizer(&config, &train_docs)?;

    // The embedding and generate head must match the actual vocabulary.
    let actual_vocab = tok.vocab().len();
    if actual_vocab != config.model.vocab_size {
        eprintln!(
            "note: vocabulary has {actual_vocab} entries (configured cap {})",
            config.model.vocab_size
        );
    }
    let model_config = ModelConfig {
        vocab_size: actual_vocab,
        ..config.model.clone()
    };

    let encode_all = |docs: &[Document]| -> Result<Vec<EncodedExample>> {
        docs.iter()
            .map(|d| encode_example(d, &tok, &config.limits).map_err(anyhow::Error::new))
            .collect()
    };
    let train_examples = encode_all(&train_docs)?;
    let val_examples = encode_all(&val_docs)?;

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("run.cfg"), &config.snapshot)?;
    // Defaults made explicit, so a run directory is reproducible on its own.
    let resolved = serde_json::json!({
        "model": model_config,
        "train": config.train,
        "beam": config.beam,
        "limits": config.limits,
        "split": config.split,
    });
    fs::write(
        out_dir.join("resolved.json"),
        serde_json::to_string_pretty(&resolved)? + "\n",
    )?;

    let mut trainer = if resume {
        let last = out_dir.join("last.ckpt");
        require_file(&last, "resume checkpoint")?;
        let ckpt = Checkpoint::load(&last)?;
        eprintln!("resuming from {}", last.display());
        Trainer::from_checkpoint(&ckpt)?
    } else {
        Trainer::new(&model_config, tokenizer::to_text(&tok), config.limits)
    };

    let report = trainer.run(&train_examples, &val_examples, &config.train, Some(out_dir))?;
    for m in &report.epochs {
        eprintln!(
            "epoch {}: train {:.4} val {:.4}",
            m.epoch, m.train_loss, m.val_loss
        );
    }
    eprintln!(
        "stopped ({:?}) best epoch {} val loss {:.4}",
        report.stop_reason, report.best_epoch, report.best_val_loss
    );
    Ok(())
}

pub fn generate(
    checkpoint: &Path,
    input: &Path,
    beam: usize,
    greedy: bool,
    max_length: usize,
    out: &Path,
) -> Result<()> {
    require_file(checkpoint, "checkpoint")?;
    require_file(input, "input corpus")?;
    if beam == 0 {
        return Err(usage("--beam must be at least 1"));
    }
    let ckpt = Checkpoint::load(checkpoint)?;
    let params = ckpt.params()?;
    let tok = tokenizer::from_text(&ckpt.tokenizer_text, "checkpoint tokenizer")?;
    let docs = load_jsonl(input)?;
    let beam_config = BeamConfig {
        width: if greedy { 1 } else { beam },
        max_target_length: max_length,
        length_normalization_alpha: 0.0,
    };

    let mut lines = Vec::with_capacity(docs.len());
    for doc in &docs {
        let example = encode_example(doc, &tok, &ckpt.limits)?;
        let mut scorer = ModelScorer::new(&params, &example)?;
        let hyp = beam_search(&mut scorer, &beam_config)?;
        lines.push(resolve_and_postprocess(&hyp.tokens, &example, &tok)?);
    }
    write_lines(out, &lines)?;
    eprintln!("generated {} headlines", lines.len());
    Ok(())
}

pub fn baseline(mode: BaselineMode, input: &Path, out: &Path) -> Result<()> {
    require_file(input, "input corpus")?;
    let docs = load_jsonl(input)?;
    let lines: Vec<String> = docs
        .iter()
        .map(|d| match mode {
            BaselineMode::First => first_sentence(&d.text),
            BaselineMode::FirstModified => first_sentence_modified(&d.text),
        })
        .collect();
    write_lines(out, &lines)?;
    eprintln!("wrote {} baseline headlines", lines.len());
    Ok(())
}

pub fn evaluate(predictions: &Path, references: &Path, out: &Path) -> Result<()> {
    require_file(predictions, "predictions file")?;
    require_file(references, "references file")?;
    let report = evaluate_corpus(predictions, references)?;
    fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    eprintln!(
        "r_mean_f {:.4} bleu {:.2} over {} examples",
        report.r_mean_f, report.bleu, report.n_examples
    );
    Ok(())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut file =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for line in lines {
        writeln!(file, "{line}")?;
    }
    Ok(())
}
