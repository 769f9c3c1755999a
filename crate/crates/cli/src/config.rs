//! Flat `key = value` run configuration with dotted namespaces.
//!
//! Unknown keys are rejected so a typo never silently falls back to a
//! default. `#` starts a comment; blank lines are ignored. The bare `seed`
//! key seeds every section that does not set its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use headliner::corpus::{SplitConfig, TruncationLimits};
use headliner::decoder::BeamConfig;
use headliner::model::ModelConfig;
use headliner::tokenizer::TokenLevel;
use headliner::trainer::TrainConfig;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub beam: BeamConfig,
    pub limits: TruncationLimits,
    pub split: SplitConfig,
    pub train_data: PathBuf,
    pub val_data: PathBuf,
    pub tokenizer: Option<PathBuf>,
    /// The resolved text, stored verbatim in the run directory.
    pub snapshot: String,
}

const KNOWN_KEYS: [&str; 27] = [
    "seed",
    "model.token_level",
    "model.vocab_size",
    "model.embedding_dim",
    "model.encoder_hidden_dim",
    "model.decoder_hidden_dim",
    "model.use_copy",
    "model.bidirectional_encoder",
    "model.seed",
    "train.learning_rate",
    "train.adam_beta1",
    "train.adam_beta2",
    "train.adam_eps",
    "train.clip_norm",
    "train.max_epochs",
    "train.patience",
    "train.seed",
    "train.batch_token_budget",
    "beam.width",
    "beam.max_target_length",
    "beam.length_normalization_alpha",
    "limits.word",
    "limits.subword",
    "split.ratio",
    "split.seed",
    "paths.train_data",
    "paths.val_data",
];

// paths.tokenizer is optional and therefore not in the required scan below.
const OPTIONAL_KEYS: [&str; 1] = ["paths.tokenizer"];

pub fn parse_run_config(text: &str, origin: &Path) -> Result<RunConfig> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{line_no}: expected key = value", origin.display()))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) {
            bail!("{}:{line_no}: unknown key {key:?}", origin.display());
        }
        if entries.insert(key.clone(), value).is_some() {
            bail!("{}:{line_no}: duplicate key {key:?}", origin.display());
        }
    }

    let get = |key: &str| -> Option<&str> { entries.get(key).map(String::as_str) };
    let require = |key: &str| -> Result<&str> {
        get(key).ok_or_else(|| anyhow!("{}: missing required key {key:?}", origin.display()))
    };
    fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse::<T>()
            .map_err(|e| anyhow!("key {key:?}: bad value {value:?}: {e}"))
    }
    macro_rules! opt {
        ($key:expr, $default:expr) => {
            match get($key) {
                Some(v) => parse($key, v)?,
                None => $default,
            }
        };
    }

    let global_seed: u64 = opt!("seed", 0);

    let token_level: TokenLevel = parse("model.token_level", require("model.token_level")?)?;
    let model = ModelConfig {
        token_level,
        vocab_size: parse("model.vocab_size", require("model.vocab_size")?)?,
        embedding_dim: parse("model.embedding_dim", require("model.embedding_dim")?)?,
        encoder_hidden_dim: parse(
            "model.encoder_hidden_dim",
            require("model.encoder_hidden_dim")?,
        )?,
        decoder_hidden_dim: parse(
            "model.decoder_hidden_dim",
            require("model.decoder_hidden_dim")?,
        )?,
        use_copy: opt!("model.use_copy", true),
        bidirectional_encoder: opt!("model.bidirectional_encoder", true),
        seed: opt!("model.seed", global_seed),
    };

    let defaults = TrainConfig::default();
    let train = TrainConfig {
        learning_rate: opt!("train.learning_rate", defaults.learning_rate),
        adam_beta1: opt!("train.adam_beta1", defaults.adam_beta1),
        adam_beta2: opt!("train.adam_beta2", defaults.adam_beta2),
        adam_eps: opt!("train.adam_eps", defaults.adam_eps),
        clip_norm: opt!("train.clip_norm", defaults.clip_norm),
        max_epochs: opt!("train.max_epochs", defaults.max_epochs),
        patience: opt!("train.patience", defaults.patience),
        seed: opt!("train.seed", global_seed),
        batch_token_budget: opt!("train.batch_token_budget", defaults.batch_token_budget),
    };

    let beam_defaults = BeamConfig::default();
    let beam = BeamConfig {
        width: opt!("beam.width", beam_defaults.width),
        max_target_length: opt!("beam.max_target_length", beam_defaults.max_target_length),
        length_normalization_alpha: opt!(
            "beam.length_normalization_alpha",
            beam_defaults.length_normalization_alpha
        ),
    };

    let limit_defaults = TruncationLimits::default();
    let limits = TruncationLimits {
        word_limit: opt!("limits.word", limit_defaults.word_limit),
        subword_limit: opt!("limits.subword", limit_defaults.subword_limit),
    };

    let split_seed: u64 = opt!("split.seed", global_seed);
    let split = match get("split.ratio") {
        Some(ratio) => parse_ratio(ratio, split_seed)?,
        None => SplitConfig {
            seed: split_seed,
            ..SplitConfig::default()
        },
    };

    let train_data = PathBuf::from(require("paths.train_data")?);
    let val_data = PathBuf::from(require("paths.val_data")?);
    let tokenizer = get("paths.tokenizer").map(PathBuf::from);

    Ok(RunConfig {
        model,
        train,
        beam,
        limits,
        split,
        train_data,
        val_data,
        tokenizer,
        snapshot: text.to_string(),
    })
}

/// "90:5:5" -> SplitConfig; every part must be positive, sum 100.
pub fn parse_ratio(ratio: &str, seed: u64) -> Result<SplitConfig> {
    let parts: Vec<&str> = ratio.split(':').collect();
    let [train, val, test] = parts.as_slice() else {
        bail!("ratio {ratio:?} must have the form train:val:test");
    };
    let parse_part = |s: &str| -> Result<u32> {
        s.trim()
            .parse()
            .with_context(|| format!("ratio part {s:?} is not a number"))
    };
    SplitConfig::new(parse_part(train)?, parse_part(val)?, parse_part(test)?, seed)
        .map_err(|e| anyhow!(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
model.token_level = word
model.vocab_size = 100
model.embedding_dim = 8
model.encoder_hidden_dim = 8
model.decoder_hidden_dim = 8
paths.train_data = train.jsonl
paths.val_data = val.jsonl
";

    #[test]
    fn minimal_config_fills_defaults() {
        let config = parse_run_config(MINIMAL, Path::new("run.cfg")).unwrap();
        assert_eq!(config.train.learning_rate, 0.001);
        assert_eq!(config.train.clip_norm, 5.0);
        assert_eq!(config.beam.width, 10);
        assert_eq!(config.limits.word_limit, 400);
        assert!(config.model.use_copy);
        assert!(config.tokenizer.is_none());
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = format!("{MINIMAL}model.vocabsize = 5\n");
        let err = parse_run_config(&text, Path::new("run.cfg")).unwrap_err();
        assert!(err.to_string().contains("run.cfg:8"), "{err}");
        assert!(err.to_string().contains("model.vocabsize"));
    }

    #[test]
    fn comments_and_global_seed_apply() {
        let text = format!("seed = 42 # everything inherits\n{MINIMAL}");
        let config = parse_run_config(&text, Path::new("run.cfg")).unwrap();
        assert_eq!(config.model.seed, 42);
        assert_eq!(config.train.seed, 42);
        assert_eq!(config.split.seed, 42);
    }

    #[test]
    fn missing_required_key_is_named() {
        let err = parse_run_config("seed = 1\n", Path::new("run.cfg")).unwrap_err();
        assert!(err.to_string().contains("model.token_level"), "{err}");
    }

    #[test]
    fn degenerate_ratio_is_rejected() {
        assert!(parse_ratio("50:50:0", 1).is_err());
        assert!(parse_ratio("90:5", 1).is_err());
        assert!(parse_ratio("90:5:5", 1).is_ok());
    }
}
