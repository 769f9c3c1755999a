use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::{evaluate_loss, teacher_forced_loss};
use super::TrainConfig;
use crate::autodiff::{GradientMap, Tape, Tensor};
use crate::corpus::{make_batches, EncodedExample, TruncationLimits};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, ModelConfig, ModelParams};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
struct BestSnapshot {
    epoch: usize,
    val_loss: f64,
    params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct TrainerExtra {
    kind: String,
    completed_epochs: usize,
    epochs_since_improve: usize,
    adam_step: u64,
    best: Option<(usize, f64)>,
    history: Vec<EpochMetrics>,
}

/// Optimization loop state. Lives across epochs and serializes into the
/// `last.ckpt` container, so an interrupted run resumed from it follows the
/// same trajectory as an uninterrupted one.
pub struct Trainer {
    pub params: ModelParams,
    pub adam: AdamState,
    completed_epochs: usize,
    epochs_since_improve: usize,
    history: Vec<EpochMetrics>,
    best: Option<BestSnapshot>,
    tokenizer_text: String,
    limits: TruncationLimits,
}

impl Trainer {
    pub fn new(config: &ModelConfig, tokenizer_text: String, limits: TruncationLimits) -> Self {
        let params = ModelParams::init(config);
        let adam = AdamState::new(&params);
        Self {
            params,
            adam,
            completed_epochs: 0,
            epochs_since_improve: 0,
            history: Vec::new(),
            best: None,
            tokenizer_text,
            limits,
        }
    }

    /// Restores a trainer from a `last.ckpt` written by [`Trainer::run`].
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let params = ckpt.params()?;
        let extra: TrainerExtra =
            serde_json::from_value(ckpt.extra.clone()).map_err(|e| Error::Checkpoint {
                message: format!("not a resumable trainer checkpoint: {e}"),
            })?;
        let moment = |prefix: &str| -> Result<std::collections::BTreeMap<String, Tensor>> {
            params
                .names()
                .map(|name| {
                    ckpt.tensors
                        .get(&format!("{prefix}{name}"))
                        .cloned()
                        .map(|t| (name.clone(), t))
                        .ok_or(Error::Checkpoint {
                            message: format!("missing optimizer tensor {prefix}{name}"),
                        })
                })
                .collect()
        };
        let adam = AdamState {
            m: moment("adam.m.")?,
            v: moment("adam.v.")?,
            step: extra.adam_step,
        };
        let best = match extra.best {
            Some((epoch, val_loss)) => {
                let tensors = params
                    .names()
                    .map(|name| {
                        ckpt.tensors
                            .get(&format!("best.{name}"))
                            .cloned()
                            .map(|t| (name.clone(), t))
                            .ok_or(Error::Checkpoint {
                                message: format!("missing best-snapshot tensor best.{name}"),
                            })
                    })
                    .collect::<Result<_>>()?;
                Some(BestSnapshot {
                    epoch,
                    val_loss,
                    params: ModelParams::from_tensors(ckpt.config.clone(), tensors)?,
                })
            }
            None => None,
        };
        Ok(Self {
            params,
            adam,
            completed_epochs: extra.completed_epochs,
            epochs_since_improve: extra.epochs_since_improve,
            history: extra.history,
            best,
            tokenizer_text: ckpt.tokenizer_text.clone(),
            limits: ckpt.limits,
        })
    }

    pub fn best_params(&self) -> &ModelParams {
        self.best.as_ref().map_or(&self.params, |b| &b.params)
    }

    /// Inference checkpoint holding the best-validation parameters.
    pub fn best_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::from_params(
            self.best_params(),
            self.limits,
            self.tokenizer_text.clone(),
        );
        if let Some(best) = &self.best {
            ckpt.extra = serde_json::json!({
                "kind": "best",
                "epoch": best.epoch,
                "val_loss": best.val_loss,
            });
        }
        ckpt
    }

    /// Resumable checkpoint: current parameters, optimizer moments, the best
    /// snapshot and the epoch history.
    pub fn last_checkpoint(&self) -> Checkpoint {
        let mut ckpt =
            Checkpoint::from_params(&self.params, self.limits, self.tokenizer_text.clone());
        for (name, t) in self.adam.m.iter() {
            ckpt.tensors.insert(format!("adam.m.{name}"), t.clone());
        }
        for (name, t) in self.adam.v.iter() {
            ckpt.tensors.insert(format!("adam.v.{name}"), t.clone());
        }
        if let Some(best) = &self.best {
            for (name, t) in best.params.iter() {
                ckpt.tensors.insert(format!("best.{name}"), t.clone());
            }
        }
        let extra = TrainerExtra {
            kind: "trainer-state".to_string(),
            completed_epochs: self.completed_epochs,
            epochs_since_improve: self.epochs_since_improve,
            adam_step: self.adam.step,
            best: self.best.as_ref().map(|b| (b.epoch, b.val_loss)),
            history: self.history.clone(),
        };
        ckpt.extra = serde_json::to_value(extra).expect("trainer state serializes");
        ckpt
    }

    /// Runs epochs until `max_epochs` or until validation loss fails to
    /// improve for `patience` consecutive epochs. Each epoch is a full pass
    /// over seed-shuffled batches; gradients are token-mean per batch.
    pub fn run(
        &mut self,
        train: &[EncodedExample],
        val: &[EncodedExample],
        config: &TrainConfig,
        run_dir: Option<&Path>,
    ) -> Result<TrainReport> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(dir) = run_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }

        let mut stop_reason = StopReason::MaxEpochs;
        while self.completed_epochs < config.max_epochs {
            if self.epochs_since_improve >= config.patience {
                stop_reason = StopReason::EarlyStopping;
                break;
            }
            let epoch = self.completed_epochs;
            let train_loss = self.run_epoch(train, config, epoch)?;
            let val_loss = evaluate_loss(&self.params, val)?;
            self.completed_epochs = epoch + 1;

            let improved = self.best.as_ref().is_none_or(|b| val_loss < b.val_loss);
            if improved {
                self.best = Some(BestSnapshot {
                    epoch: self.completed_epochs,
                    val_loss,
                    params: self.params.clone(),
                });
                self.epochs_since_improve = 0;
            } else {
                self.epochs_since_improve += 1;
            }

            let metrics = EpochMetrics {
                epoch: self.completed_epochs,
                train_loss,
                val_loss,
            };
            self.history.push(metrics);

            if let Some(dir) = run_dir {
                self.write_run_dir(dir, &metrics, improved)?;
            }
            if self.epochs_since_improve >= config.patience {
                stop_reason = StopReason::EarlyStopping;
                break;
            }
        }

        let best = self.best.as_ref().expect("at least one epoch ran");
        Ok(TrainReport {
            epochs: self.history.clone(),
            best_epoch: best.epoch,
            best_val_loss: best.val_loss,
            stop_reason,
        })
    }

    fn run_epoch(
        &mut self,
        train: &[EncodedExample],
        config: &TrainConfig,
        epoch: usize,
    ) -> Result<f64> {
        let shuffle_seed = derive_seed(config.seed, &format!("epoch{epoch}"));
        let batches = make_batches(train, config.batch_token_budget, shuffle_seed)?;
        let mut loss_sum = 0.0;
        let mut token_sum = 0usize;
        for (batch_idx, batch) in batches.iter().enumerate() {
            let mut grads = GradientMap::default();
            let mut batch_loss_sum = 0.0;
            let mut batch_tokens = 0usize;
            for (row, &example_idx) in batch.example_indices.iter().enumerate() {
                let example = &train[example_idx];
                let mut tape = Tape::new();
                let bound = self.params.bind(&mut tape);
                let (mean_loss, n) = teacher_forced_loss(
                    &mut tape,
                    &bound,
                    example,
                    &batch.padded_sources[row],
                    &batch.source_masks[row],
                )?;
                // Token-sum loss so batch gradients can be token-averaged.
                let summed = tape.scale(mean_loss, n as f64);
                let value = tape.value(summed).data()[0];
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        epoch: epoch + 1,
                        batch: batch_idx + 1,
                    });
                }
                batch_loss_sum += value;
                batch_tokens += n;
                grads.accumulate(&tape.backward(summed)?);
            }
            grads.scale(1.0 / batch_tokens as f64);
            adam_step(&mut self.params, &grads, &mut self.adam, config)?;
            loss_sum += batch_loss_sum;
            token_sum += batch_tokens;
        }
        Ok(loss_sum / token_sum as f64)
    }

    fn write_run_dir(&self, dir: &Path, metrics: &EpochMetrics, improved: bool) -> Result<()> {
        let metrics_path = dir.join("metrics.jsonl");
        let line = serde_json::to_string(metrics).expect("metrics serialize");
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&metrics_path)
            .map_err(|e| Error::io(metrics_path.display().to_string(), e))?;
        writeln!(file, "{line}").map_err(|e| Error::io(metrics_path.display().to_string(), e))?;

        self.last_checkpoint().save(&dir.join("last.ckpt"))?;
        if improved {
            self.best_checkpoint().save(&dir.join("best.ckpt"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_example, Document};
    use crate::tokenizer::{TokenLevel, TokenizerModel};
    use tempfile::tempdir;

    fn toy_dataset() -> (TokenizerModel, Vec<EncodedExample>, Vec<EncodedExample>) {
        let docs: Vec<Document> = (0..8)
            .map(|i| Document {
                text: format!("метка {} сигнал {}", i % 4, (i + 1) % 4),
                title: format!("метка {}", i % 4),
            })
            .collect();
        let tokenizer = TokenizerModel::train_word(docs.iter().map(|d| d.text.clone()), 64);
        let limits = TruncationLimits::default();
        let examples: Vec<EncodedExample> = docs
            .iter()
            .map(|d| encode_example(d, &tokenizer, &limits).unwrap())
            .collect();
        let (train, val) = examples.split_at(6);
        (tokenizer, train.to_vec(), val.to_vec())
    }

    fn toy_model_config(seed: u64) -> ModelConfig {
        ModelConfig {
            token_level: TokenLevel::Word,
            vocab_size: 64,
            embedding_dim: 8,
            encoder_hidden_dim: 8,
            decoder_hidden_dim: 8,
            use_copy: true,
            bidirectional_encoder: true,
            seed,
        }
    }

    fn quick_config(max_epochs: usize, patience: usize) -> TrainConfig {
        TrainConfig {
            max_epochs,
            patience,
            batch_token_budget: 64,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_on_a_toy_corpus() {
        let (tokenizer, train, val) = toy_dataset();
        let model_config = toy_model_config(1);
        let mut trainer = Trainer::new(
            &model_config,
            crate::tokenizer::to_text(&tokenizer),
            TruncationLimits::default(),
        );
        let report = trainer
            .run(&train, &val, &quick_config(8, 8), None)
            .unwrap();
        let first = report.epochs.first().unwrap().train_loss;
        let last = report.epochs.last().unwrap().train_loss;
        assert!(last < first, "train loss did not drop: {first} -> {last}");
    }

    #[test]
    fn same_seed_gives_identical_trajectories() {
        let (tokenizer, train, val) = toy_dataset();
        let run = || {
            let mut trainer = Trainer::new(
                &toy_model_config(2),
                crate::tokenizer::to_text(&tokenizer),
                TruncationLimits::default(),
            );
            trainer.run(&train, &val, &quick_config(4, 8), None).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn patience_two_stops_after_two_non_improving_epochs() {
        let (tokenizer, train, val) = toy_dataset();
        // Absurd learning rate forces the validation loss to worsen.
        let config = TrainConfig {
            learning_rate: 2.0,
            max_epochs: 50,
            patience: 2,
            batch_token_budget: 64,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(
            &toy_model_config(3),
            crate::tokenizer::to_text(&tokenizer),
            TruncationLimits::default(),
        );
        let report = trainer.run(&train, &val, &config, None).unwrap();
        assert_eq!(report.stop_reason, StopReason::EarlyStopping);
        // Best at some epoch e, then exactly `patience` worse epochs.
        assert_eq!(report.epochs.len(), report.best_epoch + 2);
    }

    #[test]
    fn best_checkpoint_is_argmin_of_val_loss() {
        let (tokenizer, train, val) = toy_dataset();
        let mut trainer = Trainer::new(
            &toy_model_config(4),
            crate::tokenizer::to_text(&tokenizer),
            TruncationLimits::default(),
        );
        let report = trainer
            .run(&train, &val, &quick_config(6, 10), None)
            .unwrap();
        let min = report
            .epochs
            .iter()
            .map(|m| m.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_val_loss, min);
        // Frozen evaluation of the snapshot reproduces the recorded value.
        let re_eval = evaluate_loss(trainer.best_params(), &val).unwrap();
        assert!((re_eval - report.best_val_loss).abs() < 1e-12);
    }

    #[test]
    fn run_dir_contains_config_metrics_and_checkpoints() {
        let (tokenizer, train, val) = toy_dataset();
        let dir = tempdir().unwrap();
        let mut trainer = Trainer::new(
            &toy_model_config(5),
            crate::tokenizer::to_text(&tokenizer),
            TruncationLimits::default(),
        );
        trainer
            .run(&train, &val, &quick_config(2, 8), Some(dir.path()))
            .unwrap();
        let metrics = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
        assert_eq!(metrics.lines().count(), 2);
        let first: EpochMetrics = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
        assert_eq!(first.epoch, 1);
        assert!(dir.path().join("best.ckpt").exists());
        assert!(dir.path().join("last.ckpt").exists());
    }

    #[test]
    fn resume_reproduces_the_uninterrupted_trajectory() {
        let (tokenizer, train, val) = toy_dataset();
        let straight = {
            let mut trainer = Trainer::new(
                &toy_model_config(6),
                crate::tokenizer::to_text(&tokenizer),
                TruncationLimits::default(),
            );
            trainer.run(&train, &val, &quick_config(6, 10), None).unwrap()
        };
        let resumed = {
            let dir = tempdir().unwrap();
            let mut trainer = Trainer::new(
                &toy_model_config(6),
                crate::tokenizer::to_text(&tokenizer),
                TruncationLimits::default(),
            );
            trainer
                .run(&train, &val, &quick_config(3, 10), Some(dir.path()))
                .unwrap();
            let ckpt = Checkpoint::load(&dir.path().join("last.ckpt")).unwrap();
            let mut restored = Trainer::from_checkpoint(&ckpt).unwrap();
            restored.run(&train, &val, &quick_config(6, 10), None).unwrap()
        };
        assert_eq!(straight, resumed);
    }
}
