use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::corpus::EncodedExample;
use crate::error::Result;
use crate::model::{
    decoder_step, encode_source, initial_state, BoundParams, DecoderState, EncoderOutput,
    ModelParams,
};
use crate::tokenizer::{BOS_ID, EOS_ID};

/// Beam-search settings. `length_normalization_alpha` of 0 ranks finished
/// hypotheses by raw cumulative log probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub width: usize,
    pub max_target_length: usize,
    pub length_normalization_alpha: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            width: 10,
            max_target_length: 24,
            length_normalization_alpha: 0.0,
        }
    }
}

/// Anything that can extend a token sequence with a next-token distribution.
/// The model implements this; tests drive the search with hand-built tables.
pub trait SequenceScorer {
    type State: Clone;

    fn initial(&mut self) -> Result<Self::State>;

    /// Distribution over the full outcome support given the previous token.
    fn step(&mut self, state: &Self::State, prev_token: u32) -> Result<(Self::State, Vec<f64>)>;
}

/// A (possibly finished) candidate output sequence.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// Generated tokens, BOS excluded; a trailing EOS marks it finished.
    pub tokens: Vec<u32>,
    /// Sum of ln p over the tokens.
    pub log_prob: f64,
}

impl Hypothesis {
    pub fn finished(&self) -> bool {
        self.tokens.last() == Some(&EOS_ID)
    }

    fn body_len(&self) -> usize {
        self.tokens.len() - usize::from(self.finished())
    }
}

struct LiveHyp<S> {
    tokens: Vec<u32>,
    log_prob: f64,
    state: S,
}

fn ranked_score(hyp: &Hypothesis, alpha: f64) -> f64 {
    if alpha > 0.0 {
        hyp.log_prob / (hyp.tokens.len() as f64).powf(alpha)
    } else {
        hyp.log_prob
    }
}

/// Ties break toward shorter, then id-lexicographically smaller sequences.
fn better(a: &Hypothesis, b: &Hypothesis, alpha: f64) -> std::cmp::Ordering {
    ranked_score(b, alpha)
        .partial_cmp(&ranked_score(a, alpha))
        .unwrap()
        .then_with(|| a.tokens.len().cmp(&b.tokens.len()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Standard beam search: each live hypothesis expands with its top-`width`
/// next tokens, the global top-`width` candidates by cumulative log
/// probability survive, finished hypotheses retire to a pool, and the search
/// stops once `width` hypotheses have finished or everything hit the length
/// cap. Deterministic for a deterministic scorer.
pub fn beam_search<S: SequenceScorer>(
    scorer: &mut S,
    config: &BeamConfig,
) -> Result<Hypothesis> {
    assert!(config.width >= 1, "beam width must be at least 1");
    assert!(config.max_target_length >= 1, "length cap must be positive");

    let mut live = vec![LiveHyp {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: scorer.initial()?,
    }];
    let mut pool: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() && pool.len() < config.width {
        let mut candidates: Vec<LiveHyp<S::State>> = Vec::new();
        for hyp in &live {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS_ID);
            let (state, probs) = scorer.step(&hyp.state, prev)?;
            let mut ranked: Vec<(usize, f64)> = probs
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, p)| p > 0.0)
                .collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            for &(token, p) in ranked.iter().take(config.width) {
                let mut tokens = hyp.tokens.clone();
                tokens.push(token as u32);
                candidates.push(LiveHyp {
                    tokens,
                    log_prob: hyp.log_prob + p.ln(),
                    state: state.clone(),
                });
            }
        }
        candidates.sort_by(|a, b| {
            b.log_prob
                .partial_cmp(&a.log_prob)
                .unwrap()
                .then_with(|| a.tokens.len().cmp(&b.tokens.len()))
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
        candidates.truncate(config.width);

        live = Vec::new();
        for cand in candidates {
            let done = Hypothesis {
                tokens: cand.tokens.clone(),
                log_prob: cand.log_prob,
            };
            if done.finished() || done.body_len() >= config.max_target_length {
                pool.push(done);
            } else {
                live.push(cand);
            }
        }
    }
    for hyp in live {
        pool.push(Hypothesis {
            tokens: hyp.tokens,
            log_prob: hyp.log_prob,
        });
    }

    pool.sort_by(|a, b| better(a, b, config.length_normalization_alpha));
    Ok(pool.into_iter().next().expect("at least one hypothesis"))
}

/// Argmax decoding (ties toward the lowest id); equals beam width 1.
pub fn greedy_decode<S: SequenceScorer>(scorer: &mut S, max_len: usize) -> Result<Hypothesis> {
    let mut state = scorer.initial()?;
    let mut tokens: Vec<u32> = Vec::new();
    let mut log_prob = 0.0;
    for _ in 0..max_len {
        let prev = tokens.last().copied().unwrap_or(BOS_ID);
        let (next, probs) = scorer.step(&state, prev)?;
        state = next;
        let (token, p) = probs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| b.0.cmp(&a.0)))
            .expect("distribution has positive mass");
        tokens.push(token as u32);
        log_prob += p.ln();
        if token as u32 == EOS_ID {
            break;
        }
    }
    Ok(Hypothesis { tokens, log_prob })
}

/// Adapts a trained model to [`SequenceScorer`] for one encoded source.
pub struct ModelScorer<'a> {
    tape: Tape,
    bound: BoundParams,
    enc: EncoderOutput,
    example: &'a EncodedExample,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &ModelParams, example: &'a EncodedExample) -> Result<Self> {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let mask = vec![1.0; example.source_ids.len()];
        let enc = encode_source(&mut tape, &bound, &example.source_ids, &mask)?;
        Ok(Self {
            tape,
            bound,
            enc,
            example,
        })
    }
}

impl SequenceScorer for ModelScorer<'_> {
    type State = DecoderState;

    fn initial(&mut self) -> Result<DecoderState> {
        Ok(initial_state(&mut self.tape, &self.bound, &self.enc))
    }

    fn step(&mut self, state: &DecoderState, prev_token: u32) -> Result<(DecoderState, Vec<f64>)> {
        let (next, dist) = decoder_step(
            &mut self.tape,
            &self.bound,
            state,
            prev_token,
            &self.enc,
            self.example,
        )?;
        let probs = self.tape.value(dist).data().to_vec();
        Ok((next, probs))
    }
}
