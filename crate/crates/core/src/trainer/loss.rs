use crate::autodiff::{NodeId, Tape};
use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::model::{decoder_step, encode_source, initial_state, BoundParams, ModelParams};
use crate::tokenizer::PAD_ID;

/// Mean negative log likelihood over target positions:
/// `-(1/T) Σ ln p_t(y_t)`, with probabilities floored at 1e-12 before the
/// log. PAD targets are excluded from both the sum and T.
pub fn nll_loss(tape: &mut Tape, step_dists: &[NodeId], target_ids: &[u32]) -> Result<NodeId> {
    if step_dists.len() != target_ids.len() {
        return Err(Error::ShapeMismatch {
            op: "nll_loss",
            left: vec![step_dists.len()],
            right: vec![target_ids.len()],
        });
    }
    let mut picked = Vec::new();
    for (&dist, &target) in step_dists.iter().zip(target_ids) {
        if target == PAD_ID {
            continue;
        }
        let support = tape.value(dist).len();
        if target as usize >= support {
            return Err(Error::TargetOutOfSupport {
                id: target,
                support,
            });
        }
        picked.push(tape.gather(dist, &[target as usize])?);
    }
    if picked.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let joined = tape.concat(&picked)?;
    let clamped = tape.clamp_min(joined, 1e-12);
    let logs = tape.log(clamped);
    let total = tape.sum(logs);
    Ok(tape.scale(total, -1.0 / picked.len() as f64))
}

/// Builds the teacher-forced forward pass for one example and returns
/// `(loss node, number of scored target tokens)`. The decoder consumes gold
/// extended ids (shifted by one) and is scored against the next gold id.
pub fn teacher_forced_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    example: &EncodedExample,
    padded_source: &[u32],
    source_mask: &[f64],
) -> Result<(NodeId, usize)> {
    let enc = encode_source(tape, bound, padded_source, source_mask)?;
    let mut state = initial_state(tape, bound, &enc);
    let targets = &example.extended_target_ids;
    let mut dists = Vec::with_capacity(targets.len() - 1);
    for &prev in &targets[..targets.len() - 1] {
        let (next_state, dist) = decoder_step(tape, bound, &state, prev, &enc, example)?;
        state = next_state;
        dists.push(dist);
    }
    let loss = nll_loss(tape, &dists, &targets[1..])?;
    Ok((loss, targets.len() - 1))
}

/// Token-mean NLL over a set of examples with frozen parameters. No padding
/// is involved, so the value is independent of any batch grouping.
pub fn evaluate_loss(params: &ModelParams, examples: &[EncodedExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for example in examples {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let mask = vec![1.0; example.source_ids.len()];
        let (loss, n) =
            teacher_forced_loss(&mut tape, &bound, example, &example.source_ids, &mask)?;
        total += tape.value(loss).data()[0] * n as f64;
        tokens += n;
    }
    Ok(total / tokens as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::model::ModelConfig;
    use crate::tokenizer::{TokenLevel, BOS_ID, EOS_ID};

    fn uniform_dist(tape: &mut Tape, n: usize) -> NodeId {
        tape.leaf(Tensor::vector(vec![1.0 / n as f64; n]))
    }

    #[test]
    fn uniform_distribution_loss_is_log_vocab() {
        let mut tape = Tape::new();
        let dists = [uniform_dist(&mut tape, 4), uniform_dist(&mut tape, 4)];
        let loss = nll_loss(&mut tape, &dists, &[2, 3]).unwrap();
        let expected = 1.3862943611198906; // ln 4
        assert!((tape.value(loss).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn certain_prediction_has_zero_loss() {
        let mut tape = Tape::new();
        let d1 = tape.leaf(Tensor::vector(vec![0.0, 1.0, 0.0]));
        let d2 = tape.leaf(Tensor::vector(vec![0.0, 0.0, 1.0]));
        let loss = nll_loss(&mut tape, &[d1, d2], &[1, 2]).unwrap();
        assert_eq!(tape.value(loss).data()[0], 0.0);
    }

    #[test]
    fn two_step_half_quarter_reference_value() {
        // p = (0.5, 0.25) -> (ln 2 + ln 4) / 2, evaluated independently.
        let mut tape = Tape::new();
        let d1 = tape.leaf(Tensor::vector(vec![0.5, 0.5]));
        let d2 = tape.leaf(Tensor::vector(vec![0.75, 0.25]));
        let loss = nll_loss(&mut tape, &[d1, d2], &[1, 1]).unwrap();
        assert!((tape.value(loss).data()[0] - 1.0397207708399179).abs() < 1e-12);
    }

    #[test]
    fn all_pad_targets_fail() {
        let mut tape = Tape::new();
        let d = uniform_dist(&mut tape, 3);
        assert!(matches!(
            nll_loss(&mut tape, &[d], &[PAD_ID]),
            Err(Error::EmptyTarget)
        ));
    }

    #[test]
    fn pad_targets_are_excluded() {
        let mut tape = Tape::new();
        let d1 = tape.leaf(Tensor::vector(vec![0.5, 0.5]));
        let d2 = tape.leaf(Tensor::vector(vec![0.9, 0.1]));
        // Second step is padding: loss is -ln 0.5 over one token.
        let loss = nll_loss(&mut tape, &[d1, d2], &[1, PAD_ID]).unwrap();
        assert!((tape.value(loss).data()[0] - 0.5f64.ln().abs()).abs() < 1e-12);
    }

    #[test]
    fn target_outside_support_fails() {
        let mut tape = Tape::new();
        let d = uniform_dist(&mut tape, 3);
        assert!(matches!(
            nll_loss(&mut tape, &[d], &[3]),
            Err(Error::TargetOutOfSupport { id: 3, support: 3 })
        ));
    }

    #[test]
    fn floored_probability_keeps_loss_finite() {
        let mut tape = Tape::new();
        let d = tape.leaf(Tensor::vector(vec![1.0, 0.0]));
        let loss = nll_loss(&mut tape, &[d], &[1]).unwrap();
        let v = tape.value(loss).data()[0];
        assert!(v.is_finite());
        assert!((v - (-(1e-12f64).ln())).abs() < 1e-6);
    }

    #[test]
    fn evaluate_loss_is_order_invariant() {
        let config = ModelConfig {
            token_level: TokenLevel::Word,
            vocab_size: 10,
            embedding_dim: 4,
            encoder_hidden_dim: 3,
            decoder_hidden_dim: 4,
            use_copy: true,
            bidirectional_encoder: true,
            seed: 3,
        };
        let params = ModelParams::init(&config);
        let make = |ids: Vec<u32>, tgt: Vec<u32>| EncodedExample {
            source_tokens: ids.iter().map(|i| format!("t{i}")).collect(),
            source_ids: ids,
            extended_target_ids: tgt.clone(),
            target_ids: tgt,
            oov_map: vec![],
            vocab_size: 10,
        };
        let a = make(vec![4, 5, 6], vec![BOS_ID, 5, EOS_ID]);
        let b = make(vec![7, 8], vec![BOS_ID, 8, 9, EOS_ID]);
        let c = make(vec![9], vec![BOS_ID, 4, EOS_ID]);
        let fwd = evaluate_loss(&params, &[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = evaluate_loss(&params, &[c, b, a]).unwrap();
        assert!((fwd - rev).abs() < 1e-12);
    }
}
