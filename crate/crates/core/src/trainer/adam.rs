use std::collections::BTreeMap;

use super::TrainConfig;
use crate::autodiff::{GradientMap, Tensor};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// First/second moment estimates per parameter plus the step counter.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: BTreeMap<String, Tensor> = params
            .iter()
            .map(|(name, t)| (name.clone(), Tensor::zeros(t.shape())))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// Bias-corrected Adam update after global-norm clipping. Gradients are
/// validated finite first; the offending parameter is named on failure.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientMap,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    for (name, grad) in grads.iter() {
        if !grad.all_finite() {
            return Err(Error::NonFiniteGradient { name: name.clone() });
        }
    }
    let norm = grads.global_norm();
    let clip_scale = if norm > config.clip_norm {
        config.clip_norm / norm
    } else {
        1.0
    };

    state.step += 1;
    let t = state.step;
    let b1 = config.adam_beta1;
    let b2 = config.adam_beta2;
    let m_corr = 1.0 - b1.powi(t as i32);
    let v_corr = 1.0 - b2.powi(t as i32);

    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let grad = grads.get(&name).expect("gradient for every parameter");
        let m = state.m.get_mut(&name).expect("moment for every parameter");
        let v = state.v.get_mut(&name).expect("moment for every parameter");
        let p = params.get_mut(&name);
        for i in 0..p.len() {
            let g = grad.data()[i] * clip_scale;
            let mi = b1 * m.data()[i] + (1.0 - b1) * g;
            let vi = b2 * v.data()[i] + (1.0 - b2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / m_corr;
            let v_hat = vi / v_corr;
            p.data_mut()[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::tokenizer::TokenLevel;

    fn tiny_params() -> ModelParams {
        ModelParams::init(&ModelConfig {
            token_level: TokenLevel::Word,
            vocab_size: 6,
            embedding_dim: 2,
            encoder_hidden_dim: 2,
            decoder_hidden_dim: 2,
            use_copy: false,
            bidirectional_encoder: false,
            seed: 1,
        })
    }

    fn zero_grads(params: &ModelParams) -> GradientMap {
        let mut g = GradientMap::default();
        for (name, t) in params.iter() {
            g.insert(name.clone(), Tensor::zeros(t.shape()));
        }
        g
    }

    #[test]
    fn zero_gradient_leaves_params_and_moments_unchanged() {
        let mut params = tiny_params();
        let before = params.clone();
        let grads = zero_grads(&params);
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, &TrainConfig::default()).unwrap();
        assert!(params.bits_eq(&before));
        assert!(state.m.values().all(|t| t.data().iter().all(|&x| x == 0.0)));
        assert!(state.v.values().all(|t| t.data().iter().all(|&x| x == 0.0)));
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_magnitude_matches_hand_evaluation() {
        // Scalar parameter, gradient 1: the bias-corrected first update is
        // lr · 1/(1 + eps) ≈ lr.
        let mut params = tiny_params();
        let before = params.get("generate.b").data()[0];
        let mut grads = zero_grads(&params);
        let mut g = Tensor::zeros(&[6]);
        g.data_mut()[0] = 1.0;
        grads.insert("generate.b".to_string(), g);
        let mut state = AdamState::new(&params);
        let config = TrainConfig::default();
        adam_step(&mut params, &grads, &mut state, &config).unwrap();
        let delta = before - params.get("generate.b").data()[0];
        assert!((delta - 0.000999999990000001).abs() < 1e-15, "delta {delta}");
    }

    #[test]
    fn global_norm_clipping_halves_oversized_gradients() {
        // Two components of norm 10 against clip 5: the effective gradient
        // is halved, which shows up as equal first moments.
        let mut params = tiny_params();
        let mut grads = zero_grads(&params);
        let mut g = Tensor::zeros(&[6]);
        g.data_mut()[0] = 6.0;
        g.data_mut()[1] = 8.0;
        grads.insert("generate.b".to_string(), g);
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, &TrainConfig::default()).unwrap();
        let m = state.m.get("generate.b").unwrap().data();
        assert!((m[0] - 0.1 * 3.0).abs() < 1e-12);
        assert!((m[1] - 0.1 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut params = tiny_params();
        let mut grads = zero_grads(&params);
        let mut g = Tensor::zeros(&[6]);
        g.data_mut()[2] = f64::NAN;
        grads.insert("generate.b".to_string(), g);
        let mut state = AdamState::new(&params);
        match adam_step(&mut params, &grads, &mut state, &TrainConfig::default()) {
            Err(Error::NonFiniteGradient { name }) => assert_eq!(name, "generate.b"),
            other => panic!("expected NonFiniteGradient, got {other:?}"),
        }
    }

    #[test]
    fn adam_step_descends_a_quadratic() {
        // loss = Σ (b - 3)^2 over generate.b; one step at lr 0.001 reduces it.
        use crate::autodiff::Tape;
        let eval = |params: &ModelParams| -> (f64, GradientMap) {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let b = bound.id("generate.b");
            let target = tape.leaf(Tensor::vector(vec![-3.0; 6]));
            let diff = tape.add(b, target).unwrap();
            let sq = tape.mul(diff, diff).unwrap();
            let loss = tape.sum(sq);
            let value = tape.value(loss).data()[0];
            (value, tape.backward(loss).unwrap())
        };
        let mut params = tiny_params();
        let mut state = AdamState::new(&params);
        let (before, grads) = eval(&params);
        adam_step(&mut params, &grads, &mut state, &TrainConfig::default()).unwrap();
        let (after, _) = eval(&params);
        assert!(after < before, "{after} !< {before}");
    }
}
