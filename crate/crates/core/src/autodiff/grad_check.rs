use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::Result;

/// Compares reverse-mode gradients against central finite differences.
///
/// `build_loss` must be deterministic: it is replayed on a fresh tape for
/// every perturbed evaluation. It receives the parameter nodes in the order
/// of `params`. Returns the worst relative error over all parameter
/// elements, with relative error `|a-b| / max(1, |a|, |b|)`.
pub fn grad_check<F>(params: &[(&str, Tensor)], eps: f64, mut build_loss: F) -> Result<f64>
where
    F: FnMut(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    assert!(eps > 0.0, "eps must be positive");

    let eval = |tensors: &[Tensor], build_loss: &mut F| -> Result<(f64, Option<Tape>, NodeId)> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = params
            .iter()
            .zip(tensors)
            .map(|((name, _), t)| tape.param(*name, t.clone()))
            .collect();
        let loss = build_loss(&mut tape, &ids)?;
        let value = tape.value(loss).data()[0];
        Ok((value, Some(tape), loss))
    };

    let base: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    let (_, tape, loss) = eval(&base, &mut build_loss)?;
    let analytic = tape.unwrap().backward(loss)?;

    let mut worst = 0.0f64;
    for (p_idx, (name, tensor)) in params.iter().enumerate() {
        let grad = analytic
            .get(name)
            .expect("backward reports every named parameter");
        for e in 0..tensor.len() {
            let mut plus = base.clone();
            plus[p_idx].data_mut()[e] += eps;
            let mut minus = base.clone();
            minus[p_idx].data_mut()[e] -= eps;
            let (f_plus, _, _) = eval(&plus, &mut build_loss)?;
            let (f_minus, _, _) = eval(&minus, &mut build_loss)?;
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = grad.data()[e];
            let err = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
