//! Central-difference check of the analytic gradients of a batch loss.

use crate::encoder::Mode;
use crate::error::Result;
use crate::graph::Triple;
use crate::params::ParameterStore;
use crate::tokenizer::NodeHash;
use crate::train::{batch_loss_and_grad, batch_loss_frozen_weights, LossConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    /// Position in [`ParameterStore::params`] order.
    pub tensor: usize,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)`, or the absolute
    /// difference when both norms are below `1e-12`.
    pub rel_err: f64,
}

/// Compares every parameter's analytic gradient with
/// `(L(x + h) - L(x - h)) / 2h`, using eval mode (no dropout). The
/// self-adversarial weights of NSSAL stay at their values for `store`, as in
/// training.
pub fn check_gradients(
    store: &ParameterStore<f64>,
    hashes: &[NodeHash],
    positives: &[Triple],
    negatives: &[Triple],
    loss: &LossConfig,
    h: f64,
) -> Result<Vec<TensorCheck>> {
    let mut analytic = store.clone();
    analytic.zero_grad();
    let mut rng = crate::seed::rng(0);
    batch_loss_and_grad(&mut analytic, hashes, positives, negatives, loss, Mode::Eval, &mut rng)?;

    let mut probe = store.clone();
    let count = store.params().len();
    let mut out = Vec::with_capacity(count);
    for tensor in 0..count {
        let len = store.params()[tensor].value.len();
        let mut numeric = vec![0.0; len];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let base = probe.params()[tensor].value[i];
            probe.params_mut()[tensor].value[i] = base + h;
            let plus = batch_loss_frozen_weights(&probe, store, hashes, positives, negatives, loss)?;
            probe.params_mut()[tensor].value[i] = base - h;
            let minus = batch_loss_frozen_weights(&probe, store, hashes, positives, negatives, loss)?;
            probe.params_mut()[tensor].value[i] = base;
            *slot = (plus - minus) / (2.0 * h);
        }
        let grad = &analytic.params()[tensor].grad;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let (a, n, d) = (norm(grad), norm(&numeric), norm(&diff));
        let scale = a.max(n);
        out.push(TensorCheck {
            tensor,
            analytic_norm: a,
            numeric_norm: n,
            rel_err: if scale < 1e-12 { d } else { d / scale },
        });
    }
    Ok(out)
}
