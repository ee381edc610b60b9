//! Losses over raw triple scores, with analytic gradients.

use crate::params::Real;

/// Loss value and its gradient with respect to each input score.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<F> {
    pub loss: F,
    pub d_pos: Vec<F>,
    pub d_neg: Vec<F>,
}

/// `log(sigmoid(x))` without overflow.
#[inline]
pub fn log_sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Self-adversarial negative-sampling loss for a single positive:
///
/// ```text
/// L = -log sigmoid(margin + s_pos) - sum_i p_i log sigmoid(-s_i - margin)
/// p  = softmax(temperature * s_neg)
/// ```
///
/// The weights `p` are treated as constants when differentiating.
pub fn nssal_loss<F: Real>(pos: F, neg: &[F], margin: F, temperature: F) -> LossGrad<F> {
    nssal_loss_weighted_by(pos, neg, neg, margin, temperature)
}

/// [`nssal_loss`] with the softmax weights taken from `weight_scores`
/// instead of `neg`. Holding `weight_scores` fixed makes the loss exactly
/// the function whose gradient [`nssal_loss`] reports.
pub fn nssal_loss_weighted_by<F: Real>(
    pos: F,
    neg: &[F],
    weight_scores: &[F],
    margin: F,
    temperature: F,
) -> LossGrad<F> {
    assert!(!neg.is_empty(), "at least one negative score is required");
    assert_eq!(neg.len(), weight_scores.len(), "one weight score per negative");
    let logits: Vec<F> = weight_scores.iter().map(|&s| temperature * s).collect();
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exp: Vec<F> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: F = exp.iter().copied().sum();

    let mut loss = -log_sigmoid(margin + pos);
    let d_pos = -sigmoid(-margin - pos);
    let mut d_neg = Vec::with_capacity(neg.len());
    for (i, &s) in neg.iter().enumerate() {
        let p = exp[i] / z;
        loss -= p * log_sigmoid(-s - margin);
        d_neg.push(p * sigmoid(s + margin));
    }
    LossGrad {
        loss,
        d_pos: vec![d_pos],
        d_neg,
    }
}

/// Mean binary cross-entropy of `sigmoid(score)` against smoothed targets:
/// `1 - eps` for positives and `eps` for negatives.
pub fn bce_loss_smoothed<F: Real>(pos: &[F], neg: &[F], eps: F) -> LossGrad<F> {
    let n = pos.len() + neg.len();
    assert!(n > 0, "at least one score is required");
    let inv_n = F::one() / F::lit(n as f64);
    let mut loss = F::zero();
    // BCE(s, y) = -y log sig(s) - (1 - y) log sig(-s); d/ds = sig(s) - y.
    let mut term = |s: F, y: F| -> F {
        loss -= y * log_sigmoid(s) + (F::one() - y) * log_sigmoid(-s);
        (sigmoid(s) - y) * inv_n
    };
    let pos_target = F::one() - eps;
    let d_pos: Vec<F> = pos.iter().map(|&s| term(s, pos_target)).collect();
    let d_neg: Vec<F> = neg.iter().map(|&s| term(s, eps)).collect();
    LossGrad {
        loss: loss * inv_n,
        d_pos,
        d_neg,
    }
}
