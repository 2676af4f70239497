//! Negative-sampling loss for one (center, context) example.

use num_traits::Float;

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus<F: Float>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Loss and gradients of one skip-gram example.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient<F> {
    pub loss: F,
    /// d loss / d center input vector
    pub center: Vec<F>,
    /// d loss / d context output vector
    pub context: Vec<F>,
    /// d loss / d output vector of each negative, in input order
    pub negatives: Vec<Vec<F>>,
}

/// `loss = -ln σ(ctx·c) - Σ_n ln σ(-neg_n·c)` and its gradients.
pub fn loss_and_grad<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> PairGradient<F> {
    let pos = dot(context, center);
    let pos_coef = sigmoid(pos) - F::one();
    let mut loss = softplus(-pos);

    let mut grad_center: Vec<F> = context.iter().map(|&x| pos_coef * x).collect();
    let grad_context: Vec<F> = center.iter().map(|&x| pos_coef * x).collect();

    let grad_negatives = negatives
        .iter()
        .map(|neg| {
            let score = dot(neg, center);
            loss = loss + softplus(score);
            let coef = sigmoid(score);
            for (g, &x) in grad_center.iter_mut().zip(neg.iter()) {
                *g = *g + coef * x;
            }
            center.iter().map(|&x| coef * x).collect()
        })
        .collect();

    PairGradient {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negatives,
    }
}

/// One SGD step against a single output row, word2vec style: the output row
/// is updated in place and `-lr * dloss/dhidden` is accumulated into
/// `hidden_update`. `label` is 1 for the observed context, 0 for a negative.
/// Returns this target's share of the loss.
pub fn step_target(
    hidden: &[f32],
    output_row: &mut [f32],
    label: bool,
    lr: f32,
    hidden_update: &mut [f32],
) -> f32 {
    let score = dot(hidden, output_row);
    let target = if label { 1.0 } else { 0.0 };
    let g = (target - sigmoid(score)) * lr;
    for ((u, o), &h) in hidden_update.iter_mut().zip(output_row.iter_mut()).zip(hidden) {
        *u += g * *o;
        *o += g * h;
    }
    if label {
        softplus(-score)
    } else {
        softplus(score)
    }
}
