use super::forward::{sigmoid, ForwardTrace, PROB_EPS};
use crate::error::{Error, Result};

fn check_labels(trace: &ForwardTrace, labels: &[f64]) -> Result<()> {
    if labels.len() != trace.len() {
        return Err(Error::Dimension {
            expected: trace.len(),
            got: labels.len(),
        });
    }
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("label {y} is not 0 or 1")));
    }
    Ok(())
}

/// Mean per-step binary cross-entropy with probabilities clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn loss(trace: &ForwardTrace, labels: &[f64]) -> Result<f64> {
    check_labels(trace, labels)?;
    let total: f64 = trace
        .logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            // 1 - p computed as sigmoid(-z) to keep precision near 1
            let p = sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS);
            let q = sigmoid(-z).clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y * p.ln() + (1.0 - y) * q.ln())
        })
        .sum();
    Ok(total / trace.len() as f64)
}

/// d loss / d z_t for every step. Zero where the probability is clamped.
pub fn loss_logit_grads(trace: &ForwardTrace, labels: &[f64]) -> Result<Vec<f64>> {
    check_labels(trace, labels)?;
    let n = trace.len() as f64;
    Ok(trace
        .logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let p = sigmoid(z);
            if p <= PROB_EPS || p >= 1.0 - PROB_EPS {
                0.0
            } else {
                (p - y) / n
            }
        })
        .collect())
}
