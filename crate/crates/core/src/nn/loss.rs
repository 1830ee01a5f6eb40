//! Softmax, entropy and the distillation cross-entropy.

use crate::error::{QffError, Result};

/// Offset inside the logarithm of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

/// Numerically stable softmax of one row of logits.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Shannon entropy `-sum p ln p` (natural log).
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Gradient of the entropy with respect to the logits:
/// `dH/dz_k = -pi_k (ln pi_k + H)`.
pub fn entropy_logit_grad(p: &[f64], out: &mut [f64]) {
    let h = entropy(p);
    for (o, &x) in out.iter_mut().zip(p) {
        *o = if x > 0.0 { -x * (x.ln() + h) } else { 0.0 };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Gradient of the loss with respect to the student logits, `q - p`.
    pub grad_logits: Vec<f64>,
    /// Teacher mass fell on entries where the student has (numerically) none.
    pub clamped: bool,
}

/// `C = -sum_a p(a) ln(q(a) + eps)` for student `q` and teacher `p`.
pub fn cross_entropy_loss(student: &[f64], teacher: &[f64]) -> Result<CrossEntropy> {
    if student.len() != teacher.len() {
        return Err(QffError::Shape(format!("student {} vs teacher {}", student.len(), teacher.len())));
    }
    let mut loss = 0.0;
    let mut clamped = false;
    for (&q, &p) in student.iter().zip(teacher) {
        if p > 0.0 {
            if q < LOG_EPS {
                clamped = true;
            }
            loss -= p * (q + LOG_EPS).ln();
        }
    }
    let grad_logits = student.iter().zip(teacher).map(|(q, p)| q - p).collect();
    Ok(CrossEntropy { loss, grad_logits, clamped })
}
