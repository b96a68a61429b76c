//! Supervised contrastive loss over a batch of unit-norm embeddings.
//!
//! ```text
//! L = Σ_i  -1/|P(i)| Σ_{q ∈ P(i)} log( exp(z_i·z_q/τ) / Σ_{n ≠ i} exp(z_i·z_n/τ) )
//! ```
//!
//! `P(i)` is every other sample sharing `i`'s label. Anchors with no positive
//! contribute nothing. The loss is a sum over anchors, not a mean.

use crate::embedding::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::ClassId;

pub const DEFAULT_TEMPERATURE: f64 = 0.07;

#[derive(Debug, Clone, PartialEq)]
pub struct SupConBatch {
    z: EmbeddingMatrix,
    labels: Vec<ClassId>,
    tau: f64,
}

impl SupConBatch {
    pub fn new(z: EmbeddingMatrix, labels: Vec<ClassId>, tau: f64) -> Result<Self> {
        if z.rows() < 2 {
            return Err(Error::InvalidParameter(format!("batch needs at least 2 samples, got {}", z.rows())));
        }
        if labels.len() != z.rows() {
            return Err(Error::Shape(format!("{} labels for {} samples", labels.len(), z.rows())));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {tau}")));
        }
        if !z.is_normalized(1e-6) {
            return Err(Error::InvalidParameter("batch rows must be unit norm".into()));
        }
        Ok(Self { z, labels, tau })
    }

    pub fn z(&self) -> &EmbeddingMatrix {
        &self.z
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Per-anchor softmax statistics over the off-diagonal logits.
struct Anchor {
    logits: Vec<f64>,
    log_denominator: f64,
    positives: usize,
}

fn anchors(z: &EmbeddingMatrix, labels: &[ClassId], tau: f64) -> Vec<Anchor> {
    let b = z.rows();
    (0..b)
        .map(|i| {
            let logits: Vec<f64> = (0..b).map(|j| dot(z.row(i), z.row(j)) / tau).collect();
            let max = (0..b).filter(|&j| j != i).map(|j| logits[j]).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = (0..b).filter(|&j| j != i).map(|j| (logits[j] - max).exp()).sum();
            let positives = (0..b).filter(|&j| j != i && labels[j] == labels[i]).count();
            Anchor { logits, log_denominator: max + sum.ln(), positives }
        })
        .collect()
}

/// Evaluate the loss; finite for any valid batch.
pub fn supcon_loss(batch: &SupConBatch) -> f64 {
    loss_of(&batch.z, &batch.labels, batch.tau)
}

fn loss_of(z: &EmbeddingMatrix, labels: &[ClassId], tau: f64) -> f64 {
    let mut total = 0.0;
    for (i, a) in anchors(z, labels, tau).iter().enumerate() {
        if a.positives == 0 {
            continue;
        }
        let mut term = 0.0;
        for (j, &l) in labels.iter().enumerate() {
            if j != i && l == labels[i] {
                term += a.log_denominator - a.logits[j];
            }
        }
        total += term / a.positives as f64;
    }
    total
}

/// Gradient of [`supcon_loss`] with respect to every coordinate of `z`,
/// treating the rows as unconstrained (no projection onto the sphere).
///
/// With `s_ij = z_i·z_j/τ` and `g_ij = ∂L/∂s_ij = p_ij - [j ∈ P(i)]/|P(i)|`
/// for anchors that have positives, the gradient is `(G + Gᵀ) Z / τ`.
pub fn supcon_grad(batch: &SupConBatch) -> Vec<Vec<f64>> {
    let z = &batch.z;
    let labels = &batch.labels;
    let b = z.rows();
    let d = z.dim();
    let mut g = vec![0.0; b * b];
    for (i, a) in anchors(z, labels, batch.tau).iter().enumerate() {
        if a.positives == 0 {
            continue;
        }
        let inv_pos = 1.0 / a.positives as f64;
        for j in 0..b {
            if j == i {
                continue;
            }
            let p = (a.logits[j] - a.log_denominator).exp();
            let target = if labels[j] == labels[i] { inv_pos } else { 0.0 };
            g[i * b + j] = p - target;
        }
    }
    let mut grad = vec![vec![0.0; d]; b];
    for (i, out) in grad.iter_mut().enumerate() {
        for j in 0..b {
            let w = (g[i * b + j] + g[j * b + i]) / batch.tau;
            if w != 0.0 {
                out.iter_mut().zip(z.row(j)).for_each(|(o, v)| *o += w * v);
            }
        }
    }
    grad
}

/// Loss at an arbitrary (not necessarily unit-norm) point, for finite
/// differencing around a batch.
pub fn supcon_loss_at(rows: &[Vec<f64>], labels: &[ClassId], tau: f64) -> Result<f64> {
    let z = EmbeddingMatrix::from_rows(rows)?;
    Ok(loss_of(&z, labels, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]], labels: &[ClassId], tau: f64) -> SupConBatch {
        let z = EmbeddingMatrix::from_rows(rows).unwrap().normalize_rows().unwrap();
        SupConBatch::new(z, labels.to_vec(), tau).unwrap()
    }

    #[test]
    fn pair_of_same_class_has_zero_loss() {
        let b = batch(&[&[1.0, 0.0, 0.0], &[0.3, 0.9, 0.1]], &[4, 4], 0.07);
        assert_eq!(supcon_loss(&b), 0.0);
    }

    #[test]
    fn all_distinct_labels_give_zero_loss_and_gradient() {
        let b = batch(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]], &[0, 1, 2], 0.5);
        assert_eq!(supcon_loss(&b), 0.0);
        assert!(supcon_grad(&b).iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn four_point_example_matches_term_by_term_evaluation() {
        let rows: [&[f64]; 4] = [&[1.0, 0.0], &[0.8, 0.6], &[0.0, 1.0], &[-0.6, 0.8]];
        let labels = [0, 0, 1, 1];
        let tau = 0.5;
        let b = batch(&rows, &labels, tau);
        // Oracle: every anchor has exactly one positive; no stabilization.
        let mut expected = 0.0;
        for i in 0..4 {
            let denom: f64 = (0..4)
                .filter(|&n| n != i)
                .map(|n| (rows[i][0] * rows[n][0] + rows[i][1] * rows[n][1]) / tau)
                .map(f64::exp)
                .sum();
            let q = if i % 2 == 0 { i + 1 } else { i - 1 };
            let num = ((rows[i][0] * rows[q][0] + rows[i][1] * rows[q][1]) / tau).exp();
            expected -= (num / denom).ln();
        }
        assert!((supcon_loss(&b) - expected).abs() < 1e-12, "{} vs {expected}", supcon_loss(&b));
    }

    #[test]
    fn rejects_bad_batches() {
        let one = EmbeddingMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(SupConBatch::new(one, vec![0], 0.1).is_err());
        let two = EmbeddingMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(SupConBatch::new(two.clone(), vec![0, 0], 0.0).is_err());
        let raw = EmbeddingMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(SupConBatch::new(raw, vec![0, 0], 0.1).is_err());
    }

    #[test]
    fn gradient_of_symmetric_pair_matches_finite_differences() {
        let b = batch(&[&[1.0, 0.2, -0.3], &[0.1, 1.0, 0.4]], &[1, 1], 0.07);
        let grad = supcon_grad(&b);
        let rows: Vec<Vec<f64>> = b.z().iter_rows().map(|r| r.to_vec()).collect();
        let h = 1e-5;
        for i in 0..2 {
            for k in 0..3 {
                let mut plus = rows.clone();
                plus[i][k] += h;
                let mut minus = rows.clone();
                minus[i][k] -= h;
                let fd = (supcon_loss_at(&plus, b.labels(), b.tau()).unwrap()
                    - supcon_loss_at(&minus, b.labels(), b.tau()).unwrap())
                    / (2.0 * h);
                assert!(grad[i][k].is_finite());
                assert!((fd - grad[i][k]).abs() < 1e-8, "{fd} vs {}", grad[i][k]);
            }
        }
    }
}
