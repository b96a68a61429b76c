//! Two-step clustering for large query sets: run SHC on a uniform subsample,
//! then send every other query to the nearest discovered cluster centroid.

use rand::seq::index;
use rayon::prelude::*;

use crate::embedding::{renormalize, EmbeddingMatrix, Metric, PrototypeSet};
use crate::error::{Error, Result};
use crate::eval::ClusterAssignment;
use crate::rng::{self, TAG_SUBSAMPLE};
use crate::shc::{shc_cluster, ShcParams, ShcResult, DEFAULT_THRESHOLD};

pub const DEFAULT_SUBSAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalableConfig {
    pub subsample_size: usize,
    pub threshold: usize,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for ScalableConfig {
    fn default() -> Self {
        Self { subsample_size: DEFAULT_SUBSAMPLE, threshold: DEFAULT_THRESHOLD, seed: 0, metric: Metric::Cosine }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalableResult {
    pub assignment: ClusterAssignment,
    /// Query indices that went through SHC, ascending.
    pub subsample: Vec<usize>,
    /// SHC output with query indices relative to `subsample`.
    pub shc: ShcResult,
    /// Unit-norm mean of each cluster's subsample members.
    pub centroids: Vec<Vec<f64>>,
}

/// Uniform subsample of `0..n` without replacement, sorted.
pub fn draw_subsample(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut picks = index::sample(&mut rng::stream(seed, TAG_SUBSAMPLE, 0), n, size).into_vec();
    picks.sort_unstable();
    picks
}

pub fn scalable_shc(protos: &PrototypeSet, queries: &EmbeddingMatrix, cfg: ScalableConfig) -> Result<ScalableResult> {
    if cfg.subsample_size == 0 {
        return Err(Error::InvalidParameter("subsample size must be at least 1".into()));
    }
    if cfg.subsample_size > queries.rows() {
        return Err(Error::SubsampleTooLarge { subsample: cfg.subsample_size, queries: queries.rows() });
    }
    let subsample = if cfg.subsample_size == queries.rows() {
        (0..queries.rows()).collect()
    } else {
        draw_subsample(queries.rows(), cfg.subsample_size, cfg.seed)
    };
    let params = ShcParams { threshold: cfg.threshold, metric: cfg.metric };
    let shc = shc_cluster(protos, &queries.select(&subsample), params)?;

    let centroids: Vec<Vec<f64>> = shc
        .clusters
        .iter()
        .map(|c| {
            let mut sum = vec![0.0; queries.dim()];
            let rows = c.queries.iter().map(|&q| queries.row(subsample[q]));
            let rows = rows.chain(c.prototype.map(|p| protos.vectors().row(p)));
            for row in rows {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            // A cancelling sum falls back to the prototype or first member.
            if renormalize(&mut sum).is_none() {
                let fallback = match c.prototype {
                    Some(p) => protos.vectors().row(p),
                    None => queries.row(subsample[c.queries[0]]),
                };
                sum.copy_from_slice(fallback);
            }
            sum
        })
        .collect();

    let mut cluster_of = vec![usize::MAX; queries.rows()];
    for (ci, c) in shc.clusters.iter().enumerate() {
        for &q in &c.queries {
            cluster_of[subsample[q]] = ci;
        }
    }
    let nearest: Vec<(usize, usize)> = (0..queries.rows())
        .into_par_iter()
        .filter(|&q| cluster_of[q] == usize::MAX)
        .map(|q| {
            let row = queries.row(q);
            let mut best = (f64::INFINITY, 0);
            for (ci, centroid) in centroids.iter().enumerate() {
                let d = cfg.metric.distance(row, centroid);
                if d < best.0 {
                    best = (d, ci);
                }
            }
            (q, best.1)
        })
        .collect();
    for (q, ci) in nearest {
        cluster_of[q] = ci;
    }
    let assignment = ClusterAssignment::new(cluster_of, shc.clusters.iter().map(|c| c.tag).collect())?;
    Ok(ScalableResult { assignment, subsample, shc, centroids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::embedding::class_prototypes;

    #[test]
    fn full_subsample_reproduces_plain_shc() {
        let data = generate_synthetic(4, 20, 16, 0.05, 11).unwrap();
        let support: Vec<usize> = (0..3).chain(20..23).collect();
        let query: Vec<usize> = (0..80).filter(|i| !support.contains(i)).collect();
        let protos = class_prototypes(&data.select(&support)).unwrap();
        let q = data.embeddings.select(&query);
        let cfg = ScalableConfig { subsample_size: q.rows(), ..Default::default() };
        let scaled = scalable_shc(&protos, &q, cfg).unwrap();
        let plain = shc_cluster(&protos, &q, ShcParams::default()).unwrap();
        assert_eq!(scaled.assignment, plain.assignment());
    }

    #[test]
    fn oversized_subsample_is_rejected() {
        let protos = PrototypeSet::new(vec![0], EmbeddingMatrix::from_rows(&[[1.0, 0.0]]).unwrap()).unwrap();
        let q = EmbeddingMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let cfg = ScalableConfig { subsample_size: 2, ..Default::default() };
        assert!(matches!(scalable_shc(&protos, &q, cfg), Err(Error::SubsampleTooLarge { subsample: 2, queries: 1 })));
    }

    #[test]
    fn subsample_is_sorted_distinct_and_seeded() {
        let a = draw_subsample(100, 30, 4);
        assert_eq!(a, draw_subsample(100, 30, 4));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, draw_subsample(100, 30, 5));
    }
}
