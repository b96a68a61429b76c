use rand::Rng;
use rand_distr::StandardNormal;

use super::LabeledEmbeddings;
use crate::embedding::{renormalize, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, TAG_OUTLIER, TAG_SYNTH};
use crate::ClassId;

fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if renormalize(&mut v).is_some() {
            return v;
        }
    }
}

/// Unit-sphere mixture: class means uniform on the sphere, samples are
/// `mean + noise_sigma * N(0, I)` projected back onto the sphere.
///
/// Rows are grouped by class; labels run `0..classes`.
pub fn generate_synthetic(
    classes: usize,
    per_class: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledEmbeddings> {
    if classes < 2 || dim < 3 || per_class == 0 {
        return Err(Error::InvalidParameter(format!(
            "need classes >= 2, dim >= 3, per_class >= 1 (got {classes}, {dim}, {per_class})"
        )));
    }
    if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_sigma must be positive, got {noise_sigma}")));
    }
    let mut values = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        // One stream per class so changing `classes` keeps earlier classes intact.
        let mut rng = rng::stream(seed, TAG_SYNTH, class as u64);
        let mean = random_direction(&mut rng, dim);
        for _ in 0..per_class {
            let mut x: Vec<f64> = mean.iter().map(|m| m + noise_sigma * rng.sample::<f64, _>(StandardNormal)).collect();
            if renormalize(&mut x).is_none() {
                x = mean.clone();
            }
            values.extend(x);
            labels.push(class as ClassId);
        }
    }
    LabeledEmbeddings::new(EmbeddingMatrix::new(labels.len(), dim, values)?, labels)
}

/// Append `count` uniformly random unit vectors, each labeled with a class
/// drawn uniformly from `label_pool`.
pub fn inject_outliers(
    data: &LabeledEmbeddings,
    count: usize,
    label_pool: &[ClassId],
    seed: u64,
) -> Result<LabeledEmbeddings> {
    if label_pool.is_empty() && count > 0 {
        return Err(Error::Empty("outlier label pool"));
    }
    let dim = data.embeddings.dim();
    let mut rng = rng::stream(seed, TAG_OUTLIER, 0);
    let mut values = data.embeddings.values().to_vec();
    let mut labels = data.labels.clone();
    for _ in 0..count {
        values.extend(random_direction(&mut rng, dim));
        labels.push(label_pool[rng.random_range(0..label_pool.len())]);
    }
    LabeledEmbeddings::new(EmbeddingMatrix::new(labels.len(), dim, values)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{class_prototypes, dot, Metric};

    #[test]
    fn shape_and_norms() {
        let data = generate_synthetic(5, 10, 16, 0.1, 1).unwrap();
        assert_eq!(data.len(), 50);
        assert_eq!(data.embeddings.dim(), 16);
        assert_eq!(data.classes().len(), 5);
        assert!(data.embeddings.is_normalized(1e-12));
    }

    #[test]
    fn same_seed_same_bits() {
        let a = generate_synthetic(4, 6, 8, 0.2, 99).unwrap();
        let b = generate_synthetic(4, 6, 8, 0.2, 99).unwrap();
        let c = generate_synthetic(4, 6, 8, 0.2, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn within_class_similarity_exceeds_cross_class() {
        let data = generate_synthetic(5, 10, 16, 0.05, 3).unwrap();
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for i in 0..data.len() {
            for j in (i + 1)..data.len() {
                let s = dot(data.embeddings.row(i), data.embeddings.row(j));
                if data.labels[i] == data.labels[j] {
                    within += s;
                    nw += 1;
                } else {
                    cross += s;
                    nc += 1;
                }
            }
        }
        assert!(within / nw as f64 > cross / nc as f64);
    }

    #[test]
    fn prototype_of_noisy_shots_is_near_the_class_direction() {
        // Class direction recovered as the prototype of many samples.
        let data = generate_synthetic(2, 2000, 32, 0.05, 11).unwrap();
        let all = class_prototypes(&data).unwrap();
        let shots: Vec<usize> = (0..5).collect();
        let five = class_prototypes(&data.select(&shots)).unwrap();
        let d = Metric::Cosine.distance(five.vectors().row(0), all.vectors().row(0));
        assert!(d < 0.05, "distance {d}");
    }

    #[test]
    fn outliers_are_appended_with_pool_labels() {
        let data = generate_synthetic(3, 4, 8, 0.1, 5).unwrap();
        let noisy = inject_outliers(&data, 5, &[1, 2], 7).unwrap();
        assert_eq!(noisy.len(), 17);
        assert!(noisy.labels[12..].iter().all(|l| [1, 2].contains(l)));
        assert!(noisy.embeddings.is_normalized(1e-12));
    }
}
