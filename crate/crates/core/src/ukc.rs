//! Uncertainty-aware k-means clustering.
//!
//! Prototypes and queries are clustered together with Lloyd k-means, starting
//! from one cluster per support class. Each outer round measures every cluster:
//!
//! - `δ`: prototypes inside,
//! - `μ`: queries inside,
//! - `m`: mean cluster size over all clusters (prototypes included),
//!
//! and splits it into `δ` parts when `δ ≥ 2`, into two when `μ ≥ α·m`, and
//! leaves it whole otherwise. The sub-centroids of all clusters seed the next
//! global Lloyd run. Rounds stop once no cluster holds two prototypes and every
//! cluster has fewer than `α·m` queries.

use rand::seq::index;
use rayon::prelude::*;

use crate::embedding::{squared_euclidean, EmbeddingMatrix, PrototypeSet};
use crate::error::{Error, Result};
use crate::eval::{ClusterAssignment, ClusterTag};
use crate::rng;

pub const DEFAULT_ALPHA: f64 = 1.4;
pub const DEFAULT_MAX_OUTER: usize = 50;
pub const MAX_LLOYD_ITERATIONS: usize = 300;

const PARALLEL_ASSIGN_MIN: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansState {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of every point.
    pub assignment: Vec<usize>,
    pub iterations: usize,
    /// Reached an assignment fixed point within the iteration cap.
    pub converged: bool,
}

impl KmeansState {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        self.assignment.iter().for_each(|&c| s[c] += 1);
        s
    }

    /// Point indices per cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (p, &c) in self.assignment.iter().enumerate() {
            out[c].push(p);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Centroids(Vec<Vec<f64>>),
    /// `k` distinct data points chosen by the seeded generator.
    Random {
        seed: u64,
    },
}

/// Standard Lloyd iteration until the assignment stops changing, capped at
/// [`MAX_LLOYD_ITERATIONS`]. Empty clusters are reseeded at the point farthest
/// from its own centroid.
pub fn lloyd_kmeans(points: &EmbeddingMatrix, k: usize, init: Init) -> Result<KmeansState> {
    let rows: Vec<&[f64]> = points.iter_rows().collect();
    lloyd(&rows, k, init)
}

fn lloyd(points: &[&[f64]], k: usize, init: Init) -> Result<KmeansState> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::TooManyClusters { requested: k, points: points.len() });
    }
    let mut centroids = match init {
        Init::Centroids(c) => {
            if c.len() != k {
                return Err(Error::Shape(format!("{} initial centroids for k = {k}", c.len())));
            }
            c
        }
        Init::Random { seed } => {
            let mut rng = rng::stream(seed, rng::TAG_METHOD, 0);
            let mut picks = index::sample(&mut rng, points.len(), k).into_vec();
            picks.sort_unstable();
            picks.iter().map(|&i| points[i].to_vec()).collect()
        }
    };

    let mut assignment = assign(points, &centroids);
    reseed_empty(points, &mut centroids, &mut assignment);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        centroids = means(points, &assignment, k);
        let mut next = assign(points, &centroids);
        reseed_empty(points, &mut centroids, &mut next);
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }
    Ok(KmeansState { centroids, assignment, iterations, converged })
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_euclidean(p, centroid);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
    if points.len() >= PARALLEL_ASSIGN_MIN {
        points.par_iter().map(|p| nearest(p, centroids)).collect()
    } else {
        points.iter().map(|p| nearest(p, centroids)).collect()
    }
}

fn means(points: &[&[f64]], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        sums[c].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
        counts[c] += 1;
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    sums
}

fn reseed_empty(points: &[&[f64]], centroids: &mut [Vec<f64>], assignment: &mut [usize]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    assignment.iter().for_each(|&c| counts[c] += 1);
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far: Option<(f64, usize)> = None;
        for (p, &own) in assignment.iter().enumerate() {
            if counts[own] < 2 {
                continue;
            }
            let d = squared_euclidean(points[p], &centroids[own]);
            if far.is_none_or(|(b, _)| d > b) {
                far = Some((d, p));
            }
        }
        let (_, p) = far.expect("k <= points leaves a cluster with two members");
        counts[assignment[p]] -= 1;
        assignment[p] = c;
        counts[c] = 1;
        centroids[c] = points[p].to_vec();
    }
}

/// Per-cluster split outcome of one outer round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDecision {
    pub cluster: usize,
    /// Prototypes in the cluster.
    pub delta: usize,
    /// Queries in the cluster.
    pub mu: usize,
    pub n_split: usize,
}

/// How many parts a cluster with `delta` prototypes and `mu` queries is cut into.
pub fn split_count(delta: usize, mu: usize, alpha: f64, m: f64) -> usize {
    if delta >= 2 {
        delta
    } else if mu as f64 >= alpha * m {
        2
    } else {
        1
    }
}

/// Mean cluster size (all members) over the clusters of `state`.
pub fn mean_cluster_size(state: &KmeansState) -> f64 {
    state.assignment.len() as f64 / state.k() as f64
}

pub fn split_counts(state: &KmeansState, is_prototype: &[bool], alpha: f64, m: f64) -> Vec<SplitDecision> {
    let mut delta = vec![0; state.k()];
    let mut mu = vec![0; state.k()];
    for (p, &c) in state.assignment.iter().enumerate() {
        if is_prototype[p] {
            delta[c] += 1;
        } else {
            mu[c] += 1;
        }
    }
    (0..state.k())
        .map(|c| SplitDecision {
            cluster: c,
            delta: delta[c],
            mu: mu[c],
            n_split: split_count(delta[c], mu[c], alpha, m),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkcParams {
    pub alpha: f64,
    pub seed: u64,
    pub max_outer: usize,
}

impl Default for UkcParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, seed: 0, max_outer: DEFAULT_MAX_OUTER }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UkcResult {
    pub assignment: ClusterAssignment,
    /// Final k-means state over the stacked points (prototypes first).
    pub state: KmeansState,
    pub converged: bool,
    /// Outer split rounds performed.
    pub rounds: usize,
    /// Cluster count at the start of every round, then the final count.
    pub cluster_counts: Vec<usize>,
}

/// Split cluster `members` into `parts` sub-clusters and return their centroids.
fn split_cluster(points: &[&[f64]], members: &[usize], prototypes: &[usize], parts: usize) -> Result<Vec<Vec<f64>>> {
    let sub: Vec<&[f64]> = members.iter().map(|&p| points[p]).collect();
    let seeds: Vec<Vec<f64>> = if prototypes.len() >= 2 {
        prototypes.iter().map(|&p| points[p].to_vec()).collect()
    } else {
        let mut far = (f64::NEG_INFINITY, 0, 0);
        for a in 0..sub.len() {
            for b in (a + 1)..sub.len() {
                let d = squared_euclidean(sub[a], sub[b]);
                if d > far.0 {
                    far = (d, a, b);
                }
            }
        }
        vec![sub[far.1].to_vec(), sub[far.2].to_vec()]
    };
    debug_assert_eq!(seeds.len(), parts);
    Ok(lloyd(&sub, parts, Init::Centroids(seeds))?.centroids)
}

/// Cluster `queries` around `protos`, growing the cluster count until the
/// split criteria are all satisfied or `max_outer` rounds have run.
pub fn ukc_cluster(protos: &PrototypeSet, queries: &EmbeddingMatrix, params: UkcParams) -> Result<UkcResult> {
    if protos.is_empty() {
        return Err(Error::Empty("prototype set"));
    }
    if params.alpha.is_nan() || params.alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", params.alpha)));
    }
    let stacked = protos.vectors().stack(queries)?;
    let points: Vec<&[f64]> = stacked.iter_rows().collect();
    let n_protos = protos.len();
    let is_prototype: Vec<bool> = (0..points.len()).map(|p| p < n_protos).collect();

    let mut state = lloyd(&points, n_protos, Init::Random { seed: params.seed })?;
    let mut cluster_counts = Vec::new();
    let mut rounds = 0;
    let converged = loop {
        cluster_counts.push(state.k());
        let m = mean_cluster_size(&state);
        let decisions = split_counts(&state, &is_prototype, params.alpha, m);
        if decisions.iter().all(|d| d.delta <= 1 && (d.mu as f64) < params.alpha * m) {
            break true;
        }
        if rounds == params.max_outer {
            break false;
        }
        rounds += 1;

        let members = state.members();
        let mut seeds = Vec::with_capacity(state.k() + decisions.len());
        for d in &decisions {
            let own = &members[d.cluster];
            let parts = d.n_split.min(own.len());
            if parts <= 1 {
                seeds.push(state.centroids[d.cluster].clone());
                continue;
            }
            let protos_inside: Vec<usize> = own.iter().copied().filter(|&p| is_prototype[p]).collect();
            seeds.extend(split_cluster(&points, own, &protos_inside, parts)?);
        }
        let k = seeds.len();
        state = lloyd(&points, k, Init::Centroids(seeds))?;
    };

    let members = state.members();
    let mut next_novel = 0;
    let tags: Vec<ClusterTag> = members
        .iter()
        .map(|own| match own.first() {
            Some(&p) if is_prototype[p] => ClusterTag::Known(protos.class_ids()[p]),
            _ => {
                next_novel += 1;
                ClusterTag::Novel(next_novel - 1)
            }
        })
        .collect();
    let cluster_of = state.assignment[n_protos..].to_vec();
    let assignment = ClusterAssignment::new(cluster_of, tags)?;
    Ok(UkcResult { assignment, state, converged, rounds, cluster_counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn fixed_point_takes_one_iteration() {
        let pts = m(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let s = lloyd_kmeans(&pts, 2, Init::Centroids(vec![vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert_eq!(s.assignment, vec![0, 0, 1]);
        assert_eq!(s.iterations, 1);
        assert!(s.converged);
    }

    #[test]
    fn single_cluster_centroid_is_the_mean() {
        let pts = m(&[&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5]]);
        let s = lloyd_kmeans(&pts, 1, Init::Random { seed: 3 }).unwrap();
        assert_eq!(s.assignment, vec![0, 0, 0]);
        assert_eq!(s.centroids[0], vec![0.5, 0.5]);
    }

    #[test]
    fn too_many_clusters_rejected() {
        let pts = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            lloyd_kmeans(&pts, 3, Init::Random { seed: 0 }),
            Err(Error::TooManyClusters { requested: 3, points: 2 })
        ));
    }

    #[test]
    fn empty_cluster_is_reseeded_at_the_farthest_point() {
        // Second centroid is far from everything and starts empty.
        let pts = m(&[&[0.0, 0.0], &[0.1, 0.0], &[1.0, 0.0]]);
        let s = lloyd_kmeans(&pts, 2, Init::Centroids(vec![vec![0.3, 0.0], vec![100.0, 100.0]])).unwrap();
        assert_eq!(s.sizes(), vec![2, 1]);
        assert_eq!(s.assignment, vec![0, 0, 1]);
    }

    #[test]
    fn split_rule_cases() {
        assert_eq!(split_count(3, 0, 1.4, 10.0), 3);
        assert_eq!(split_count(3, 1000, 1.4, 10.0), 3);
        // alpha * m = 20
        assert_eq!(split_count(1, 30, 2.0, 10.0), 2);
        assert_eq!(split_count(0, 10, 2.0, 10.0), 1);
        assert_eq!(split_count(1, 20, 2.0, 10.0), 2);
    }

    #[test]
    fn split_counts_tally_prototypes_and_queries() {
        let state = KmeansState {
            centroids: vec![vec![0.0, 0.0]; 2],
            assignment: vec![0, 0, 1, 1, 1, 1],
            iterations: 1,
            converged: true,
        };
        let is_proto = [true, true, false, false, false, false];
        let d = split_counts(&state, &is_proto, 1.0, mean_cluster_size(&state));
        assert_eq!(d[0], SplitDecision { cluster: 0, delta: 2, mu: 0, n_split: 2 });
        assert_eq!(d[1], SplitDecision { cluster: 1, delta: 0, mu: 4, n_split: 2 });
    }
}
