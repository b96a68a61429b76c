//! Semi-supervised hierarchical clustering.
//!
//! Prototypes and queries start as singletons and are merged bottom-up under
//! average linkage. Agglomeration halts as soon as the globally closest pair
//! consists of two clusters that each already hold a prototype. The surviving
//! clusters are then split by size: those with more than `threshold` members
//! (prototypes included) are *potential* clusters, the rest are *remainders*.
//! A remainder holding a prototype is promoted to potential; every other
//! remainder is attached whole to the potential cluster with the smallest
//! average linkage. Potential clusters without a prototype become novel
//! classes.
//!
//! Indices into the stacked point set put the `p` prototypes first, then the
//! queries; a query's stacked index is `p + query_index`.

use crate::embedding::{pairwise_distance, DistanceMatrix, EmbeddingMatrix, Metric, PrototypeSet};
use crate::error::{Error, Result};
use crate::eval::{ClusterAssignment, ClusterTag};
use crate::ClassId;

pub const DEFAULT_THRESHOLD: usize = 2;

/// Average linkage between two disjoint member sets.
pub fn upgma_distance(a: &[usize], b: &[usize], d: &DistanceMatrix) -> f64 {
    let mut sum = 0.0;
    for &x in a {
        for &y in b {
            sum += d.get(x, y);
        }
    }
    sum / (a.len() * b.len()) as f64
}

/// Linkage from `C_i ∪ C_j` to `C_k`, given the linkages of the parts.
#[inline]
pub fn upgma_update(d_ik: f64, d_jk: f64, size_i: usize, size_j: usize) -> f64 {
    (size_i as f64 * d_ik + size_j as f64 * d_jk) / (size_i + size_j) as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveCluster {
    /// Stacked indices, ascending.
    pub members: Vec<usize>,
    /// Support classes of the prototypes inside.
    pub prototype_classes: Vec<ClassId>,
}

impl ActiveCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn has_prototype(&self) -> bool {
        !self.prototype_classes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Slot that now holds the union (the smaller index).
    pub kept: usize,
    pub absorbed: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Merged(Merge),
    /// The closest pair would join two prototype-bearing clusters.
    PrototypeCollision {
        i: usize,
        j: usize,
        distance: f64,
    },
    /// Fewer than two clusters remain.
    Exhausted,
}

/// Incremental average-linkage agglomeration with the prototype stopping rule.
///
/// Slot `i` starts as the singleton `{i}`; a merge keeps the lower slot, so a
/// slot index is always the smallest member of its cluster.
#[derive(Debug, Clone)]
pub struct Agglomeration {
    distances: DistanceMatrix,
    n: usize,
    linkage: Vec<f64>,
    clusters: Vec<Option<ActiveCluster>>,
    /// Per active slot `i`: closest active slot `j > i` (smallest `j` on ties).
    nearest: Vec<Option<(f64, usize)>>,
    merges: Vec<Merge>,
    stop: Option<Step>,
}

impl Agglomeration {
    /// `prototype_classes[i]` is the class of stacked point `i`; the remaining
    /// points of `distances` are queries.
    pub fn new(distances: DistanceMatrix, prototype_classes: &[ClassId]) -> Self {
        let n = distances.len();
        assert!(prototype_classes.len() <= n, "more prototypes than points");
        let mut linkage = Vec::with_capacity(n * n);
        for i in 0..n {
            linkage.extend_from_slice(distances.row(i));
        }
        let clusters = (0..n)
            .map(|i| {
                Some(ActiveCluster {
                    members: vec![i],
                    prototype_classes: prototype_classes.get(i).map(|&c| vec![c]).unwrap_or_default(),
                })
            })
            .collect();
        let mut agg = Self { distances, n, linkage, clusters, nearest: vec![None; n], merges: Vec::new(), stop: None };
        for i in 0..n {
            agg.refresh_nearest(i);
        }
        agg
    }

    #[inline]
    fn link(&self, i: usize, j: usize) -> f64 {
        self.linkage[i * self.n + j]
    }

    fn is_active(&self, i: usize) -> bool {
        self.clusters[i].is_some()
    }

    fn refresh_nearest(&mut self, i: usize) {
        let mut best: Option<(f64, usize)> = None;
        for j in (i + 1)..self.n {
            if !self.is_active(j) {
                continue;
            }
            let d = self.link(i, j);
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, j));
            }
        }
        self.nearest[i] = best;
    }

    /// Globally closest active pair, lexicographically smallest on ties.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, near) in self.nearest.iter().enumerate() {
            if let Some((d, j)) = *near {
                if best.is_none_or(|(_, _, b)| d < b) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }

    /// Perform one merge, or report why agglomeration is over.
    pub fn step(&mut self) -> Step {
        if let Some(stop) = self.stop {
            return stop;
        }
        let Some((i, j, distance)) = self.closest_pair() else {
            self.stop = Some(Step::Exhausted);
            return Step::Exhausted;
        };
        let (a, b) = (self.clusters[i].as_ref().unwrap(), self.clusters[j].as_ref().unwrap());
        if a.has_prototype() && b.has_prototype() {
            let stop = Step::PrototypeCollision { i, j, distance };
            self.stop = Some(stop);
            return stop;
        }

        let absorbed = self.clusters[j].take().unwrap();
        let size_i = self.clusters[i].as_ref().unwrap().size();
        let size_j = absorbed.size();
        for k in 0..self.n {
            if k == i || !self.is_active(k) {
                continue;
            }
            let d = upgma_update(self.link(i, k), self.link(j, k), size_i, size_j);
            self.linkage[i * self.n + k] = d;
            self.linkage[k * self.n + i] = d;
        }
        let kept = self.clusters[i].as_mut().unwrap();
        kept.members.extend(absorbed.members);
        kept.members.sort_unstable();
        kept.prototype_classes.extend(absorbed.prototype_classes);
        self.nearest[j] = None;

        self.refresh_nearest(i);
        for k in 0..j {
            if k == i || !self.is_active(k) {
                continue;
            }
            match self.nearest[k] {
                Some((_, nk)) if nk == i || nk == j => self.refresh_nearest(k),
                Some((d, nk)) if k < i => {
                    let di = self.link(k, i);
                    if di < d || (di == d && i < nk) {
                        self.nearest[k] = Some((di, i));
                    }
                }
                None if k < i => self.nearest[k] = Some((self.link(k, i), i)),
                _ => {}
            }
        }

        let merge = Merge { kept: i, absorbed: j, distance };
        self.merges.push(merge);
        Step::Merged(merge)
    }

    /// Merge until the stopping rule fires; returns the reason.
    pub fn run(&mut self) -> Step {
        loop {
            match self.step() {
                Step::Merged(_) => continue,
                stop => return stop,
            }
        }
    }

    /// Current linkage between two active slots.
    pub fn linkage(&self, i: usize, j: usize) -> f64 {
        self.link(i, j)
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Active clusters by ascending slot.
    pub fn active(&self) -> impl Iterator<Item = (usize, &ActiveCluster)> + '_ {
        self.clusters.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShcCluster {
    pub tag: ClusterTag,
    /// Index into the prototype set, if this cluster holds one.
    pub prototype: Option<usize>,
    /// Query indices, ascending.
    pub queries: Vec<usize>,
}

/// A remainder cluster and the potential cluster it was attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderMove {
    pub queries: Vec<usize>,
    pub target: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShcResult {
    /// Final clusters: prototype-bearing ones first (by prototype order), then
    /// novel ones in order of their smallest member.
    pub clusters: Vec<ShcCluster>,
    pub remainder_log: Vec<RemainderMove>,
    pub merges: Vec<Merge>,
    pub stop: Step,
}

impl ShcResult {
    pub fn assignment(&self) -> ClusterAssignment {
        let n = self.clusters.iter().map(|c| c.queries.len()).sum();
        let mut cluster_of = vec![usize::MAX; n];
        for (ci, c) in self.clusters.iter().enumerate() {
            for &q in &c.queries {
                cluster_of[q] = ci;
            }
        }
        debug_assert!(cluster_of.iter().all(|&c| c != usize::MAX));
        ClusterAssignment::new(cluster_of, self.clusters.iter().map(|c| c.tag).collect())
            .expect("shc clusters form a valid assignment")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShcParams {
    pub threshold: usize,
    pub metric: Metric,
}

impl Default for ShcParams {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, metric: Metric::Cosine }
    }
}

/// Cluster `queries` around `protos`. Both must be unit-norm.
pub fn shc_cluster(protos: &PrototypeSet, queries: &EmbeddingMatrix, params: ShcParams) -> Result<ShcResult> {
    if protos.is_empty() {
        return Err(Error::Empty("prototype set"));
    }
    let points = protos.vectors().stack(queries)?;
    let distances = pairwise_distance(&points, params.metric);
    let mut agg = Agglomeration::new(distances, protos.class_ids());
    let stop = agg.run();
    Ok(finish(&agg, protos.len(), params.threshold, stop))
}

fn finish(agg: &Agglomeration, n_protos: usize, threshold: usize, stop: Step) -> ShcResult {
    type Slots<'a> = Vec<(usize, &'a ActiveCluster)>;
    let (potential, remainder): (Slots, Slots) =
        agg.active().partition(|(_, c)| c.size() > threshold || c.has_prototype());

    let mut members: Vec<Vec<usize>> = potential.iter().map(|(_, c)| c.members.clone()).collect();
    let mut remainder_log = Vec::with_capacity(remainder.len());
    for (r, cluster) in &remainder {
        let (target, distance) = potential
            .iter()
            .enumerate()
            .map(|(pi, (slot, _))| (pi, agg.linkage(*r, *slot)))
            .fold(None, |best: Option<(usize, f64)>, (pi, d)| match best {
                Some((_, b)) if b <= d => best,
                _ => Some((pi, d)),
            })
            .expect("at least one potential cluster");
        members[target].extend(&cluster.members);
        remainder_log.push(RemainderMove {
            queries: cluster.members.iter().map(|m| m - n_protos).collect(),
            target,
            distance,
        });
    }

    let mut next_novel = 0;
    let clusters = potential
        .iter()
        .zip(members)
        .map(|((_, c), mut all)| {
            all.sort_unstable();
            let prototype = all.first().copied().filter(|&m| m < n_protos);
            let tag = match c.prototype_classes.first() {
                Some(&class) => ClusterTag::Known(class),
                None => {
                    next_novel += 1;
                    ClusterTag::Novel(next_novel - 1)
                }
            };
            ShcCluster {
                tag,
                prototype,
                queries: all.into_iter().filter(|&m| m >= n_protos).map(|m| m - n_protos).collect(),
            }
        })
        .collect();

    ShcResult { clusters, remainder_log, merges: agg.merges().to_vec(), stop }
}
