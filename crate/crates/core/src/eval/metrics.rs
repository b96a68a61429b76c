//! Known-class, novel-class and overall accuracy for one episode.
//!
//! - Old: restricted to queries whose true class is a support class; a query is
//!   correct iff its cluster is tagged with exactly that class.
//! - New: restricted to queries of unseen classes; predicted clusters (of any
//!   tag) are matched one-to-one to true classes by maximum overlap.
//! - All: both correct counts over the whole batch. This composition is a
//!   choice of this crate; it keeps the old-class mapping fixed instead of
//!   re-matching it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::assignment::{ClusterAssignment, ClusterTag};
use super::hungarian::hungarian_max;
use crate::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn fraction(self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

fn check_len(assignment: &ClusterAssignment, truth: &[ClassId]) {
    assert_eq!(assignment.len(), truth.len(), "assignment and truth cover different query counts");
}

pub fn old_tally(assignment: &ClusterAssignment, truth: &[ClassId], known: &BTreeSet<ClassId>) -> Tally {
    check_len(assignment, truth);
    let mut t = Tally::default();
    for (q, &y) in truth.iter().enumerate() {
        if known.contains(&y) {
            t.total += 1;
            if assignment.tag_of(q) == ClusterTag::Known(y) {
                t.correct += 1;
            }
        }
    }
    t
}

pub fn new_tally(assignment: &ClusterAssignment, truth: &[ClassId], known: &BTreeSet<ClassId>) -> Tally {
    check_len(assignment, truth);
    let novel: Vec<usize> = (0..truth.len()).filter(|&q| !known.contains(&truth[q])).collect();
    if novel.is_empty() {
        return Tally::default();
    }
    let mut clusters = BTreeMap::new();
    let mut classes = BTreeMap::new();
    for &q in &novel {
        let next = clusters.len();
        clusters.entry(assignment.cluster_of()[q]).or_insert(next);
        let next = classes.len();
        classes.entry(truth[q]).or_insert(next);
    }
    let mut counts = vec![vec![0.0; classes.len()]; clusters.len()];
    for &q in &novel {
        counts[clusters[&assignment.cluster_of()[q]]][classes[&truth[q]]] += 1.0;
    }
    let matched = hungarian_max(&counts).expect("non-empty contingency table").total;
    Tally { correct: matched as usize, total: novel.len() }
}

/// Accuracy on support-class queries; `None` when there are none.
pub fn acc_old(assignment: &ClusterAssignment, truth: &[ClassId], known: &BTreeSet<ClassId>) -> Option<f64> {
    old_tally(assignment, truth, known).fraction()
}

/// Hungarian-matched accuracy on unseen-class queries; `None` when there are none.
pub fn acc_new(assignment: &ClusterAssignment, truth: &[ClassId], known: &BTreeSet<ClassId>) -> Option<f64> {
    new_tally(assignment, truth, known).fraction()
}

pub fn acc_all(assignment: &ClusterAssignment, truth: &[ClassId], known: &BTreeSet<ClassId>) -> f64 {
    let old = old_tally(assignment, truth, known);
    let new = new_tally(assignment, truth, known);
    let total = old.total + new.total;
    if total == 0 {
        return 0.0;
    }
    (old.correct + new.correct) as f64 / total as f64
}

/// Scores of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeReport {
    pub acc_all: f64,
    pub acc_old: Option<f64>,
    pub acc_new: Option<f64>,
    pub clusters_found: usize,
    pub novel_clusters: usize,
    pub converged: bool,
}

pub fn score_episode(
    assignment: &ClusterAssignment,
    truth: &[ClassId],
    known: &BTreeSet<ClassId>,
    converged: bool,
) -> EpisodeReport {
    EpisodeReport {
        acc_all: acc_all(assignment, truth, known),
        acc_old: acc_old(assignment, truth, known),
        acc_new: acc_new(assignment, truth, known),
        clusters_found: assignment.cluster_count(),
        novel_clusters: assignment.novel_cluster_count(),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClusterTag::{Known, Novel};

    fn known(c: &[ClassId]) -> BTreeSet<ClassId> {
        c.iter().copied().collect()
    }

    #[test]
    fn perfect_assignment() {
        let truth = [1, 1, 2, 7, 7, 8];
        let a = ClusterAssignment::new(vec![0, 0, 1, 2, 2, 3], vec![Known(1), Known(2), Novel(0), Novel(1)]).unwrap();
        let k = known(&[1, 2]);
        assert_eq!(acc_old(&a, &truth, &k), Some(1.0));
        assert_eq!(acc_new(&a, &truth, &k), Some(1.0));
        assert_eq!(acc_all(&a, &truth, &k), 1.0);
    }

    #[test]
    fn old_query_in_novel_cluster_is_wrong() {
        let truth = [1, 1];
        let a = ClusterAssignment::new(vec![0, 1], vec![Known(1), Novel(0)]).unwrap();
        assert_eq!(acc_old(&a, &truth, &known(&[1])), Some(0.5));
        assert_eq!(acc_new(&a, &truth, &known(&[1])), None);
    }

    #[test]
    fn mixed_ten_query_case_counts_directly() {
        // Known classes 0 and 1; clusters: 0->Known(0), 1->Known(1), 2->Novel.
        let truth = [0, 0, 0, 1, 1, 1, 0, 1, 1, 0];
        let cluster = vec![0, 0, 2, 1, 1, 0, 0, 1, 2, 1];
        let a = ClusterAssignment::new(cluster.clone(), vec![Known(0), Known(1), Novel(0)]).unwrap();
        // Hand count: q0,q1,q6 right for class 0; q3,q4,q7 right for class 1.
        let hand =
            (0..10).filter(|&q| (cluster[q] == 0 && truth[q] == 0) || (cluster[q] == 1 && truth[q] == 1)).count();
        assert_eq!(hand, 6);
        assert_eq!(acc_old(&a, &truth, &known(&[0, 1])), Some(0.6));
    }

    #[test]
    fn dumped_novels_match_one_class() {
        let mut truth = vec![10; 15];
        truth.extend(vec![11; 15]);
        let a = ClusterAssignment::new(vec![0; 30], vec![Novel(0)]).unwrap();
        assert_eq!(acc_new(&a, &truth, &known(&[1])), Some(0.5));
    }

    #[test]
    fn constructed_episode_with_half_the_novels_right() {
        // 5 known classes x 15 queries, all in their own cluster. Novel classes
        // 5..=9 x 15 queries: cluster 5 holds class 5; cluster 6 holds classes
        // 6, 7, 8 and 8 queries of class 9; cluster 7 holds the other 7 of class 9.
        let mut truth: Vec<ClassId> = Vec::new();
        let mut cluster = Vec::new();
        for c in 0..10u32 {
            for i in 0..15 {
                truth.push(c);
                cluster.push(match c {
                    0..=5 => c as usize,
                    9 if i < 7 => 7,
                    _ => 6,
                });
            }
        }
        let mut tags: Vec<ClusterTag> = (0..5).map(Known).collect();
        tags.extend((0..3).map(Novel));
        let a = ClusterAssignment::new(cluster, tags).unwrap();
        let k = known(&[0, 1, 2, 3, 4]);
        // Best matching 5->class5 (15), 6->one of 6/7/8 (15), 7->class9 (7).
        let brute = brute_force_novel(&a, &truth, &k);
        assert_eq!(brute, 37);
        assert_eq!(new_tally(&a, &truth, &k), Tally { correct: 37, total: 75 });
        assert_eq!(acc_old(&a, &truth, &k), Some(1.0));
        assert_eq!(acc_all(&a, &truth, &k), (75.0 + 37.0) / 150.0);
    }

    #[test]
    fn closed_set_all_equals_old() {
        let truth = [0, 0, 1, 1];
        let a = ClusterAssignment::new(vec![0, 1, 1, 1], vec![Known(0), Known(1)]).unwrap();
        let k = known(&[0, 1]);
        assert_eq!(Some(acc_all(&a, &truth, &k)), acc_old(&a, &truth, &k));
    }

    #[test]
    fn three_novel_classes_in_five_clusters_match_brute_force() {
        let truth: Vec<ClassId> = vec![5, 5, 5, 6, 6, 6, 6, 7, 7, 7, 5, 6];
        let cluster = vec![0, 1, 1, 2, 2, 3, 4, 4, 4, 0, 2, 1];
        let a = ClusterAssignment::new(cluster, (0..5).map(Novel).collect()).unwrap();
        let k = known(&[0]);
        assert_eq!(new_tally(&a, &truth, &k).correct, brute_force_novel(&a, &truth, &k));
    }

    fn brute_force_novel(a: &ClusterAssignment, truth: &[ClassId], k: &BTreeSet<ClassId>) -> usize {
        let novel: Vec<usize> = (0..truth.len()).filter(|q| !k.contains(&truth[*q])).collect();
        let clusters: Vec<usize> =
            novel.iter().map(|&q| a.cluster_of()[q]).collect::<BTreeSet<_>>().into_iter().collect();
        let classes: Vec<ClassId> = novel.iter().map(|&q| truth[q]).collect::<BTreeSet<_>>().into_iter().collect();
        let n = clusters.len().max(classes.len());
        let mut best = 0;
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            let s = (0..clusters.len())
                .filter(|&i| p[i] < classes.len())
                .map(|i| {
                    novel.iter().filter(|&&q| a.cluster_of()[q] == clusters[i] && truth[q] == classes[p[i]]).count()
                })
                .sum();
            best = best.max(s);
        });
        best
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }
}
