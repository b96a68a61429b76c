use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};

use super::{LabeledEmbeddings, SplitManifest};
use crate::error::{Error, Result};
use crate::rng::{self, TAG_EPISODE};
use crate::ClassId;

/// N-way K-shot episode shape plus the number of unseen classes mixed into
/// the query set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeConfig {
    pub way: usize,
    pub shot: usize,
    pub n_new: usize,
    pub q_per_class: usize,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { way: 5, shot: 5, n_new: 5, q_per_class: 15, episodes: 600, seed: 0 }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.way == 0 || self.shot == 0 || self.q_per_class == 0 {
            return Err(Error::InvalidParameter(format!(
                "way, shot and queries per class must be positive (got {}, {}, {})",
                self.way, self.shot, self.q_per_class
            )));
        }
        Ok(())
    }
}

/// One support/query task. Row indices refer back to the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub support: LabeledEmbeddings,
    pub query: LabeledEmbeddings,
    /// Support classes, ascending.
    pub known_classes: Vec<ClassId>,
    pub support_rows: Vec<usize>,
    pub query_rows: Vec<usize>,
}

impl Episode {
    pub fn novel_classes(&self) -> BTreeSet<ClassId> {
        let known: BTreeSet<_> = self.known_classes.iter().copied().collect();
        self.query.classes().difference(&known).copied().collect()
    }
}

fn rows_by_class(data: &LabeledEmbeddings, classes: &BTreeSet<ClassId>) -> BTreeMap<ClassId, Vec<usize>> {
    let mut rows: BTreeMap<ClassId, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
    for (i, label) in data.labels.iter().enumerate() {
        if let Some(r) = rows.get_mut(label) {
            r.push(i);
        }
    }
    rows
}

/// Draw episode `episode_index` from the novel split.
///
/// `way + n_new` classes are drawn without replacement; the first `way` become
/// support classes with `shot` support and `q_per_class` query rows each, the
/// rest contribute `q_per_class` query rows. The query order is shuffled.
pub fn sample_episode(
    data: &LabeledEmbeddings,
    split: &SplitManifest,
    cfg: &EpisodeConfig,
    episode_index: u64,
) -> Result<Episode> {
    cfg.validate()?;
    split.validate()?;
    let needed = cfg.way + cfg.n_new;
    if split.novel.len() < needed {
        return Err(Error::InsufficientClasses { needed, available: split.novel.len() });
    }
    let per_class = cfg.shot + cfg.q_per_class;
    let by_class = rows_by_class(data, &split.novel);
    if let Some((&class, rows)) = by_class.iter().find(|(_, r)| r.len() < per_class) {
        return Err(Error::InsufficientSamples { class, needed: per_class, available: rows.len() });
    }
    let classes: Vec<(&ClassId, &Vec<usize>)> = by_class.iter().collect();

    let mut rng = rng::stream(cfg.seed, TAG_EPISODE, episode_index);
    let chosen = index::sample(&mut rng, classes.len(), needed).into_vec();

    let mut support_rows = Vec::with_capacity(cfg.way * cfg.shot);
    let mut query_rows = Vec::with_capacity(needed * cfg.q_per_class);
    let mut known_classes = Vec::with_capacity(cfg.way);
    for (slot, &ci) in chosen.iter().enumerate() {
        let (&class, rows) = classes[ci];
        if slot < cfg.way {
            let picks = index::sample(&mut rng, rows.len(), per_class).into_vec();
            support_rows.extend(picks[..cfg.shot].iter().map(|&p| rows[p]));
            query_rows.extend(picks[cfg.shot..].iter().map(|&p| rows[p]));
            known_classes.push(class);
        } else {
            let picks = index::sample(&mut rng, rows.len(), cfg.q_per_class);
            query_rows.extend(picks.iter().map(|p| rows[p]));
        }
    }
    query_rows.shuffle(&mut rng);
    known_classes.sort_unstable();

    Ok(Episode {
        support: data.select(&support_rows),
        query: data.select(&query_rows),
        known_classes,
        support_rows,
        query_rows,
    })
}

/// Annotation-style episode: `way` support classes with `shot` rows each, and
/// every other row of the novel split as one query batch.
pub fn sample_large_scale(
    data: &LabeledEmbeddings,
    split: &SplitManifest,
    cfg: &EpisodeConfig,
    episode_index: u64,
) -> Result<Episode> {
    cfg.validate()?;
    split.validate()?;
    if split.novel.len() < cfg.way {
        return Err(Error::InsufficientClasses { needed: cfg.way, available: split.novel.len() });
    }
    let by_class = rows_by_class(data, &split.novel);
    if let Some((&class, rows)) = by_class.iter().find(|(_, r)| r.len() < cfg.shot) {
        return Err(Error::InsufficientSamples { class, needed: cfg.shot, available: rows.len() });
    }
    let classes: Vec<(&ClassId, &Vec<usize>)> = by_class.iter().collect();
    let mut rng = rng::stream(cfg.seed, TAG_EPISODE, episode_index);
    let chosen = index::sample(&mut rng, classes.len(), cfg.way).into_vec();

    let mut support_rows = Vec::with_capacity(cfg.way * cfg.shot);
    let mut known_classes = Vec::with_capacity(cfg.way);
    for &ci in &chosen {
        let (&class, rows) = classes[ci];
        let picks = index::sample(&mut rng, rows.len(), cfg.shot);
        support_rows.extend(picks.iter().map(|p| rows[p]));
        known_classes.push(class);
    }
    known_classes.sort_unstable();
    let used: BTreeSet<usize> = support_rows.iter().copied().collect();
    let query_rows: Vec<usize> = by_class
        .values()
        .flatten()
        .copied()
        .filter(|r| !used.contains(r))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    Ok(Episode {
        support: data.select(&support_rows),
        query: data.select(&query_rows),
        known_classes,
        support_rows,
        query_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    fn fixture() -> (LabeledEmbeddings, SplitManifest) {
        let data = generate_synthetic(24, 25, 8, 0.1, 2).unwrap();
        let split = SplitManifest::new((0..8).collect(), (8..24).collect()).unwrap();
        (data, split)
    }

    fn cfg(way: usize, shot: usize, n_new: usize, q: usize) -> EpisodeConfig {
        EpisodeConfig { way, shot, n_new, q_per_class: q, episodes: 1, seed: 17 }
    }

    #[test]
    fn five_way_five_shot_shapes() {
        let (data, split) = fixture();
        let ep = sample_episode(&data, &split, &cfg(5, 5, 5, 15), 0).unwrap();
        assert_eq!(ep.support.len(), 25);
        assert_eq!(ep.support.classes().len(), 5);
        assert_eq!(ep.query.len(), 150);
        assert_eq!(ep.query.classes().len(), 10);
        assert_eq!(ep.novel_classes().len(), 5);
        assert!(ep.query.classes().iter().all(|c| split.novel.contains(c)));
    }

    #[test]
    fn real_time_has_one_query_per_class() {
        let (data, split) = fixture();
        let ep = sample_episode(&data, &split, &cfg(5, 1, 5, 1), 3).unwrap();
        assert_eq!(ep.support.len(), 5);
        assert_eq!(ep.query.len(), 10);
        assert_eq!(ep.query.classes().len(), 10);
    }

    #[test]
    fn closed_set_when_no_new_classes() {
        let (data, split) = fixture();
        let ep = sample_episode(&data, &split, &cfg(5, 5, 0, 15), 1).unwrap();
        let known: BTreeSet<_> = ep.known_classes.iter().copied().collect();
        assert_eq!(ep.query.classes(), known);
    }

    #[test]
    fn support_and_query_are_disjoint_and_reproducible() {
        let (data, split) = fixture();
        for i in 0..20 {
            let ep = sample_episode(&data, &split, &cfg(5, 5, 5, 15), i).unwrap();
            let support: BTreeSet<_> = ep.support_rows.iter().collect();
            assert!(ep.query_rows.iter().all(|r| !support.contains(r)));
            let uniq: BTreeSet<_> = ep.query_rows.iter().collect();
            assert_eq!(uniq.len(), ep.query_rows.len());
            assert!(ep.novel_classes().iter().all(|c| !ep.known_classes.contains(c)));
            assert_eq!(ep, sample_episode(&data, &split, &cfg(5, 5, 5, 15), i).unwrap());
        }
        let a = sample_episode(&data, &split, &cfg(5, 5, 5, 15), 0).unwrap();
        let b = sample_episode(&data, &split, &cfg(5, 5, 5, 15), 1).unwrap();
        assert_ne!(a.query_rows, b.query_rows);
    }

    #[test]
    fn insufficient_data_is_reported() {
        let (data, split) = fixture();
        assert!(matches!(
            sample_episode(&data, &split, &cfg(10, 5, 10, 15), 0),
            Err(Error::InsufficientClasses { needed: 20, available: 16 })
        ));
        assert!(matches!(
            sample_episode(&data, &split, &cfg(5, 5, 5, 21), 0),
            Err(Error::InsufficientSamples { needed: 26, available: 25, .. })
        ));
    }

    #[test]
    fn large_scale_queries_cover_the_rest_of_the_split() {
        let (data, split) = fixture();
        let ep = sample_large_scale(&data, &split, &cfg(5, 5, 0, 1), 0).unwrap();
        assert_eq!(ep.support.len(), 25);
        assert_eq!(ep.query.len(), 16 * 25 - 25);
        assert_eq!(ep.query.classes().len(), 16);
    }
}
