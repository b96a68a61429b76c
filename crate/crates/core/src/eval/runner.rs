//! Episode loop and aggregate report.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{score_episode, EpisodeReport};
use super::protonet::protonet_assign;
use super::ClusterAssignment;
use crate::data::{sample_episode, sample_large_scale, Episode, EpisodeConfig, LabeledEmbeddings, SplitManifest};
use crate::embedding::{class_prototypes, Metric};
use crate::error::Result;
use crate::rng::{derive_seed, TAG_METHOD};
use crate::scalable::{scalable_shc, ScalableConfig, DEFAULT_SUBSAMPLE};
use crate::shc::{shc_cluster, ShcParams, DEFAULT_THRESHOLD};
use crate::ukc::{ukc_cluster, UkcParams, DEFAULT_ALPHA, DEFAULT_MAX_OUTER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Shc,
    Ukc,
    Protonet,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Shc => "shc",
            Method::Ukc => "ukc",
            Method::Protonet => "protonet",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// `q_per_class` queries from every sampled class.
    #[default]
    Episodic,
    /// A single query per sampled class.
    Realtime,
    /// Every remaining row of the novel split is a query; SHC runs subsampled.
    LargeScale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodParams {
    pub alpha: f64,
    pub threshold: usize,
    pub subsample: usize,
    pub metric: Metric,
    pub max_outer: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            threshold: DEFAULT_THRESHOLD,
            subsample: DEFAULT_SUBSAMPLE,
            metric: Metric::Cosine,
            max_outer: DEFAULT_MAX_OUTER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunConfig {
    pub episode: EpisodeConfig,
    pub scenario: Scenario,
    pub params: MethodParams,
}

impl RunConfig {
    /// Episode shape after the scenario preset is applied.
    pub fn effective_episode(&self) -> EpisodeConfig {
        match self.scenario {
            Scenario::Realtime => EpisodeConfig { q_per_class: 1, ..self.episode },
            _ => self.episode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mean {
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub scenario: Scenario,
    pub way: usize,
    pub shot: usize,
    pub new: usize,
    pub queries: usize,
    pub episodes: usize,
    pub seed: u64,
    pub alpha: f64,
    pub threshold: usize,
    pub subsample: usize,
    pub metric: &'static str,
}

/// Summary of a run. Accuracy statistics skip episodes where the quantity is
/// undefined; the standard deviation is the population one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub config: ConfigEcho,
    pub method: Method,
    /// Episodes that produced a score.
    pub episodes: usize,
    pub acc_all: MeanStd,
    pub acc_old: MeanStd,
    pub acc_new: MeanStd,
    pub clusters_found: Mean,
    pub non_converged: usize,
    /// Episodes whose method call returned an error.
    pub failed: usize,
    #[serde(skip)]
    pub per_episode: Vec<EpisodeReport>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> MeanStd {
    let n = values.clone().count();
    if n == 0 {
        return MeanStd { mean: None, std: None };
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    MeanStd { mean: Some(mean), std: Some(var.sqrt()) }
}

/// Cluster one episode's queries with `method`. Returns the assignment and
/// whether the method reached its own stopping rule.
pub fn run_method(
    episode: &Episode,
    method: Method,
    scenario: Scenario,
    params: &MethodParams,
    seed: u64,
) -> Result<(ClusterAssignment, bool)> {
    let protos = class_prototypes(&episode.support)?;
    let queries = &episode.query.embeddings;
    match method {
        Method::Protonet => Ok((protonet_assign(&protos, queries), true)),
        Method::Shc if scenario == Scenario::LargeScale => {
            let cfg = ScalableConfig {
                subsample_size: params.subsample.min(queries.rows()),
                threshold: params.threshold,
                seed,
                metric: params.metric,
            };
            Ok((scalable_shc(&protos, queries, cfg)?.assignment, true))
        }
        Method::Shc => {
            let shc = ShcParams { threshold: params.threshold, metric: params.metric };
            Ok((shc_cluster(&protos, queries, shc)?.assignment(), true))
        }
        Method::Ukc => {
            let ukc = UkcParams { alpha: params.alpha, seed, max_outer: params.max_outer };
            let r = ukc_cluster(&protos, queries, ukc)?;
            Ok((r.assignment, r.converged))
        }
    }
}

/// Sample and score `cfg.episode.episodes` episodes. Sampling errors abort the
/// run; method errors are counted in `failed` and the episode is skipped.
pub fn run_episodes(
    data: &LabeledEmbeddings,
    split: &SplitManifest,
    cfg: &RunConfig,
    method: Method,
) -> Result<AggregateReport> {
    let ep_cfg = cfg.effective_episode();
    ep_cfg.validate()?;
    let outcomes: Vec<Result<Option<EpisodeReport>>> = (0..ep_cfg.episodes as u64)
        .into_par_iter()
        .map(|index| {
            let episode = match cfg.scenario {
                Scenario::LargeScale => sample_large_scale(data, split, &ep_cfg, index)?,
                _ => sample_episode(data, split, &ep_cfg, index)?,
            };
            let seed = derive_seed(ep_cfg.seed, TAG_METHOD, index);
            let known: BTreeSet<_> = episode.known_classes.iter().copied().collect();
            Ok(run_method(&episode, method, cfg.scenario, &cfg.params, seed)
                .ok()
                .map(|(a, converged)| score_episode(&a, &episode.query.labels, &known, converged)))
        })
        .collect();

    let mut per_episode = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for outcome in outcomes {
        match outcome? {
            Some(r) => per_episode.push(r),
            None => failed += 1,
        }
    }
    let clusters = mean_std(per_episode.iter().map(|r| r.clusters_found as f64)).mean;
    Ok(AggregateReport {
        config: ConfigEcho {
            scenario: cfg.scenario,
            way: ep_cfg.way,
            shot: ep_cfg.shot,
            new: ep_cfg.n_new,
            queries: ep_cfg.q_per_class,
            episodes: ep_cfg.episodes,
            seed: ep_cfg.seed,
            alpha: cfg.params.alpha,
            threshold: cfg.params.threshold,
            subsample: cfg.params.subsample,
            metric: cfg.params.metric.name(),
        },
        method,
        episodes: per_episode.len(),
        acc_all: mean_std(per_episode.iter().map(|r| r.acc_all)),
        acc_old: mean_std(per_episode.iter().filter_map(|r| r.acc_old)),
        acc_new: mean_std(per_episode.iter().filter_map(|r| r.acc_new)),
        clusters_found: Mean { mean: clusters },
        non_converged: per_episode.iter().filter(|r| !r.converged).count(),
        failed,
        per_episode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    fn synthetic(classes: u32) -> (LabeledEmbeddings, SplitManifest) {
        let data = generate_synthetic(classes as usize, 30, 32, 0.03, 9).unwrap();
        let split = SplitManifest::new(BTreeSet::new(), (0..classes).collect()).unwrap();
        (data, split)
    }

    #[test]
    fn mean_std_is_population() {
        let s = mean_std([1.0, 3.0].into_iter());
        assert_eq!(s, MeanStd { mean: Some(2.0), std: Some(1.0) });
        assert_eq!(mean_std(std::iter::empty()).mean, None);
    }

    #[test]
    fn protonet_closed_set_is_near_perfect() {
        let (data, split) = synthetic(5);
        let cfg = RunConfig {
            episode: EpisodeConfig { n_new: 0, episodes: 20, seed: 1, ..Default::default() },
            ..Default::default()
        };
        let r = run_episodes(&data, &split, &cfg, Method::Protonet).unwrap();
        assert_eq!(r.episodes, 20);
        assert!(r.acc_old.mean.unwrap() >= 0.99);
        assert_eq!(r.acc_new.mean, None);
    }

    #[test]
    fn repeated_runs_match() {
        let (data, split) = synthetic(10);
        let cfg =
            RunConfig { episode: EpisodeConfig { episodes: 8, seed: 3, ..Default::default() }, ..Default::default() };
        let a = run_episodes(&data, &split, &cfg, Method::Ukc).unwrap();
        let b = run_episodes(&data, &split, &cfg, Method::Ukc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn realtime_uses_one_query_per_class() {
        let cfg = RunConfig { scenario: Scenario::Realtime, ..Default::default() };
        assert_eq!(cfg.effective_episode().q_per_class, 1);
    }
}
