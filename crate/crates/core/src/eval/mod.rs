//! Accuracy protocol, the prototype baseline and the episode runner.
//!
//! Old-class queries are scored through the fixed mapping a prototype gives
//! its cluster. Novel-class queries are scored through the best one-to-one
//! matching between predicted clusters and their true classes. The overall
//! accuracy adds both correct counts and divides by the query count.

mod assignment;
mod hungarian;
mod metrics;
mod protonet;
mod runner;

pub use assignment::{ClusterAssignment, ClusterTag};
pub use hungarian::{hungarian_max, Matching};
pub use metrics::{acc_all, acc_new, acc_old, new_tally, old_tally, score_episode, EpisodeReport, Tally};
pub use protonet::protonet_assign;
pub use runner::{
    run_episodes, run_method, AggregateReport, ConfigEcho, Mean, MeanStd, Method, MethodParams, RunConfig, Scenario,
};
