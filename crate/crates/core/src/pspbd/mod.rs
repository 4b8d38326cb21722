//! Task-dependent classifier, pipeline evaluation and the task-independent
//! replay baseline.

mod classifier;
mod head;
mod pipeline;
mod vanilla;

pub use classifier::{BdBias, PspBdClassifier, PspBdConfig, PspBdGrads, PspContextKey, TrainStats};
pub use head::HeadLayout;
pub use pipeline::{run_pipeline, EvalSet, LogitCache, PipelineSummary};
pub use vanilla::{VanillaLayout, VanillaReplay, VanillaReplayConfig};
