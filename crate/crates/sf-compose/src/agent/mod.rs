//! Replay, the interleaved acting/learning loop, and the evaluation
//! protocol shared by the composition agents and the SAC baseline.

mod eval;
mod replay;
mod train;

pub use eval::{
    evaluate, Actor, ComposerActor, EvalDumps, EvalMetrics, PdController, RandomActor,
    EVAL_SEED_OFFSET,
};
pub use replay::ReplayBuffer;
pub use train::{train, RunConfig, TrainOutput, TrainStats, TrainedAgent};
