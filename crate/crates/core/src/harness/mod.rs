//! Desk-scale self-training loop on a synthetic two-domain task.

pub mod experiment;
pub mod loss;
pub mod model;
pub mod scene;
pub mod train;

pub use experiment::{
    evaluate, run_experiment, run_experiment_with, run_on, write_metrics_csv, ExperimentResult,
    NoiseMetrics,
};
pub use loss::{weighted_ce_loss, LossBreakdown, PixelTag};
pub use model::PixelClassifier;
pub use scene::{gen_domain_pair, DomainPair, DomainShift, Scene, SyntheticSceneConfig};
pub use train::{train_step, SplitCounts, StepRecord, StepTrace, TrainConfig, TrainState, Variant};
