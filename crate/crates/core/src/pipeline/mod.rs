//! End-to-end orchestration: configuration, run directories, and the
//! commands behind the CLI.

pub mod audit;
pub mod config;
pub mod features;
pub mod manifest;
pub mod run;

pub use audit::{SealedLabels, EVALUATION_STAGE};
pub use config::RunConfig;
pub use features::{rank_bound, FeatureOptions, FeaturePipeline};
pub use manifest::{audit, RunDir, RunManifest, StageRecord, StageStatus};
pub use run::{
    cmd_classify, cmd_evaluate, cmd_featurize, cmd_geocode, cmd_ingest, cmd_pipeline, cmd_preprocess, cmd_rank_sweep,
    cmd_replicates, cmd_train, tier2_replicates, GeoContext, GeoSummary, GeocodedMessage, Inputs, PipelineSummary,
    Tier1Model, Tier2Params, Tier2Summary, WilcoxonRow, DATA_STAGES, TIER2_NAMES,
};
