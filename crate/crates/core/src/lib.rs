//! Driver-specific car-following models from recorded highway traffic.
//!
//! The crate fits Intelligent Driver Model parameters to individual drivers,
//! predicts parameters for unseen drivers from short observation windows via
//! nearest-neighbour lookup over driving codes, and scores every model by
//! closed-loop rollout inside the recorded traffic.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod idm;
pub mod metrics;
pub mod optimize;
pub mod pipeline;
pub mod predictor;
pub mod risk;
pub mod rollout;
pub mod scene;
pub mod synthetic;

pub use benchmark::{ablation_driving_code, ablation_frames, run_benchmark, BenchmarkConfig, BenchmarkOutput, Method};
pub use config::RunConfig;
pub use dynamics::{bicycle_step, pure_pursuit_steer, PurePursuitConfig};
pub use error::{Error, Result};
pub use estimation::{fit_idm, fit_training_set, FitConfig, FitResult, ScoringConfig, TrainingFit};
pub use geometry::{OrientedRect, Polyline, Vec2};
pub use idm::{desired_gap, idm_accel, IdmBounds, IdmGlobals, IdmParams, IdmState, Interval};
pub use metrics::{ade, fde, AdeNormalization, EvalRecord, PostCollision, ReportRow, ReportTable};
pub use predictor::{extract_code, predict_all, predict_params, DrivingCode, FeatureMask, KnnStore, NuMode, PredictConfig};
pub use risk::{ellipse_covariance, gaussian_overlap_risk, reward_features, EllipseGaussian, RewardFeatures};
pub use rollout::{detect_collision, rollout, Controller, RolloutConfig, RolloutResult};
pub use scene::{
    episode_window, hygiene_filter, ingest_ngsim, ControlInput, Episode, FilterReport, IngestConfig, LaneGeometry,
    Scene, Trajectory, VehicleGeometry, VehicleId, VehicleState,
};
