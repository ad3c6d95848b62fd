//! Turns raw smartphone WiFi and accelerometer traces into stationary-segment
//! RSSI likelihood fingerprints, computes pairwise distances between them
//! under interchangeable statistical distance measures, and evaluates how well
//! those distances discriminate and topologically arrange physical locations.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`ingest`] — parse, filter and augment raw observation streams.
//! 2. [`motionseg`] — split time into stationary and moving intervals from
//!    acceleration magnitudes and cut the WiFi stream into stationary segments.
//! 3. [`likelihood`] — estimate per-AP RSSI distributions (PMF, Normal or KDE)
//!    and assemble per-segment fingerprints.
//! 4. [`distance`] — statistical distances between fingerprints, aggregated
//!    over APs into pairwise distance matrices.
//! 5. [`eval`] — ROC/AUC discrimination scores, floor-plan correlations and a
//!    synthetic scene generator for end-to-end verification.
//! 6. [`embed`] — classical MDS layout of a distance matrix in the plane.

pub mod distance;
pub mod embed;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod likelihood;
pub mod motionseg;

pub use distance::{AggregationNorm, DistanceMatrix, DistanceParams, MeasureTag};
pub use embed::Embedding;
pub use error::{Error, Result};
pub use eval::scene::{SyntheticScene, SyntheticSceneConfig};
pub use eval::{CorrelationReport, LabeledSegment, RocCurve};
pub use ingest::{AccelObservation, Blacklist, WifiDataset, WifiObservation};
pub use likelihood::{
    EstimatorKind, EstimatorOptions, EvaluationGrid, SegmentFingerprint, UnivariateLikelihood,
};
pub use motionseg::{MotionSegmentation, WifiSegment, WindowConfig, WindowStatistic};

/// Library version, as recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lowest representable RSSI in dBm; reserved for AP-invisibility
/// pseudo-observations.
pub const RSSI_MIN: i16 = -100;
/// Highest representable RSSI in dBm.
pub const RSSI_MAX: i16 = -10;
/// Number of integer RSSI values in `[RSSI_MIN, RSSI_MAX]`.
pub const RSSI_SUPPORT: usize = (RSSI_MAX - RSSI_MIN + 1) as usize;
