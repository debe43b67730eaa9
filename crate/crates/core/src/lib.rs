//! Secret key rate models for BB84 with single-photon and
//! weak-coherent-pulse sources.
//!
//! * [`photon_source`]: photon-number distributions and their moments.
//! * [`channel`]: link transmittance and threshold-detector statistics.
//! * [`asymptotic`]: closed-form rates and the ideal advantage boundary.
//! * [`finite_key`]: Chernoff-bounded key lengths, the decoy-state
//!   comparator, rate comparisons and the finite-key boundary.
//! * [`optimizer`]: genetic-algorithm parameter search.
//! * [`montecarlo`]: sampled blocks fed through the key-length calculation.
//! * [`config`]: the flat `key = value` experiment file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod channel;
pub mod config;
pub mod error;
pub mod finite_key;
pub mod montecarlo;
pub mod optimizer;
pub mod photon_source;

pub use asymptotic::{
    advantage_boundary, linear_grid, sps_asymptotic_rate, wcp_asymptotic_rate, BoundaryCurve,
    BoundaryPoint,
};
pub use channel::{detection_stats, ChannelDetectorModel, DetectionStats};
pub use config::{load_config, parse_config, ConsistencyReport, ExperimentConfig};
pub use error::{Error, Result};
pub use finite_key::{
    compare, finite_boundary, sps_expected_rate, sps_key_length, wcp_finite_key_rate, Comparison,
    ComparisonSetup, DecoySettings, KeyMode, KeyReport, LossScan, ProtocolConfig, SecurityParams,
    SpsSetup, TallySet, WcpSetup,
};
pub use montecarlo::{simulate_rate_distribution, simulate_trial, RateSummary, TrialSpec};
pub use optimizer::{optimize, GaSettings, OptimizationResult, SearchSpace};
pub use photon_source::{PhotonNumberDistribution, SourceSpec};
