//! Accuracy analysis for range-based cooperative localization.
//!
//! A wireless sensor network mixes *sensors* (positions unknown) and
//! *anchors* (positions known); noisy inter-node range measurements over a
//! link graph determine the sensor positions. This crate quantifies how well
//! they can be determined:
//!
//! - [`geometry`] builds the range Jacobian of an instance and computes its
//!   dilution of precision (DOP): per-coordinate, total (GDOP), and averaged
//!   per sensor (AGDOP).
//! - [`bound`] evaluates a closed-form lower bound on expected AGDOP from
//!   three connectivity numbers alone (average sensor degree, average anchor
//!   degree, sensor count), plus the matrix identities behind it.
//! - [`lateration`] synthesizes noisy ranges and solves the weighted
//!   least-squares localization problem, validating that the estimator's
//!   error covariance matches the DOP prediction.
//! - [`optimizer`] searches node layouts that minimize AGDOP for a fixed
//!   topology.
//! - [`randgraph`] generates reproducible random instances under
//!   link-probability, geometric, nearest-neighbor, and exact degree-target
//!   models.
//! - [`experiment`] is the Monte-Carlo harness tying it all together:
//!   per-configuration AGDOP statistics against the bound, over whole
//!   parameter sweeps, with deterministic parallelism.

pub mod bound;
pub mod experiment;
pub mod geometry;
pub mod lateration;
pub mod model;
pub mod optimizer;
pub mod randgraph;

pub use bound::{
    connectivity_expected_normal, lb_e_agdop, lb_for_topology, lb_via_direct_inverse,
    position_expected_normal, psd_gap_check, BoundError, ConnectivityBound,
    PositionExpectedNormal,
};
pub use experiment::{
    quantiles, run_config, run_config_degree_binned, run_sweep, tukey_fences, AgdopStats,
    ConfigSummary, ExperimentConfig, ExperimentError, SingularPolicy, SweepRecord,
};
pub use geometry::{
    build_geometry_matrix, compute_dop, single_sensor_gdop, DopReport, GeometryError,
    GeometryMatrix, GeometryRow,
};
pub use lateration::{
    empirical_error_covariance, solve_wls, synthesize_measurements, CovarianceEstimate,
    LaterationError, RangeMeasurementSet, SolverOptions, SolverResult, SolverStatus,
};
pub use model::{
    degree_summary, validate_topology, DegreeSummary, Link, ModelError, NetworkTopology,
    NodeDegrees, NodePositions, Violation,
};
pub use optimizer::{
    minimize_agdop, optimal_single_sensor_angles, sensor_cycle_with_anchors, AgdopOptimum,
    OptimizationProblem, OptimizerError, OptimizerOptions,
};
pub use randgraph::{
    derive_seed, generate, generate_degree_target, trial_rng, AnchorPlacement, GenerateError,
    GraphModel, GraphModelSpec,
};
