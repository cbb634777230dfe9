//! Noisy range synthesis and weighted least-squares position estimation.
//!
//! The estimator is the textbook iteration for the linearized range model:
//! at each step the geometry matrix is rebuilt at the current estimate and
//! the weighted normal equations give the Newton step. Convergence analysis
//! assumes a truth-adjacent initial guess; global initialization is the
//! caller's problem, so the solver takes the guess as input and reports
//! failure instead of regularizing.

use crate::geometry::build_geometry_matrix;
use crate::model::{NetworkTopology, NodePositions};
use crate::randgraph::trial_rng;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaterationError {
    #[error("sigma must be nonnegative and finite, got {0}")]
    InvalidSigma(f64),
    #[error("measurement set has {got} entries, topology has {expected} links")]
    MeasurementCountMismatch { expected: usize, got: usize },
    #[error("positions describe {got} nodes, topology has {expected}")]
    NodeCountMismatch { expected: usize, got: usize },
    #[error("no trial converged out of {0}")]
    AllTrialsFailed(usize),
}

/// Per-link range measurements with their noise scales and, for simulation
/// use, the true distances they were drawn around.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeMeasurementSet {
    /// Measured distances, one per link.
    pub measured: Vec<f64>,
    /// Per-link noise standard deviations (diagonal error covariance).
    pub sigma: Vec<f64>,
    /// Ground-truth distances.
    pub true_range: Vec<f64>,
}

impl RangeMeasurementSet {
    pub fn len(&self) -> usize {
        self.measured.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measured.is_empty()
    }
}

/// Draws `measured = true_range + noise` with i.i.d. zero-mean Gaussian noise
/// of standard deviation `sigma` on every link.
pub fn synthesize_measurements<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    positions: &NodePositions,
    sigma: f64,
    rng: &mut R,
) -> Result<RangeMeasurementSet, LaterationError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(LaterationError::InvalidSigma(sigma));
    }
    if positions.n_nodes() != topology.n_nodes() {
        return Err(LaterationError::NodeCountMismatch {
            expected: topology.n_nodes(),
            got: positions.n_nodes(),
        });
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| LaterationError::InvalidSigma(sigma))?;
    let mut measured = Vec::with_capacity(topology.n_links());
    let mut true_range = Vec::with_capacity(topology.n_links());
    for &(a, b) in topology.links() {
        let r = positions.distance(a, b);
        true_range.push(r);
        measured.push(r + normal.sample(rng));
    }
    Ok(RangeMeasurementSet {
        measured,
        sigma: vec![sigma; topology.n_links()],
        true_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop when the Newton step norm falls below this (unit-square units).
    pub step_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            step_tol: 1e-10,
        }
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIterationsReached,
    /// The weighted normal matrix was not positive definite (underdetermined
    /// or degenerate geometry at the current estimate).
    SingularNormalMatrix,
    /// Step or iterate left the plausible region around the unit square.
    Diverged,
    /// Two connected nodes coincided mid-iteration.
    ZeroDistanceLink,
}

/// Outcome of a weighted least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Final positions: estimated sensors, anchors echoed from the input.
    pub positions: NodePositions,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolverStatus,
    /// Euclidean norm of `measured - range(final estimate)`.
    pub final_residual_norm: f64,
    /// Newton step norms, one per iteration taken.
    pub step_norms: Vec<f64>,
}

/// Iteratively solves the weighted least-squares localization problem.
///
/// `initial` supplies both the anchor coordinates (held fixed) and the
/// starting sensor estimate. Numeric failures are reported in the result,
/// not thrown; only shape mismatches are errors.
pub fn solve_wls(
    topology: &NetworkTopology,
    initial: &NodePositions,
    measurements: &RangeMeasurementSet,
    opts: &SolverOptions,
) -> Result<SolverResult, LaterationError> {
    if initial.n_nodes() != topology.n_nodes() {
        return Err(LaterationError::NodeCountMismatch {
            expected: topology.n_nodes(),
            got: initial.n_nodes(),
        });
    }
    if measurements.len() != topology.n_links() || measurements.sigma.len() != topology.n_links() {
        return Err(LaterationError::MeasurementCountMismatch {
            expected: topology.n_links(),
            got: measurements.len().min(measurements.sigma.len()),
        });
    }
    let dim = initial.dim();
    let ns = topology.n_sensors();
    let n_unknowns = dim * ns;
    let rho = DVector::from_column_slice(&measurements.measured);
    let weights: Vec<f64> = measurements.sigma.iter().map(|s| 1.0 / (s * s)).collect();

    let mut estimate = initial.clone();
    let mut step_norms = Vec::new();
    let mut status = SolverStatus::MaxIterationsReached;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        let geometry = match build_geometry_matrix(topology, &estimate) {
            Ok(g) => g,
            Err(_) => {
                status = SolverStatus::ZeroDistanceLink;
                break;
            }
        };
        let g = geometry.to_dense();
        let residual = &rho - range_vector(topology, &estimate);
        // Normal equations of the weighted linearized problem.
        let mut wg = g.clone();
        let mut wr = residual.clone();
        for (k, &w) in weights.iter().enumerate() {
            for c in 0..n_unknowns {
                wg[(k, c)] *= w;
            }
            wr[k] *= w;
        }
        let normal = g.transpose() * &wg;
        let rhs = g.transpose() * &wr;
        let step = match Cholesky::new(normal) {
            Some(chol) => chol.solve(&rhs),
            None => {
                status = SolverStatus::SingularNormalMatrix;
                break;
            }
        };
        iterations += 1;
        for s in 0..ns {
            for m in 0..dim {
                estimate.point_mut(s)[m] += step[s * dim + m];
            }
        }
        let step_norm = step.norm();
        step_norms.push(step_norm);
        if diverged(&estimate, ns, step_norm) {
            status = SolverStatus::Diverged;
            break;
        }
        if step_norm <= opts.step_tol {
            status = SolverStatus::Converged;
            break;
        }
    }

    let final_residual_norm = (&rho - range_vector(topology, &estimate)).norm();
    Ok(SolverResult {
        positions: estimate,
        iterations,
        converged: status == SolverStatus::Converged,
        status,
        final_residual_norm,
        step_norms,
    })
}

fn range_vector(topology: &NetworkTopology, positions: &NodePositions) -> DVector<f64> {
    DVector::from_iterator(
        topology.n_links(),
        topology
            .links()
            .iter()
            .map(|&(a, b)| positions.distance(a, b)),
    )
}

/// Divergence rule: a step far beyond the unit-square diagonal, or an
/// estimate well outside the deployment region.
fn diverged(estimate: &NodePositions, n_sensors: usize, step_norm: f64) -> bool {
    let diagonal = (estimate.dim() as f64).sqrt();
    if step_norm > 10.0 * diagonal {
        return true;
    }
    (0..n_sensors).any(|s| {
        estimate
            .point(s)
            .iter()
            .any(|&c| !c.is_finite() || !(-10.0..=11.0).contains(&c))
    })
}

/// Sample covariance of localization errors over repeated noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// `dim * n_sensors` square sample covariance of estimate minus truth.
    pub matrix: DMatrix<f64>,
    /// Trials that converged and entered the estimate.
    pub trials_used: usize,
    /// Trials dropped for divergence or numeric failure.
    pub failed: usize,
}

/// Runs `trials` independent noise draws, solving each from a truth
/// initialization, and returns the sample covariance of the sensor-position
/// error vectors. Trials run in parallel on derived streams; the reduction
/// is in trial order, so results do not depend on the worker count.
pub fn empirical_error_covariance(
    topology: &NetworkTopology,
    truth: &NodePositions,
    sigma: f64,
    trials: usize,
    master_seed: u64,
) -> Result<CovarianceEstimate, LaterationError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(LaterationError::InvalidSigma(sigma));
    }
    if truth.n_nodes() != topology.n_nodes() {
        return Err(LaterationError::NodeCountMismatch {
            expected: topology.n_nodes(),
            got: truth.n_nodes(),
        });
    }
    let dim = truth.dim();
    let ns = topology.n_sensors();
    let opts = SolverOptions::default();
    let errors: Vec<Option<DVector<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t as u64);
            let measurements = synthesize_measurements(topology, truth, sigma, &mut rng).ok()?;
            let result = solve_wls(topology, truth, &measurements, &opts).ok()?;
            if !result.converged {
                return None;
            }
            let mut err = DVector::zeros(dim * ns);
            for s in 0..ns {
                for m in 0..dim {
                    err[s * dim + m] = result.positions.point(s)[m] - truth.point(s)[m];
                }
            }
            Some(err)
        })
        .collect();

    let used: Vec<&DVector<f64>> = errors.iter().flatten().collect();
    if used.is_empty() {
        return Err(LaterationError::AllTrialsFailed(trials));
    }
    let n = used.len();
    let mut mean = DVector::zeros(dim * ns);
    for e in &used {
        mean += *e;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(dim * ns, dim * ns);
    for e in &used {
        let centered = *e - &mean;
        cov += &centered * centered.transpose();
    }
    cov /= (n.max(2) - 1) as f64;
    Ok(CovarianceEstimate {
        matrix: cov,
        trials_used: n,
        failed: trials - n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkTopology;
    use approx::assert_relative_eq;

    fn corner_star() -> (NetworkTopology, NodePositions) {
        let topo = NetworkTopology::new(1, 4, [(0, 1), (0, 2), (0, 3), (0, 4)]);
        let pos = NodePositions::from_points(
            2,
            &[
                vec![0.5, 0.5],
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
        )
        .unwrap();
        (topo, pos)
    }

    /// Rigid three-sensor network: chain sensors plus enough anchor links.
    fn rigid_instance() -> (NetworkTopology, NodePositions) {
        let topo = NetworkTopology::new(
            3,
            3,
            [
                (0, 1),
                (1, 2),
                (0, 2),
                (0, 3),
                (0, 4),
                (1, 4),
                (1, 5),
                (2, 3),
                (2, 5),
            ],
        );
        let pos = NodePositions::from_points(
            2,
            &[
                vec![0.2, 0.3],
                vec![0.7, 0.4],
                vec![0.5, 0.8],
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
        )
        .unwrap();
        (topo, pos)
    }

    fn noiseless(topo: &NetworkTopology, pos: &NodePositions) -> RangeMeasurementSet {
        let true_range: Vec<f64> = topo.links().iter().map(|&(a, b)| pos.distance(a, b)).collect();
        RangeMeasurementSet {
            measured: true_range.clone(),
            sigma: vec![1.0; true_range.len()],
            true_range,
        }
    }

    #[test]
    fn noiseless_single_sensor_converges_to_truth() {
        let (topo, truth) = corner_star();
        let meas = noiseless(&topo, &truth);
        let mut guess = truth.clone();
        guess.point_mut(0).copy_from_slice(&[0.4, 0.6]);
        let result = solve_wls(&topo, &guess, &meas, &SolverOptions::default()).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 10);
        assert_relative_eq!(result.positions.point(0)[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(result.positions.point(0)[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn noiseless_multi_sensor_recovery() {
        let (topo, truth) = rigid_instance();
        let meas = noiseless(&topo, &truth);
        let mut guess = truth.clone();
        for s in 0..3 {
            for m in 0..2 {
                guess.point_mut(s)[m] += 0.05;
            }
        }
        let result = solve_wls(&topo, &guess, &meas, &SolverOptions::default()).unwrap();
        assert!(result.converged, "status {:?}", result.status);
        for s in 0..3 {
            for m in 0..2 {
                assert_relative_eq!(
                    result.positions.point(s)[m],
                    truth.point(s)[m],
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn underdetermined_reports_singular() {
        // Fewer links than sensor coordinates.
        let topo = NetworkTopology::new(1, 1, [(0, 1)]);
        let pos = NodePositions::from_points(2, &[vec![0.5, 0.5], vec![0.0, 0.0]]).unwrap();
        let meas = noiseless(&topo, &pos);
        let result = solve_wls(&topo, &pos, &meas, &SolverOptions::default()).unwrap();
        assert!(!result.converged);
        assert_eq!(result.status, SolverStatus::SingularNormalMatrix);
    }

    #[test]
    fn two_anchor_outcomes_depend_on_geometry() {
        // Sensor centered between opposite corners: link directions are
        // collinear, so the square system is rank deficient.
        let topo = NetworkTopology::new(1, 2, [(0, 1), (0, 2)]);
        let collinear =
            NodePositions::from_points(2, &[vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]])
                .unwrap();
        let meas = noiseless(&topo, &collinear);
        let result = solve_wls(&topo, &collinear, &meas, &SolverOptions::default()).unwrap();
        assert!(!result.converged);
        // Spanning directions solve exactly.
        let spanning =
            NodePositions::from_points(2, &[vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 0.0]])
                .unwrap();
        let meas = noiseless(&topo, &spanning);
        let result = solve_wls(&topo, &spanning, &meas, &SolverOptions::default()).unwrap();
        assert!(result.converged);
    }

    #[test]
    fn zero_step_at_truth() {
        let (topo, truth) = corner_star();
        let meas = noiseless(&topo, &truth);
        let result = solve_wls(&topo, &truth, &meas, &SolverOptions::default()).unwrap();
        assert!(result.converged);
        assert_eq!(result.iterations, 1);
        assert!(result.step_norms[0] <= 1e-12);
    }

    #[test]
    fn translation_equivariance() {
        let (topo, truth) = rigid_instance();
        let meas = noiseless(&topo, &truth);
        let mut guess = truth.clone();
        guess.point_mut(1)[0] += 0.03;
        let base = solve_wls(&topo, &guess, &meas, &SolverOptions::default()).unwrap();
        let shift = [2.5, -1.25];
        // Divergence guard allows coordinates in [-10, 11].
        let shifted = solve_wls(
            &topo,
            &guess.translated(&shift),
            &noiseless(&topo, &truth.translated(&shift)),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(base.converged && shifted.converged);
        for s in 0..3 {
            for m in 0..2 {
                assert_relative_eq!(
                    shifted.positions.point(s)[m],
                    base.positions.point(s)[m] + shift[m],
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_centered() {
        let (topo, truth) = corner_star();
        let a = synthesize_measurements(&topo, &truth, 0.05, &mut trial_rng(9, 0)).unwrap();
        let b = synthesize_measurements(&topo, &truth, 0.05, &mut trial_rng(9, 0)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_measurements(&topo, &truth, 0.05, &mut trial_rng(9, 1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthesis_noiseless_limit() {
        let (topo, truth) = corner_star();
        let m = synthesize_measurements(&topo, &truth, 1e-15, &mut trial_rng(2, 0)).unwrap();
        for (rho, r) in m.measured.iter().zip(&m.true_range) {
            assert_relative_eq!(rho, r, epsilon = 1e-12);
        }
    }

    #[test]
    fn synthesis_gaussian_moments() {
        let topo = NetworkTopology::new(1, 1, [(0, 1)]);
        let pos = NodePositions::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let sigma = 0.3;
        let n = 100_000;
        let mut rng = trial_rng(4, 0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let m = synthesize_measurements(&topo, &pos, sigma, &mut rng).unwrap();
            let z = (m.measured[0] - m.true_range[0]) / sigma;
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "var {var}");
    }

    #[test]
    fn negative_sigma_rejected() {
        let (topo, truth) = corner_star();
        assert!(matches!(
            synthesize_measurements(&topo, &truth, -0.1, &mut trial_rng(0, 0)),
            Err(LaterationError::InvalidSigma(_))
        ));
    }

    #[test]
    fn covariance_matches_dop_scaling() {
        let (topo, truth) = corner_star();
        let sigma = 0.01;
        let est = empirical_error_covariance(&topo, &truth, sigma, 2000, 11).unwrap();
        assert_eq!(est.failed, 0);
        // Predicted covariance at the center: sigma^2 * diag(1/2, 1/2).
        let predicted = sigma * sigma * 0.5;
        for i in 0..2 {
            let got = est.matrix[(i, i)];
            assert!(
                (got - predicted).abs() / predicted < 0.10,
                "diagonal {i}: {got} vs {predicted}"
            );
        }
    }

    #[test]
    fn covariance_shrinks_with_sigma() {
        let (topo, truth) = corner_star();
        let est = empirical_error_covariance(&topo, &truth, 1e-9, 100, 5).unwrap();
        assert!(est.matrix.abs().max() < 1e-15);
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let (topo, truth) = corner_star();
        let meas = noiseless(&topo, &truth);
        let short = NodePositions::from_points(2, &[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            solve_wls(&topo, &short, &meas, &SolverOptions::default()),
            Err(LaterationError::NodeCountMismatch { .. })
        ));
        let mut bad = meas.clone();
        bad.measured.pop();
        bad.sigma.pop();
        assert!(matches!(
            solve_wls(&topo, &truth, &bad, &SolverOptions::default()),
            Err(LaterationError::MeasurementCountMismatch { .. })
        ));
    }
}
