//! Expectation structure of the normal matrix and the connectivity lower
//! bound on expected average GDOP.
//!
//! Averaging `F = G'G` over node positions with links held fixed collapses
//! every direction outer product to `I/dim`, leaving a matrix determined by
//! the graph alone: `1/dim` times the graph Laplacian restricted to sensor
//! rows and columns, expanded per coordinate. Averaging again over uniformly
//! drawn links leaves a two-parameter matrix whose inverse trace has a closed
//! form via a rank-one update, which is the bound evaluated here.

use crate::model::{degree_summary, NetworkTopology};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("expected normal matrix needs at least 2 sensors when the sensor degree is positive")]
    TooFewSensors,
    #[error("expected normal matrix is singular: average anchor degree is 0")]
    SingularExpectedNormal,
    #[error("sample matrices at indices {0:?} are not invertible")]
    SingularSamples(Vec<usize>),
    #[error("empty matrix sample")]
    EmptySample,
    #[error("sample matrices must all be square with equal size")]
    ShapeMismatch,
}

/// Expectation of the normal matrix over node positions, links fixed.
///
/// Stored as the per-coordinate factor: an `n_sensors` square matrix with
/// `degree(i)/dim` on the diagonal and `-1/dim` where two sensors share a
/// link. The full expectation is this factor expanded by a `dim`-size
/// identity block per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionExpectedNormal {
    per_coordinate: DMatrix<f64>,
    dim: usize,
}

impl PositionExpectedNormal {
    /// The `n_sensors` by `n_sensors` per-coordinate factor.
    pub fn per_coordinate(&self) -> &DMatrix<f64> {
        &self.per_coordinate
    }

    /// Kronecker expansion to the full `dim * n_sensors` square matrix.
    pub fn full(&self) -> DMatrix<f64> {
        self.per_coordinate.kronecker(&DMatrix::identity(self.dim, self.dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Builds the position-averaged normal matrix of a topology.
///
/// Equals `1/dim` times the graph Laplacian with anchor rows and columns
/// deleted; isolated sensors produce an all-zero row and column.
pub fn position_expected_normal(topology: &NetworkTopology, dim: usize) -> PositionExpectedNormal {
    let ns = topology.n_sensors();
    let d = dim as f64;
    let mut m = DMatrix::zeros(ns, ns);
    for &(a, b) in topology.links() {
        if a < ns {
            m[(a, a)] += 1.0 / d;
        }
        if b < ns {
            m[(b, b)] += 1.0 / d;
        }
        if a < ns && b < ns {
            m[(a, b)] -= 1.0 / d;
            m[(b, a)] -= 1.0 / d;
        }
    }
    PositionExpectedNormal {
        per_coordinate: m,
        dim,
    }
}

/// Expectation of the per-coordinate normal matrix over both positions and
/// uniformly drawn links, given average degrees: `avg_degree/dim` on the
/// diagonal, `-avg_sensor_degree/(dim*(n_sensors-1))` elsewhere.
pub fn connectivity_expected_normal(
    n_sensors: usize,
    avg_degree: f64,
    avg_sensor_degree: f64,
    dim: usize,
) -> Result<DMatrix<f64>, BoundError> {
    if n_sensors == 0 || (n_sensors < 2 && avg_sensor_degree > 0.0) {
        return Err(BoundError::TooFewSensors);
    }
    let d = dim as f64;
    let diagonal = avg_degree / d;
    let off = if n_sensors > 1 {
        -avg_sensor_degree / (d * (n_sensors - 1) as f64)
    } else {
        0.0
    };
    Ok(DMatrix::from_fn(n_sensors, n_sensors, |i, j| {
        if i == j {
            diagonal
        } else {
            off
        }
    }))
}

/// The closed-form lower bound on expected average GDOP, together with the
/// rank-one-update parameters used to derive it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityBound {
    /// `(dim^2/delta) * (n_s-1+delta_s/delta_a) / (n_s-1+delta_s/delta)`;
    /// infinite when the anchor degree is 0.
    pub lb_e_agdop: f64,
    /// Diagonal scale of the expected normal matrix: `(delta + delta_s/(n_s-1))/dim`.
    pub eta: f64,
    /// Rank-one coupling: `delta_s / (delta*(n_s-1) + delta_s)`.
    pub zeta: f64,
    pub n_sensors: usize,
    pub delta_s: f64,
    pub delta_a: f64,
    pub dim: usize,
}

/// Evaluates the closed-form lower bound from connectivity parameters alone.
///
/// With a single sensor the bound reduces to `dim^2 / delta_a` (the sensor
/// degree is vacuous and is treated as zero). A zero anchor degree yields an
/// infinite bound, reported as a value rather than an error.
pub fn lb_e_agdop(n_sensors: usize, delta_s: f64, delta_a: f64, dim: usize) -> ConnectivityBound {
    let d = dim as f64;
    if n_sensors <= 1 {
        let lb = if delta_a > 0.0 {
            d * d / delta_a
        } else {
            f64::INFINITY
        };
        return ConnectivityBound {
            lb_e_agdop: lb,
            eta: delta_a / d,
            zeta: 0.0,
            n_sensors,
            delta_s: 0.0,
            delta_a,
            dim,
        };
    }
    let delta = delta_s + delta_a;
    let ns1 = (n_sensors - 1) as f64;
    let eta = (delta + delta_s / ns1) / d;
    let zeta = if delta > 0.0 {
        delta_s / (delta * ns1 + delta_s)
    } else {
        0.0
    };
    let lb = if delta_a > 0.0 {
        (d * d / delta) * (ns1 + delta_s / delta_a) / (ns1 + delta_s / delta)
    } else {
        f64::INFINITY
    };
    ConnectivityBound {
        lb_e_agdop: lb,
        eta,
        zeta,
        n_sensors,
        delta_s,
        delta_a,
        dim,
    }
}

/// Convenience: the bound evaluated at a topology's realized average degrees.
pub fn lb_for_topology(topology: &NetworkTopology, dim: usize) -> Option<ConnectivityBound> {
    let s = degree_summary(topology).ok()?;
    Some(lb_e_agdop(
        topology.n_sensors(),
        s.avg_sensor_degree,
        s.avg_anchor_degree,
        dim,
    ))
}

/// Independent oracle for [`lb_e_agdop`]: numerically inverts the dense
/// expected normal matrix and returns `dim * trace(inverse) / n_sensors`.
/// Shares no arithmetic with the closed form.
pub fn lb_via_direct_inverse(
    n_sensors: usize,
    delta_s: f64,
    delta_a: f64,
    dim: usize,
) -> Result<f64, BoundError> {
    if delta_a <= 0.0 {
        // The all-ones vector is an exact null direction.
        return Err(BoundError::SingularExpectedNormal);
    }
    let expected = connectivity_expected_normal(n_sensors, delta_s + delta_a, delta_s, dim)?;
    let inverse = expected
        .try_inverse()
        .ok_or(BoundError::SingularExpectedNormal)?;
    Ok(dim as f64 * inverse.trace() / n_sensors as f64)
}

/// Statistical positive-semidefiniteness gap between the sample mean of
/// matrix inverses and the inverse of the sample mean.
///
/// Returns the smallest eigenvalue of `mean(F^-1) - mean(F)^-1`. For samples
/// from any distribution of positive-definite matrices this is nonnegative
/// in expectation; a Monte-Carlo estimate may dip slightly below zero, so
/// callers should compare against a standard-error-scale tolerance rather
/// than zero.
pub fn psd_gap_check(samples: &[DMatrix<f64>]) -> Result<f64, BoundError> {
    let first = samples.first().ok_or(BoundError::EmptySample)?;
    let n = first.nrows();
    if first.ncols() != n {
        return Err(BoundError::ShapeMismatch);
    }
    let mut mean = DMatrix::zeros(n, n);
    let mut mean_inverse = DMatrix::zeros(n, n);
    let mut singular = Vec::new();
    for (i, f) in samples.iter().enumerate() {
        if f.shape() != (n, n) {
            return Err(BoundError::ShapeMismatch);
        }
        match f.clone().try_inverse() {
            Some(inv) => mean_inverse += inv,
            None => singular.push(i),
        }
        mean += f;
    }
    if !singular.is_empty() {
        return Err(BoundError::SingularSamples(singular));
    }
    let count = samples.len() as f64;
    mean /= count;
    mean_inverse /= count;
    let inv_of_mean = mean
        .try_inverse()
        .ok_or_else(|| BoundError::SingularSamples(Vec::new()))?;
    let mut gap = mean_inverse - inv_of_mean;
    // Symmetrize away accumulation drift before the eigensolve.
    gap = (&gap + gap.transpose()) * 0.5;
    let eigen = gap.symmetric_eigen();
    Ok(eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkTopology;
    use approx::assert_relative_eq;

    fn chain_topology() -> NetworkTopology {
        NetworkTopology::new(3, 1, [(0, 1), (1, 2), (2, 3)])
    }

    #[test]
    fn chain_per_coordinate_factor() {
        let xi = position_expected_normal(&chain_topology(), 2);
        let expected = [
            [0.5, -0.5, 0.0],
            [-0.5, 1.0, -0.5],
            [0.0, -0.5, 1.0],
        ];
        let m = xi.per_coordinate();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(m[(i, j)], expected[i][j]);
            }
        }
    }

    #[test]
    fn chain_full_expansion() {
        let xi = position_expected_normal(&chain_topology(), 2);
        let full = xi.full();
        assert_eq!(full.shape(), (6, 6));
        let expected = [
            [0.5, 0.0, -0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, -0.5, 0.0, 0.0],
            [-0.5, 0.0, 1.0, 0.0, -0.5, 0.0],
            [0.0, -0.5, 0.0, 1.0, 0.0, -0.5],
            [0.0, 0.0, -0.5, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, -0.5, 0.0, 1.0],
        ];
        for i in 0..6 {
            for j in 0..6 {
                assert_relative_eq!(full[(i, j)], expected[i][j]);
            }
        }
    }

    #[test]
    fn isolated_sensor_gives_zero_row() {
        let t = NetworkTopology::new(3, 1, [(0, 1), (0, 3)]);
        let xi = position_expected_normal(&t, 2);
        let m = xi.per_coordinate();
        for j in 0..3 {
            assert_eq!(m[(2, j)], 0.0);
            assert_eq!(m[(j, 2)], 0.0);
        }
    }

    #[test]
    fn factor_matches_truncated_laplacian() {
        // Independent construction: full-graph Laplacian, anchors deleted.
        let t = NetworkTopology::new(3, 2, [(0, 1), (1, 2), (2, 3), (0, 4), (1, 4)]);
        let n = t.n_nodes();
        let mut lap: DMatrix<f64> = DMatrix::zeros(n, n);
        for &(a, b) in t.links() {
            lap[(a, a)] += 1.0;
            lap[(b, b)] += 1.0;
            lap[(a, b)] -= 1.0;
            lap[(b, a)] -= 1.0;
        }
        let dim = 3usize;
        let xi = position_expected_normal(&t, dim);
        let m = xi.per_coordinate();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(m[(i, j)], lap[(i, j)] / dim as f64);
            }
        }
    }

    #[test]
    fn trace_identity() {
        let t = chain_topology();
        let xi = position_expected_normal(&t, 2);
        let summary = degree_summary(&t).unwrap();
        assert_relative_eq!(
            xi.per_coordinate().trace(),
            t.n_sensors() as f64 * summary.avg_degree / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn connectivity_expected_normal_chain_degrees() {
        // Degrees of the chain: delta = 5/3, delta_s = 4/3.
        let m = connectivity_expected_normal(3, 5.0 / 3.0, 4.0 / 3.0, 2).unwrap();
        assert_relative_eq!(m[(0, 0)], 5.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 1)], -1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(m[(2, 1)], -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn connectivity_expected_normal_noncooperative_is_diagonal() {
        let m = connectivity_expected_normal(4, 3.0, 0.0, 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.5 } else { 0.0 };
                assert_relative_eq!(m[(i, j)], want);
            }
        }
    }

    #[test]
    fn connectivity_expected_normal_two_sensors() {
        let m = connectivity_expected_normal(2, 3.0, 1.0, 2).unwrap();
        assert_relative_eq!(m[(0, 0)], 1.5);
        assert_relative_eq!(m[(0, 1)], -0.5);
    }

    #[test]
    fn too_few_sensors_rejected() {
        assert!(matches!(
            connectivity_expected_normal(1, 2.0, 1.0, 2),
            Err(BoundError::TooFewSensors)
        ));
        // One sensor with no sensor links is fine.
        let m = connectivity_expected_normal(1, 4.0, 0.0, 2).unwrap();
        assert_relative_eq!(m[(0, 0)], 2.0);
    }

    #[test]
    fn closed_form_reference_values() {
        assert_relative_eq!(lb_e_agdop(2, 1.0, 2.0, 2).lb_e_agdop, 1.5, epsilon = 1e-12);
        assert_relative_eq!(
            lb_e_agdop(2, 1.0, 3.0, 2).lb_e_agdop,
            16.0 / 15.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(lb_e_agdop(3, 2.0, 1.0, 2).lb_e_agdop, 2.0, epsilon = 1e-12);
        assert_relative_eq!(lb_e_agdop(3, 2.0, 2.0, 2).lb_e_agdop, 1.2, epsilon = 1e-12);
        // Direct evaluation with 16 sensors.
        assert_relative_eq!(
            lb_e_agdop(16, 4.0, 1.0, 2).lb_e_agdop,
            0.8 * 19.0 / 15.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_sensor_reduction() {
        let b = lb_e_agdop(1, 0.0, 4.0, 2);
        assert_relative_eq!(b.lb_e_agdop, 1.0);
        assert_relative_eq!(b.eta, 2.0);
        assert_eq!(b.zeta, 0.0);
        let b3 = lb_e_agdop(1, 0.0, 4.0, 3);
        assert_relative_eq!(b3.lb_e_agdop, 9.0 / 4.0);
    }

    #[test]
    fn zero_anchor_degree_gives_infinite_bound() {
        let b = lb_e_agdop(3, 2.0, 0.0, 2);
        assert!(b.lb_e_agdop.is_infinite());
        assert!(matches!(
            lb_via_direct_inverse(3, 2.0, 0.0, 2),
            Err(BoundError::SingularExpectedNormal)
        ));
    }

    #[test]
    fn rank_one_parameters() {
        // Two sensors, one sensor link, two anchor links each.
        let b = lb_e_agdop(2, 1.0, 2.0, 2);
        assert_relative_eq!(b.eta, 2.0);
        assert_relative_eq!(b.zeta, 0.25);
    }

    #[test]
    fn oracle_matches_closed_form_on_examples() {
        for (ns, ds, da) in [(2, 1.0, 2.0), (3, 2.0, 2.0), (16, 4.0, 1.0), (2, 1.0, 3.0)] {
            let closed = lb_e_agdop(ns, ds, da, 2).lb_e_agdop;
            let direct = lb_via_direct_inverse(ns, ds, da, 2).unwrap();
            assert_relative_eq!(closed, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn bound_decreases_in_anchor_degree() {
        let mut previous = f64::INFINITY;
        for da in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let lb = lb_e_agdop(8, 3.0, da, 2).lb_e_agdop;
            assert!(lb < previous);
            previous = lb;
        }
    }

    #[test]
    fn bound_approaches_inverse_degree_for_large_networks() {
        // Fixed total degree, growing sensor count.
        let delta = 6.0;
        let limit = 4.0 / delta;
        let lb = lb_e_agdop(100_000, 4.0, delta - 4.0, 2).lb_e_agdop;
        assert_relative_eq!(lb, limit, epsilon = 1e-3);
        assert!(lb >= limit);
    }

    #[test]
    fn lb_for_topology_uses_realized_degrees() {
        let t = NetworkTopology::new(2, 4, [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)]);
        let b = lb_for_topology(&t, 2).unwrap();
        assert_relative_eq!(b.lb_e_agdop, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn sherman_morrison_identity_holds() {
        // (I - uu')^-1 == I + uu'/(1 - u'u) whenever n*zeta < 1.
        for (n, zeta) in [(2usize, 0.25f64), (5, 0.1), (12, 0.05)] {
            let u = DMatrix::from_element(n, 1, zeta.sqrt());
            let uut = &u * u.transpose();
            let lhs = (DMatrix::identity(n, n) - &uut).try_inverse().unwrap();
            let rhs = DMatrix::identity(n, n) + &uut / (1.0 - n as f64 * zeta);
            assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }

    #[test]
    fn psd_gap_single_sample_is_zero() {
        let f = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let gap = psd_gap_check(&[f]).unwrap();
        assert_relative_eq!(gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_gap_two_scaled_identities() {
        let samples = vec![
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 4.0,
        ];
        // Mean of inverses 5/8 I, inverse of mean 2/5 I.
        let gap = psd_gap_check(&samples).unwrap();
        assert_relative_eq!(gap, 0.225, epsilon = 1e-12);
    }

    #[test]
    fn psd_gap_reports_singular_samples() {
        let samples = vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)];
        match psd_gap_check(&samples) {
            Err(BoundError::SingularSamples(idx)) => assert_eq!(idx, vec![1]),
            other => panic!("expected singular-sample error, got {other:?}"),
        }
    }

    #[test]
    fn psd_gap_checks_shapes() {
        let samples = vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)];
        assert!(matches!(
            psd_gap_check(&samples),
            Err(BoundError::ShapeMismatch)
        ));
        assert!(matches!(psd_gap_check(&[]), Err(BoundError::EmptySample)));
    }
}
