//! Geometry matrix and dilution-of-precision computation.
//!
//! The geometry matrix is the Jacobian of link distances with respect to
//! sensor coordinates: one row per link, one `dim`-wide column block per
//! sensor. A row carries the unit direction vector `v = (p_i - p_j) / r` in
//! the head sensor's block and `-v` in the tail sensor's block; anchor
//! endpoints contribute no block. The DOP matrix is `(G'G)^-1`; its diagonal
//! measures how strongly range noise is amplified into per-coordinate
//! position error.

use crate::model::{NetworkTopology, NodePositions};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The normal matrix is declared singular when its smallest eigenvalue falls
/// at or below this fraction of the largest. Infinite DOP is a meaningful
/// outcome (a network that is not finitely localizable), so singularity is
/// reported, never thrown.
pub const SINGULARITY_RATIO: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("link {index} between nodes {a} and {b} has zero length")]
    ZeroDistanceLink { index: usize, a: usize, b: usize },
    #[error("positions describe {got} nodes, topology has {expected}")]
    NodeCountMismatch { expected: usize, got: usize },
}

/// One row of the geometry matrix in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryRow {
    /// Unit direction vector of the link, head minus tail over distance.
    pub direction: Vec<f64>,
    /// Sensor whose column block receives `+direction`, if the head is a sensor.
    pub head: Option<usize>,
    /// Sensor whose column block receives `-direction`, if the tail is a sensor.
    pub tail: Option<usize>,
}

/// Sparse geometry matrix: `n_links` rows by `dim * n_sensors` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMatrix {
    dim: usize,
    n_sensors: usize,
    rows: Vec<GeometryRow>,
}

impl GeometryMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.dim * self.n_sensors
    }

    pub fn rows(&self) -> &[GeometryRow] {
        &self.rows
    }

    /// Materializes the full dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n_rows(), self.n_cols());
        for (k, row) in self.rows.iter().enumerate() {
            if let Some(s) = row.head {
                for (m, v) in row.direction.iter().enumerate() {
                    g[(k, s * self.dim + m)] = *v;
                }
            }
            if let Some(s) = row.tail {
                for (m, v) in row.direction.iter().enumerate() {
                    g[(k, s * self.dim + m)] = -*v;
                }
            }
        }
        g
    }

    /// Accumulates `F = G'G` without materializing `G`.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut f = DMatrix::zeros(self.n_cols(), self.n_cols());
        for row in &self.rows {
            let v = &row.direction;
            for m1 in 0..d {
                for m2 in 0..d {
                    let prod = v[m1] * v[m2];
                    if let Some(s) = row.head {
                        f[(s * d + m1, s * d + m2)] += prod;
                    }
                    if let Some(s) = row.tail {
                        f[(s * d + m1, s * d + m2)] += prod;
                    }
                    if let (Some(h), Some(t)) = (row.head, row.tail) {
                        f[(h * d + m1, t * d + m2)] -= prod;
                        f[(t * d + m1, h * d + m2)] -= prod;
                    }
                }
            }
        }
        f
    }
}

/// Per-instance DOP figures.
///
/// When the normal matrix is singular the DOP fields are unset and only the
/// flag and condition estimate carry information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopReport {
    /// Diagonal of `(G'G)^-1`, one entry per sensor coordinate.
    pub per_coord_dop: Option<Vec<f64>>,
    /// Trace of the DOP matrix.
    pub gdop: Option<f64>,
    /// GDOP divided by the number of sensors. Defined without a square root;
    /// take `sqrt` for comparison with literature that uses the rooted form.
    pub agdop: Option<f64>,
    pub singular: bool,
    /// Largest over smallest eigenvalue of the normal matrix; infinite when
    /// the smallest is not strictly positive.
    pub condition_estimate: f64,
}

impl DopReport {
    /// AGDOP with singularity mapped to infinity.
    pub fn agdop_or_infinite(&self) -> f64 {
        self.agdop.unwrap_or(f64::INFINITY)
    }
}

/// Builds the geometry matrix of an instance.
///
/// Row `k` holds `+v_k` in the column block of the link's head sensor and
/// `-v_k` in the block of its tail sensor, where `v_k` is the unit vector
/// from tail to head. Anchor endpoints contribute no block.
pub fn build_geometry_matrix(
    topology: &NetworkTopology,
    positions: &NodePositions,
) -> Result<GeometryMatrix, GeometryError> {
    if positions.n_nodes() != topology.n_nodes() {
        return Err(GeometryError::NodeCountMismatch {
            expected: topology.n_nodes(),
            got: positions.n_nodes(),
        });
    }
    let dim = positions.dim();
    let mut rows = Vec::with_capacity(topology.n_links());
    for (index, &(a, b)) in topology.links().iter().enumerate() {
        let r = positions.distance(a, b);
        if r <= 0.0 {
            return Err(GeometryError::ZeroDistanceLink { index, a, b });
        }
        let direction: Vec<f64> = positions
            .point(a)
            .iter()
            .zip(positions.point(b))
            .map(|(pa, pb)| (pa - pb) / r)
            .collect();
        rows.push(GeometryRow {
            direction,
            head: topology.is_sensor(a).then_some(a),
            tail: topology.is_sensor(b).then_some(b),
        });
    }
    Ok(GeometryMatrix {
        dim,
        n_sensors: topology.n_sensors(),
        rows,
    })
}

/// Computes per-coordinate DOP, GDOP, and AGDOP from a geometry matrix.
///
/// Uses a symmetric eigendecomposition of `F = G'G`: the eigenvalue ratio
/// decides singularity (see [`SINGULARITY_RATIO`]) and the eigenpairs give
/// the diagonal of the inverse directly.
pub fn compute_dop(g: &GeometryMatrix) -> DopReport {
    let n = g.n_cols();
    if n == 0 || g.n_rows() < n {
        // A wide matrix can never have full column rank.
        return DopReport {
            per_coord_dop: None,
            gdop: None,
            agdop: None,
            singular: true,
            condition_estimate: f64::INFINITY,
        };
    }
    let f = g.normal_matrix();
    let eigen = f.symmetric_eigen();
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lambda_min = eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition_estimate = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };
    if lambda_max <= 0.0 || lambda_min <= SINGULARITY_RATIO * lambda_max {
        return DopReport {
            per_coord_dop: None,
            gdop: None,
            agdop: None,
            singular: true,
            condition_estimate,
        };
    }
    let q = &eigen.eigenvectors;
    let per_coord: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| q[(i, j)] * q[(i, j)] / eigen.eigenvalues[j])
                .sum()
        })
        .collect();
    let gdop: f64 = per_coord.iter().sum();
    DopReport {
        agdop: Some(gdop / g.n_sensors() as f64),
        gdop: Some(gdop),
        per_coord_dop: Some(per_coord),
        singular: false,
        condition_estimate,
    }
}

/// Closed-form GDOP for one sensor ranged by anchors at the given planar
/// angular coordinates: `N_A` over the sum of squared sines of pairwise
/// angle differences. Collinear layouts give an infinite value; the zero
/// test allows floating-point noise in the sines (`sin(pi)` is not exactly
/// zero), so layouts within rounding error of collinear count as singular.
pub fn single_sensor_gdop(angles: &[f64]) -> f64 {
    let n = angles.len();
    let mut denom = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            denom += (angles[j] - angles[i]).sin().powi(2);
            pairs += 1;
        }
    }
    if denom > pairs as f64 * 1e-28 {
        n as f64 / denom
    } else {
        f64::INFINITY
    }
}
