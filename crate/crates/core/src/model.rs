//! Domain types for cooperative localization networks.
//!
//! A network is a simple graph over `N = n_sensors + n_anchors` nodes.
//! Sensors occupy indices `0..n_sensors`, anchors the rest. Node indices are
//! 0-based everywhere in this crate; the CLI layer converts to and from the
//! 1-based convention used in instance files.
//!
//! Topology ([`NetworkTopology`]) and geometry ([`NodePositions`]) are kept
//! separate on purpose: expectations over node placement are taken with links
//! fixed, and expectations over links are taken afterwards, so most operations
//! want exactly one of the two.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unordered node pair, stored canonically as `(lo, hi)`.
pub type Link = (usize, usize);

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("network has no sensor nodes")]
    NoSensors,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("coordinate count {got} is not a multiple of dimension {dim}")]
    RaggedCoordinates { got: usize, dim: usize },
}

/// Structural problems reported by [`validate_topology`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A link connects a node to itself.
    SelfLoop { node: usize },
    /// The same unordered pair appears more than once.
    DuplicateLink { a: usize, b: usize },
    /// Both endpoints are anchors; such links carry no information.
    AnchorToAnchorLink { a: usize, b: usize },
    /// A link endpoint is not a valid node index.
    NodeOutOfRange { a: usize, b: usize, n_nodes: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::DuplicateLink { a, b } => write!(f, "duplicate link ({a}, {b})"),
            Violation::AnchorToAnchorLink { a, b } => {
                write!(f, "anchor-to-anchor link ({a}, {b})")
            }
            Violation::NodeOutOfRange { a, b, n_nodes } => {
                write!(f, "link ({a}, {b}) references a node >= {n_nodes}")
            }
        }
    }
}

/// A sensor network graph: node roles plus the ranging-link set.
///
/// Pure connectivity; coordinates live in [`NodePositions`]. Construction is
/// permissive so that malformed inputs can be inspected with
/// [`validate_topology`] instead of being rejected wholesale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    n_sensors: usize,
    n_anchors: usize,
    links: Vec<Link>,
}

impl NetworkTopology {
    /// Builds a topology, canonicalizing each link to `(min, max)` order.
    pub fn new(
        n_sensors: usize,
        n_anchors: usize,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let links = links
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        Self {
            n_sensors,
            n_anchors,
            links,
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_anchors(&self) -> usize {
        self.n_anchors
    }

    pub fn n_nodes(&self) -> usize {
        self.n_sensors + self.n_anchors
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn is_sensor(&self, node: usize) -> bool {
        node < self.n_sensors
    }

    /// Number of sensor-to-sensor links.
    pub fn sensor_link_count(&self) -> usize {
        self.links
            .iter()
            .filter(|&&(a, b)| self.is_sensor(a) && self.is_sensor(b))
            .count()
    }

    /// Number of anchor-to-sensor links.
    pub fn anchor_link_count(&self) -> usize {
        self.links
            .iter()
            .filter(|&&(a, b)| self.is_sensor(a) != self.is_sensor(b))
            .count()
    }

    /// Sensors with no incident links. Not an invariant violation: an
    /// isolated sensor simply makes the DOP matrix singular, which downstream
    /// code reports rather than rejects.
    pub fn isolated_sensors(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.n_sensors];
        for &(a, b) in &self.links {
            if a < self.n_sensors {
                degree[a] += 1;
            }
            if b < self.n_sensors {
                degree[b] += 1;
            }
        }
        degree
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == 0)
            .map(|(n, _)| n)
            .collect()
    }
}

/// Checks the simple-graph and link-class invariants.
///
/// Returns an empty list iff the topology is valid: no self-loops, no
/// duplicate links, no anchor-to-anchor links, all endpoints in range.
pub fn validate_topology(topology: &NetworkTopology) -> Vec<Violation> {
    let n = topology.n_nodes();
    let mut violations = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in topology.links() {
        if a == b {
            violations.push(Violation::SelfLoop { node: a });
            continue;
        }
        if a >= n || b >= n {
            violations.push(Violation::NodeOutOfRange { a, b, n_nodes: n });
            continue;
        }
        if !topology.is_sensor(a) && !topology.is_sensor(b) {
            violations.push(Violation::AnchorToAnchorLink { a, b });
        }
        if !seen.insert((a, b)) {
            violations.push(Violation::DuplicateLink { a, b });
        }
    }
    violations
}

/// Per-sensor link counts split by neighbor type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDegrees {
    pub total: usize,
    pub sensor: usize,
    pub anchor: usize,
}

/// Average degrees over sensor nodes, the connectivity metric everything
/// downstream is parameterized by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    /// Mean total degree over sensors.
    pub avg_degree: f64,
    /// Mean number of sensor neighbors over sensors.
    pub avg_sensor_degree: f64,
    /// Mean number of anchor neighbors over sensors.
    pub avg_anchor_degree: f64,
    /// One entry per sensor node, in node order.
    pub per_sensor: Vec<NodeDegrees>,
}

/// Counts per-sensor degrees and averages them over sensor nodes only.
///
/// The identities `n_sensors * avg_sensor_degree == 2 * K_S` and
/// `n_sensors * avg_anchor_degree == K_A` hold exactly for valid topologies.
pub fn degree_summary(topology: &NetworkTopology) -> Result<DegreeSummary, ModelError> {
    let ns = topology.n_sensors();
    if ns == 0 {
        return Err(ModelError::NoSensors);
    }
    let mut per_sensor = vec![
        NodeDegrees {
            total: 0,
            sensor: 0,
            anchor: 0,
        };
        ns
    ];
    for &(a, b) in topology.links() {
        for (node, other) in [(a, b), (b, a)] {
            if node < ns {
                per_sensor[node].total += 1;
                if other < ns {
                    per_sensor[node].sensor += 1;
                } else {
                    per_sensor[node].anchor += 1;
                }
            }
        }
    }
    let sum_s: usize = per_sensor.iter().map(|d| d.sensor).sum();
    let sum_a: usize = per_sensor.iter().map(|d| d.anchor).sum();
    let avg_sensor_degree = sum_s as f64 / ns as f64;
    let avg_anchor_degree = sum_a as f64 / ns as f64;
    Ok(DegreeSummary {
        avg_degree: (sum_s + sum_a) as f64 / ns as f64,
        avg_sensor_degree,
        avg_anchor_degree,
        per_sensor,
    })
}

/// Coordinates for every node of a network, flat row-major storage.
///
/// Node `n`'s coordinate vector is `coords[n*dim..(n+1)*dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePositions {
    dim: usize,
    coords: Vec<f64>,
}

impl NodePositions {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if coords.len() % dim != 0 {
            return Err(ModelError::RaggedCoordinates {
                got: coords.len(),
                dim,
            });
        }
        Ok(Self { dim, coords })
    }

    /// Builds from one coordinate vector per node; each must have `dim` entries.
    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(ModelError::RaggedCoordinates { got: p.len(), dim });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn point_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.point(a)
            .iter()
            .zip(self.point(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Returns a copy with every node shifted by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim);
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| c + shift[i % self.dim])
            .collect();
        Self {
            dim: self.dim,
            coords,
        }
    }
}
