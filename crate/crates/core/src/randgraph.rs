//! Random network instance generators.
//!
//! Three classic random-graph models (link-probability, geometric-threshold,
//! nearest-neighbor) plus an exact degree-targeted sampler that draws a fixed
//! number of links uniformly without replacement. Sensor positions are always
//! i.i.d. uniform over the unit hypercube; anchors follow the requested
//! placement.
//!
//! Reproducibility contract: generators are pure functions of
//! `(spec, rng stream)`. Use [`trial_rng`] to derive one independent stream
//! per trial from a master seed so trials can run in any order, on any number
//! of workers, and still produce identical instances.

use crate::model::{validate_topology, NetworkTopology, NodePositions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("link probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("geometric threshold must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("neighbor count k={k} must satisfy 1 <= k < {n_nodes}")]
    InfeasibleNeighborCount { k: usize, n_nodes: usize },
    #[error("sensor degree target {delta_s} with {n_sensors} sensors does not give an integer link count in range")]
    InfeasibleSensorDegree { delta_s: f64, n_sensors: usize },
    #[error("anchor degree target {delta_a} with {n_sensors} sensors and {n_anchors} anchors does not give an integer link count in range")]
    InfeasibleAnchorDegree {
        delta_a: f64,
        n_sensors: usize,
        n_anchors: usize,
    },
    #[error("corner placement in {dim} dimensions requires exactly {expected} anchors, got {got}")]
    CornerCountMismatch {
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("explicit anchor list has {got} entries, expected {expected}")]
    ExplicitCountMismatch { expected: usize, got: usize },
    #[error("explicit anchor {index} has {got} coordinates, expected {dim}")]
    ExplicitDimMismatch {
        index: usize,
        dim: usize,
        got: usize,
    },
    #[error("uniform-direction placement requires dimension 2, got {0}")]
    DirectionsNeedPlane(usize),
    #[error("at least one sensor node is required")]
    NoSensors,
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Random-graph model with its single connectivity parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphModel {
    /// Every admissible pair is linked independently with probability `p`.
    Erg { p: f64 },
    /// Pairs are linked iff their distance is at most `radius`.
    Rgg { radius: f64 },
    /// Every node links to its `k` nearest neighbors (union, then simplified).
    Rpg { k: usize },
    /// Exactly `n_sensors*delta_s/2` sensor pairs and `n_sensors*delta_a`
    /// anchor-sensor pairs, drawn uniformly without replacement.
    DegreeTarget { delta_s: f64, delta_a: f64 },
}

impl GraphModel {
    /// Short label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            GraphModel::Erg { .. } => "erg",
            GraphModel::Rgg { .. } => "rgg",
            GraphModel::Rpg { .. } => "rpg",
            GraphModel::DegreeTarget { .. } => "degree-target",
        }
    }

    /// Parameter string used in CSV output, e.g. `p=0.5`.
    pub fn param_string(&self) -> String {
        match self {
            GraphModel::Erg { p } => format!("p={p}"),
            GraphModel::Rgg { radius } => format!("r={radius}"),
            GraphModel::Rpg { k } => format!("k={k}"),
            GraphModel::DegreeTarget { delta_s, delta_a } => {
                format!("ds={delta_s};da={delta_a}")
            }
        }
    }
}

/// Where anchor nodes go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorPlacement {
    /// All `2^dim` corners of the unit hypercube; the anchor count must match.
    UnitSquareCorners,
    /// I.i.d. uniform over the unit hypercube.
    UniformRandom,
    /// Unit distance from the first sensor at i.i.d. uniform angles
    /// (2-D only). Intended for single-sensor polar experiments.
    UniformDirections,
    /// Caller-provided coordinates.
    Explicit(Vec<Vec<f64>>),
}

/// Full description of a random network family: model, sizes, dimensionality,
/// and anchor placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphModelSpec {
    #[serde(flatten)]
    pub model: GraphModel,
    pub n_sensors: usize,
    pub n_anchors: usize,
    pub dim: usize,
    pub anchor_placement: AnchorPlacement,
}

impl GraphModelSpec {
    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.dim == 0 {
            return Err(GenerateError::ZeroDimension);
        }
        if self.n_sensors == 0 {
            return Err(GenerateError::NoSensors);
        }
        let n = self.n_sensors + self.n_anchors;
        match &self.model {
            GraphModel::Erg { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(GenerateError::InvalidProbability(*p));
                }
            }
            GraphModel::Rgg { radius } => {
                if !(*radius > 0.0) {
                    return Err(GenerateError::InvalidRadius(*radius));
                }
            }
            GraphModel::Rpg { k } => {
                if *k == 0 || *k >= n {
                    return Err(GenerateError::InfeasibleNeighborCount {
                        k: *k,
                        n_nodes: n,
                    });
                }
            }
            GraphModel::DegreeTarget { delta_s, delta_a } => {
                degree_target_counts(self.n_sensors, self.n_anchors, *delta_s, *delta_a)?;
            }
        }
        match &self.anchor_placement {
            AnchorPlacement::UnitSquareCorners => {
                let expected = 1usize << self.dim;
                if self.n_anchors != expected {
                    return Err(GenerateError::CornerCountMismatch {
                        dim: self.dim,
                        expected,
                        got: self.n_anchors,
                    });
                }
            }
            AnchorPlacement::UniformDirections => {
                if self.dim != 2 {
                    return Err(GenerateError::DirectionsNeedPlane(self.dim));
                }
            }
            AnchorPlacement::Explicit(points) => {
                if points.len() != self.n_anchors {
                    return Err(GenerateError::ExplicitCountMismatch {
                        expected: self.n_anchors,
                        got: points.len(),
                    });
                }
                for (i, p) in points.iter().enumerate() {
                    if p.len() != self.dim {
                        return Err(GenerateError::ExplicitDimMismatch {
                            index: i,
                            dim: self.dim,
                            got: p.len(),
                        });
                    }
                }
            }
            AnchorPlacement::UniformRandom => {}
        }
        Ok(())
    }
}

/// Resolves a degree target into exact link counts `(K_S, K_A)`.
fn degree_target_counts(
    n_sensors: usize,
    n_anchors: usize,
    delta_s: f64,
    delta_a: f64,
) -> Result<(usize, usize), GenerateError> {
    const INT_TOL: f64 = 1e-9;
    let ks_f = n_sensors as f64 * delta_s / 2.0;
    let ka_f = n_sensors as f64 * delta_a;
    let ks = ks_f.round();
    let ka = ka_f.round();
    let max_ks = n_sensors * n_sensors.saturating_sub(1) / 2;
    let max_ka = n_sensors * n_anchors;
    if delta_s < 0.0 || (ks_f - ks).abs() > INT_TOL || ks < 0.0 || ks > max_ks as f64 {
        return Err(GenerateError::InfeasibleSensorDegree { delta_s, n_sensors });
    }
    if delta_a < 0.0 || (ka_f - ka).abs() > INT_TOL || ka < 0.0 || ka > max_ka as f64 {
        return Err(GenerateError::InfeasibleAnchorDegree {
            delta_a,
            n_sensors,
            n_anchors,
        });
    }
    Ok((ks as usize, ka as usize))
}

/// One independent, reproducible random stream per `(master seed, stream id)`.
///
/// Streams with distinct ids never overlap, so per-trial generation is
/// deterministic regardless of execution order or worker count.
pub fn trial_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed for a nested reproducible context (e.g. one sweep
/// point spawning its own trial streams).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one network instance from the spec's model.
///
/// Sensor positions are i.i.d. uniform over `[0,1]^dim`, anchors follow the
/// placement, links follow the model. The result always passes
/// [`validate_topology`].
pub fn generate<R: Rng + ?Sized>(
    spec: &GraphModelSpec,
    rng: &mut R,
) -> Result<(NetworkTopology, NodePositions), GenerateError> {
    spec.validate()?;
    let positions = sample_positions(spec, rng);
    let links = match &spec.model {
        GraphModel::Erg { p } => erg_links(spec, *p, rng),
        GraphModel::Rgg { radius } => rgg_links(spec, *radius, &positions),
        GraphModel::Rpg { k } => rpg_links(spec, *k, &positions),
        GraphModel::DegreeTarget { delta_s, delta_a } => {
            let (ks, ka) = degree_target_counts(spec.n_sensors, spec.n_anchors, *delta_s, *delta_a)?;
            degree_target_links(spec.n_sensors, spec.n_anchors, ks, ka, rng)
        }
    };
    let topology = NetworkTopology::new(spec.n_sensors, spec.n_anchors, links);
    debug_assert!(validate_topology(&topology).is_empty());
    Ok((topology, positions))
}

/// Draws an instance with exact realized average degrees.
///
/// Samples `n_sensors*delta_s/2` sensor pairs uniformly without replacement
/// from all sensor pairs, and `n_sensors*delta_a` anchor-sensor pairs from
/// all such pairs. The realized degree summary matches the targets exactly.
pub fn generate_degree_target<R: Rng + ?Sized>(
    n_sensors: usize,
    n_anchors: usize,
    delta_s: f64,
    delta_a: f64,
    dim: usize,
    anchor_placement: AnchorPlacement,
    rng: &mut R,
) -> Result<(NetworkTopology, NodePositions), GenerateError> {
    let spec = GraphModelSpec {
        model: GraphModel::DegreeTarget { delta_s, delta_a },
        n_sensors,
        n_anchors,
        dim,
        anchor_placement,
    };
    generate(&spec, rng)
}

fn sample_positions<R: Rng + ?Sized>(spec: &GraphModelSpec, rng: &mut R) -> NodePositions {
    let d = spec.dim;
    let n = spec.n_sensors + spec.n_anchors;
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..spec.n_sensors * d {
        coords.push(rng.random::<f64>());
    }
    // Whether an anchor can be redrawn on exact coincidence below.
    let mut resampleable = vec![true; n];
    match &spec.anchor_placement {
        AnchorPlacement::UnitSquareCorners => {
            for corner in 0..spec.n_anchors {
                for m in 0..d {
                    coords.push(((corner >> (d - 1 - m)) & 1) as f64);
                }
                resampleable[spec.n_sensors + corner] = false;
            }
        }
        AnchorPlacement::UniformRandom => {
            for _ in 0..spec.n_anchors * d {
                coords.push(rng.random::<f64>());
            }
        }
        AnchorPlacement::UniformDirections => {
            let (sx, sy) = (coords[0], coords[1]);
            for _ in 0..spec.n_anchors {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                coords.push(sx + angle.cos());
                coords.push(sy + angle.sin());
            }
        }
        AnchorPlacement::Explicit(points) => {
            for (i, p) in points.iter().enumerate() {
                coords.extend_from_slice(p);
                resampleable[spec.n_sensors + i] = false;
            }
        }
    }
    let mut positions = NodePositions::new(d, coords).expect("coords built to length");
    resample_coincident(&mut positions, &resampleable, rng);
    positions
}

/// Exactly coincident nodes break the unit direction vectors, so redraw the
/// later node of any coinciding pair. Coincidence has probability zero under
/// continuous sampling; this loop effectively never runs.
fn resample_coincident<R: Rng + ?Sized>(
    positions: &mut NodePositions,
    resampleable: &[bool],
    rng: &mut R,
) {
    let n = positions.n_nodes();
    for _ in 0..100 {
        let mut clean = true;
        'scan: for a in 0..n {
            for b in (a + 1)..n {
                if positions.distance(a, b) == 0.0 {
                    let victim = if resampleable[b] {
                        b
                    } else if resampleable[a] {
                        a
                    } else {
                        continue; // two fixed anchors; harmless, never linked
                    };
                    for c in positions.point_mut(victim) {
                        *c = rng.random::<f64>();
                    }
                    clean = false;
                    break 'scan;
                }
            }
        }
        if clean {
            return;
        }
    }
}

/// Admissible pairs in lexicographic order: every pair with at least one
/// sensor endpoint.
fn admissible_pairs(n_sensors: usize, n_nodes: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_nodes)
        .flat_map(move |a| ((a + 1)..n_nodes).map(move |b| (a, b)))
        .filter(move |&(a, _)| a < n_sensors)
}

fn erg_links<R: Rng + ?Sized>(spec: &GraphModelSpec, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    admissible_pairs(spec.n_sensors, spec.n_sensors + spec.n_anchors)
        .filter(|_| rng.random::<f64>() < p)
        .collect()
}

fn rgg_links(spec: &GraphModelSpec, radius: f64, positions: &NodePositions) -> Vec<(usize, usize)> {
    admissible_pairs(spec.n_sensors, spec.n_sensors + spec.n_anchors)
        .filter(|&(a, b)| positions.distance(a, b) <= radius)
        .collect()
}

fn rpg_links(spec: &GraphModelSpec, k: usize, positions: &NodePositions) -> Vec<(usize, usize)> {
    let n = spec.n_sensors + spec.n_anchors;
    let mut chosen = std::collections::BTreeSet::new();
    for node in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&m| m != node).collect();
        others.sort_by(|&a, &b| {
            positions
                .distance(node, a)
                .partial_cmp(&positions.distance(node, b))
                .expect("distances are finite")
                .then(a.cmp(&b))
        });
        for &neighbor in others.iter().take(k) {
            let pair = (node.min(neighbor), node.max(neighbor));
            if pair.0 < spec.n_sensors {
                chosen.insert(pair);
            }
        }
    }
    chosen.into_iter().collect()
}

fn degree_target_links<R: Rng + ?Sized>(
    n_sensors: usize,
    n_anchors: usize,
    k_s: usize,
    k_a: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let sensor_pairs: Vec<(usize, usize)> = (0..n_sensors)
        .flat_map(|a| ((a + 1)..n_sensors).map(move |b| (a, b)))
        .collect();
    let anchor_pairs: Vec<(usize, usize)> = (0..n_sensors)
        .flat_map(|s| (n_sensors..n_sensors + n_anchors).map(move |a| (s, a)))
        .collect();
    let mut links = Vec::with_capacity(k_s + k_a);
    let mut picked = rand::seq::index::sample(rng, sensor_pairs.len(), k_s).into_vec();
    picked.sort_unstable();
    links.extend(picked.into_iter().map(|i| sensor_pairs[i]));
    let mut picked = rand::seq::index::sample(rng, anchor_pairs.len(), k_a).into_vec();
    picked.sort_unstable();
    links.extend(picked.into_iter().map(|i| anchor_pairs[i]));
    links
}
