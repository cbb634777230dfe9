//! Numerical minimization of average GDOP over node positions.
//!
//! AGDOP depends only on the link direction vectors, so it is invariant under
//! translation, rotation, reflection, and uniform scaling of the whole
//! network. The search therefore fixes gauge: the first node is pinned at the
//! origin and the second node to the positive first axis. The objective is
//! nonconvex with singular boundaries (infinite penalty), so a multi-start
//! derivative-free simplex search is used instead of gradients.

use crate::geometry::{build_geometry_matrix, compute_dop};
use crate::model::{NetworkTopology, NodePositions};
use crate::randgraph::trial_rng;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("every restart ended on a singular geometry")]
    AllRestartsSingular,
    #[error("optimization needs at least 2 nodes, topology has {0}")]
    TooFewNodes(usize),
}

/// A fixed topology whose node coordinates are the free variables.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub topology: NetworkTopology,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Independent restarts from fresh uniform initial layouts.
    pub restarts: usize,
    /// Objective evaluation budget per restart.
    pub max_evals: usize,
    /// Convergence threshold on the simplex diameter.
    pub tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_evals: 20_000,
            tol: 1e-9,
        }
    }
}

/// Best geometry found over all restarts.
#[derive(Debug, Clone)]
pub struct AgdopOptimum {
    pub best_agdop: f64,
    /// Canonicalized coordinates: node 0 at the origin, node 1 on the
    /// positive first axis, and in 2-D a reflection-normalized orientation.
    pub best_positions: NodePositions,
    /// Restarts that ended on a finite objective value.
    pub finite_restarts: usize,
}

/// Multi-start simplex minimization of AGDOP over node positions.
///
/// Each restart draws all node positions uniformly from the unit square,
/// gauge-fixes them, and refines with a simplex search; singular geometries
/// carry an infinite penalty. Restarts run in parallel; ties break toward
/// the lower restart index, so results are reproducible for a fixed seed.
pub fn minimize_agdop(
    problem: &OptimizationProblem,
    opts: &OptimizerOptions,
    seed: u64,
) -> Result<AgdopOptimum, OptimizerError> {
    let n_nodes = problem.topology.n_nodes();
    if n_nodes < 2 {
        return Err(OptimizerError::TooFewNodes(n_nodes));
    }
    let dim = problem.dim;
    let outcomes: Vec<(f64, Vec<f64>)> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = trial_rng(seed, restart as u64);
            let initial = random_layout(n_nodes, dim, &mut rng);
            let x0 = params_from_positions(&initial);
            let objective = |params: &[f64]| agdop_objective(&problem.topology, dim, params);
            let best = nelder_mead(&objective, &x0, 0.1, opts.tol, opts.max_evals);
            (best.value, best.point)
        })
        .collect();

    let finite_restarts = outcomes.iter().filter(|(v, _)| v.is_finite()).count();
    let (best_value, best_params) = outcomes
        .into_iter()
        .reduce(|best, candidate| if candidate.0 < best.0 { candidate } else { best })
        .expect("at least one restart");
    if !best_value.is_finite() {
        return Err(OptimizerError::AllRestartsSingular);
    }
    let mut best_positions = positions_from_params(&best_params, n_nodes, dim);
    canonicalize_orientation(&mut best_positions);
    Ok(AgdopOptimum {
        best_agdop: best_value,
        best_positions,
        finite_restarts,
    })
}

/// Uniform angular anchor placement around a single sensor: angles
/// `2*pi*i/n` for `i = 1..=n`. This layout attains the minimum GDOP `4/n`
/// for `n >= 3`; for `n = 2` the layout is antipodal and GDOP is infinite.
pub fn optimal_single_sensor_angles(n_anchors: usize) -> Vec<f64> {
    (1..=n_anchors)
        .map(|i| std::f64::consts::TAU * i as f64 / n_anchors as f64)
        .collect()
}

/// Reference topology family: sensors chained in a cycle (a single link for
/// two sensors), each sensor ranged by its own block of dedicated anchors.
pub fn sensor_cycle_with_anchors(n_sensors: usize, anchors_per_sensor: usize) -> NetworkTopology {
    let mut links = Vec::new();
    match n_sensors {
        0 | 1 => {}
        2 => links.push((0, 1)),
        _ => {
            for s in 0..n_sensors {
                links.push((s, (s + 1) % n_sensors));
            }
        }
    }
    for s in 0..n_sensors {
        for j in 0..anchors_per_sensor {
            links.push((s, n_sensors + s * anchors_per_sensor + j));
        }
    }
    NetworkTopology::new(n_sensors, n_sensors * anchors_per_sensor, links)
}

fn random_layout<R: Rng + ?Sized>(n_nodes: usize, dim: usize, rng: &mut R) -> NodePositions {
    let coords = (0..n_nodes * dim).map(|_| rng.random::<f64>()).collect();
    NodePositions::new(dim, coords).expect("dim checked by caller")
}

/// Gauge-fixed parameter vector: node 0 is dropped (origin), node 1 keeps a
/// single coordinate along the first axis, remaining nodes keep all `dim`.
fn params_from_positions(positions: &NodePositions) -> Vec<f64> {
    let dim = positions.dim();
    let n = positions.n_nodes();
    // Translate node 0 to the origin.
    let origin: Vec<f64> = positions.point(0).to_vec();
    let mut shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            positions
                .point(i)
                .iter()
                .zip(&origin)
                .map(|(c, o)| c - o)
                .collect()
        })
        .collect();
    // Map node 1 onto the positive first axis with a Householder reflection;
    // AGDOP is reflection invariant, so this is a pure gauge choice.
    let r = shifted[1].iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut v: Vec<f64> = shifted[1].clone();
    v[0] -= r;
    let vv: f64 = v.iter().map(|c| c * c).sum();
    if vv > 1e-24 {
        for point in shifted.iter_mut() {
            let dot: f64 = point.iter().zip(&v).map(|(p, w)| p * w).sum();
            for (p, w) in point.iter_mut().zip(&v) {
                *p -= 2.0 * dot / vv * w;
            }
        }
    }
    let mut params = Vec::with_capacity(1 + dim * (n - 2));
    params.push(r);
    for point in shifted.iter().skip(2) {
        params.extend_from_slice(point);
    }
    params
}

fn positions_from_params(params: &[f64], n_nodes: usize, dim: usize) -> NodePositions {
    let mut coords = vec![0.0; n_nodes * dim];
    coords[dim] = params[0];
    coords[2 * dim..].copy_from_slice(&params[1..]);
    NodePositions::new(dim, coords).expect("coords built to length")
}

fn agdop_objective(topology: &NetworkTopology, dim: usize, params: &[f64]) -> f64 {
    let positions = positions_from_params(params, topology.n_nodes(), dim);
    match build_geometry_matrix(topology, &positions) {
        Ok(g) => compute_dop(&g).agdop_or_infinite(),
        Err(_) => f64::INFINITY,
    }
}

/// Reporting canonicalization for 2-D: flip node 1 to the positive axis if
/// the search wandered to negative values (a half-turn gauge image), then
/// reflect so the first off-axis node has positive second coordinate.
fn canonicalize_orientation(positions: &mut NodePositions) {
    if positions.dim() != 2 {
        return;
    }
    let n = positions.n_nodes();
    if positions.point(1)[0] < 0.0 {
        for i in 0..n {
            let p = positions.point_mut(i);
            p[0] = -p[0];
            p[1] = -p[1];
        }
    }
    let flip = (0..n)
        .map(|i| positions.point(i)[1])
        .find(|y| y.abs() > 1e-9);
    if let Some(y) = flip {
        if y < 0.0 {
            for i in 0..n {
                positions.point_mut(i)[1] *= -1.0;
            }
        }
    }
}

struct SimplexOutcome {
    point: Vec<f64>,
    value: f64,
}

/// Plain downhill simplex with reflection, expansion, contraction, shrink.
/// Terminates on simplex diameter or evaluation budget.
fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    initial_step: f64,
    tol: f64,
    max_evals: usize,
) -> SimplexOutcome {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const BETA: f64 = 0.5; // contraction
    const DELTA: f64 = 0.5; // shrink

    let n = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += initial_step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    while evals < max_evals {
        // Order best to worst.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diameter = simplex
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diameter <= tol {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (i, x) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        let f_reflected = eval(&reflected, &mut evals);

        if f_reflected < values[best] {
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + GAMMA * (c - w))
                .collect();
            let f_expanded = eval(&expanded, &mut evals);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted: Vec<f64> = if f_reflected < values[worst] {
                centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + BETA * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c + BETA * (w - c))
                    .collect()
            };
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                        *x = a + DELTA * (*x - a);
                    }
                    values[i] = eval(&simplex[i], &mut evals);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    SimplexOutcome {
        point: simplex.swap_remove(best),
        value: values[best],
    }
}
