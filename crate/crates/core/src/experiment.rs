//! Monte-Carlo validation harness.
//!
//! Runs repeated instance generation and DOP evaluation per configuration,
//! summarizes AGDOP sample statistics against the connectivity lower bound,
//! and sweeps whole grids of configurations. Trials and sweep points run in
//! parallel on derived random streams with index-ordered reductions, so any
//! fixed master seed gives bit-identical output regardless of worker count.

use crate::bound::lb_e_agdop;
use crate::geometry::{build_geometry_matrix, compute_dop};
use crate::randgraph::{derive_seed, generate, trial_rng, GenerateError, GraphModelSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A finite AGDOP sample at or above this value is treated, alongside the
/// singular samples, as evidence of an effectively non-localizable draw.
pub const EXTREME_AGDOP: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("all {0} trials produced singular geometry")]
    AllTrialsSingular(usize),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("empty sample")]
    EmptySample,
    #[error("quantile {0} is outside [0, 1]")]
    InvalidQuantile(f64),
}

/// How singular (infinite-DOP) trials enter the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularPolicy {
    /// Drop singular trials from the statistics, report their fraction.
    ExcludeAndCount,
    /// Keep them as infinite values; means and upper quantiles go infinite.
    PropagateInfinite,
}

/// One full experiment: a grid of model specs evaluated with common trial
/// count, master seed, and singular-sample policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub points: Vec<GraphModelSpec>,
    pub trials: usize,
    pub master_seed: u64,
    /// Range-noise level for optional lateration validation runs; the DOP
    /// statistics themselves are noise-free.
    pub noise_sigma: Option<f64>,
    pub singular_policy: SingularPolicy,
}

/// Five-number summary plus mean of the AGDOP sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgdopStats {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Outcome of one configuration's Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub spec: GraphModelSpec,
    pub trials: usize,
    /// Trials with a finite AGDOP.
    pub finite_trials: usize,
    pub singular_fraction: f64,
    /// Trials that were singular or exceeded [`EXTREME_AGDOP`].
    pub extreme_fraction: f64,
    /// Mean realized average sensor degree across trials.
    pub realized_delta_s: f64,
    /// Mean realized average anchor degree across trials.
    pub realized_delta_a: f64,
    /// Lower bound evaluated at the realized degrees above.
    pub lb_e_agdop: f64,
    pub agdop: AgdopStats,
    /// Set when the bound exceeds `dim^2/(dim+2)`, the regime where the
    /// expected AGDOP is likely infinite.
    pub likely_infinite_e_agdop: bool,
}

/// One trial's realized connectivity and AGDOP.
#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    sensor_links: usize,
    anchor_links: usize,
    agdop: Option<f64>,
}

fn evaluate_trials(spec: &GraphModelSpec, trials: usize, master_seed: u64) -> Vec<TrialOutcome> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t as u64);
            let (topology, positions) = generate(spec, &mut rng).expect("spec validated");
            let agdop = build_geometry_matrix(&topology, &positions)
                .ok()
                .map(|g| compute_dop(&g))
                .and_then(|report| report.agdop);
            TrialOutcome {
                sensor_links: topology.sensor_link_count(),
                anchor_links: topology.anchor_link_count(),
                agdop,
            }
        })
        .collect()
}

fn summarize(
    spec: &GraphModelSpec,
    outcomes: &[TrialOutcome],
    policy: SingularPolicy,
) -> Result<ConfigSummary, ExperimentError> {
    let trials = outcomes.len();
    let n = trials as f64;
    let ns = spec.n_sensors as f64;
    let realized_delta_s =
        outcomes.iter().map(|t| 2.0 * t.sensor_links as f64).sum::<f64>() / (n * ns);
    let realized_delta_a = outcomes.iter().map(|t| t.anchor_links as f64).sum::<f64>() / (n * ns);
    let finite: Vec<f64> = outcomes.iter().filter_map(|t| t.agdop).collect();
    if finite.is_empty() {
        return Err(ExperimentError::AllTrialsSingular(trials));
    }
    let singular = trials - finite.len();
    let extreme = singular + finite.iter().filter(|&&a| a >= EXTREME_AGDOP).count();

    let samples: Vec<f64> = match policy {
        SingularPolicy::ExcludeAndCount => finite,
        SingularPolicy::PropagateInfinite => outcomes
            .iter()
            .map(|t| t.agdop.unwrap_or(f64::INFINITY))
            .collect(),
    };
    let qs = quantiles(&samples, &[0.25, 0.5, 0.75])?;
    let agdop = AgdopStats {
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        min: samples.iter().cloned().fold(f64::INFINITY, f64::min),
        q1: qs[0],
        median: qs[1],
        q3: qs[2],
        max: samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };

    let dim = spec.dim as f64;
    let lb = lb_e_agdop(spec.n_sensors, realized_delta_s, realized_delta_a, spec.dim).lb_e_agdop;
    Ok(ConfigSummary {
        spec: spec.clone(),
        trials,
        finite_trials: trials - singular,
        singular_fraction: singular as f64 / n,
        extreme_fraction: extreme as f64 / n,
        realized_delta_s,
        realized_delta_a,
        lb_e_agdop: lb,
        agdop,
        likely_infinite_e_agdop: lb > dim * dim / (dim + 2.0),
    })
}

/// Runs all trials for one configuration and summarizes them.
///
/// Each trial generates an instance on its own derived stream and evaluates
/// AGDOP; the lower bound is computed from the degree averages pooled across
/// all trials. Statistics cover the finite samples under
/// [`SingularPolicy::ExcludeAndCount`]; under
/// [`SingularPolicy::PropagateInfinite`] singular trials contribute infinite
/// values instead.
pub fn run_config(
    spec: &GraphModelSpec,
    trials: usize,
    master_seed: u64,
    policy: SingularPolicy,
) -> Result<ConfigSummary, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    spec.validate()?;
    summarize(spec, &evaluate_trials(spec, trials, master_seed), policy)
}

/// Like [`run_config`], but splits the trials into exact realized-degree
/// classes and summarizes each class separately.
///
/// The models with emergent connectivity (link-probability, geometric,
/// nearest-neighbor) scatter their realized degrees across trials; a sample
/// drawn at above-average degree can legitimately undercut the bound
/// evaluated at the pooled mean. Conditioning on the exact realized link
/// counts `(K_S, K_A)` makes the bound comparison sharp: every class is a
/// configuration with certain `(n_sensors, delta_s, delta_a)` and its own
/// bound. Classes with fewer than `min_class_trials` trials or without a
/// finite sample are dropped; output is ordered by link counts.
pub fn run_config_degree_binned(
    spec: &GraphModelSpec,
    trials: usize,
    master_seed: u64,
    policy: SingularPolicy,
    min_class_trials: usize,
) -> Result<Vec<ConfigSummary>, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    spec.validate()?;
    let outcomes = evaluate_trials(spec, trials, master_seed);
    let mut classes: std::collections::BTreeMap<(usize, usize), Vec<TrialOutcome>> =
        std::collections::BTreeMap::new();
    for outcome in outcomes {
        classes
            .entry((outcome.sensor_links, outcome.anchor_links))
            .or_default()
            .push(outcome);
    }
    Ok(classes
        .values()
        .filter(|class| class.len() >= min_class_trials.max(1))
        .filter_map(|class| summarize(spec, class, policy).ok())
        .collect())
}

/// One sweep point's result; failures are recorded, not propagated, so a bad
/// grid point cannot abort its neighbors.
#[derive(Debug)]
pub struct SweepRecord {
    pub index: usize,
    pub spec: GraphModelSpec,
    pub outcome: Result<ConfigSummary, ExperimentError>,
}

/// Evaluates every grid point of the experiment, in grid order.
///
/// Each point gets its own derived seed, so the output is independent of
/// execution order and worker count. An empty grid yields an empty vector.
pub fn run_sweep(config: &ExperimentConfig) -> Vec<SweepRecord> {
    config
        .points
        .par_iter()
        .enumerate()
        .map(|(index, spec)| SweepRecord {
            index,
            spec: spec.clone(),
            outcome: run_config(
                spec,
                config.trials,
                derive_seed(config.master_seed, index as u64),
                config.singular_policy,
            ),
        })
        .collect()
}

/// Linear-interpolation quantiles on the sorted sample, inclusive endpoints:
/// quantile `q` sits at fractional position `q * (len - 1)`.
pub fn quantiles(samples: &[f64], qs: &[f64]) -> Result<Vec<f64>, ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    qs.iter()
        .map(|&q| {
            if !(0.0..=1.0).contains(&q) {
                return Err(ExperimentError::InvalidQuantile(q));
            }
            let position = q * (sorted.len() - 1) as f64;
            let lo = position.floor() as usize;
            let hi = position.ceil() as usize;
            let lower = sorted[lo];
            let upper = sorted[hi];
            if lower == upper {
                Ok(lower)
            } else {
                Ok(lower + (position - lo as f64) * (upper - lower))
            }
        })
        .collect()
}

/// Tukey box-whisker fences: values beyond `q3 + 1.5*IQR` (or below
/// `q1 - 1.5*IQR`) count as outliers.
pub fn tukey_fences(q1: f64, q3: f64) -> (f64, f64) {
    let iqr = q3 - q1;
    (q1 - 1.5 * iqr, q3 + 1.5 * iqr)
}
