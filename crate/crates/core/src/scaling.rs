//! Wall-clock sweeps of moment queries over growing random networks.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{DirichletPrior, Instance, SpnGraph};
use crate::moments::{compute_moments, edge_lambdas, mean_weights, naive_lambdas, MomentError, MomentFunction};
use crate::oracle::{generate_random_spn, sample_instance, GeneratorParams, OracleError};

/// Minimum wall time of one timed batch.
const MIN_BATCH: Duration = Duration::from_millis(20);

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub min_edges: usize,
    pub max_edges: usize,
    /// Number of sizes, spaced geometrically between the bounds.
    pub steps: usize,
    pub seed: u64,
    /// Also time the quadratic one-pass-per-edge baseline.
    pub naive: bool,
    /// Skip the baseline on networks with more edges than this.
    pub naive_max_edges: usize,
    /// Timed batches per size; the median is reported.
    pub repetitions: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            min_edges: 1_000,
            max_edges: 100_000,
            steps: 5,
            seed: 0,
            naive: false,
            naive_max_edges: 20_000,
            repetitions: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub target_edges: usize,
    pub edges: usize,
    pub nodes: usize,
    pub seconds_per_query: f64,
    pub seconds_per_edge: f64,
    pub naive_seconds_per_query: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Least-squares slope of `ln(seconds_per_query)` against `ln(edges)`.
    pub fn log_log_slope(&self) -> Option<f64> {
        let points: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| ((r.edges as f64).ln(), r.seconds_per_query.ln()))
            .collect();
        slope(&points)
    }

    pub fn naive_log_log_slope(&self) -> Option<f64> {
        let points: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.naive_seconds_per_query.map(|t| ((r.edges as f64).ln(), t.ln())))
            .collect();
        slope(&points)
    }

    /// Largest over smallest `seconds_per_edge`.
    pub fn per_edge_spread(&self) -> f64 {
        let per_edge = self.rows.iter().map(|r| r.seconds_per_edge);
        let max = per_edge.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = per_edge.fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Geometric grid of `steps` edge targets from `min` to `max`.
pub fn edge_targets(min: usize, max: usize, steps: usize) -> Vec<usize> {
    match steps {
        0 => vec![],
        1 => vec![min],
        _ => {
            let ratio = (max as f64 / min as f64).powf(1.0 / (steps - 1) as f64);
            (0..steps)
                .map(|i| (min as f64 * ratio.powi(i as i32)).round() as usize)
                .collect()
        }
    }
}

/// Smallest generated network, growing the variable count by a quarter at a
/// time, with at least `target` edges.
pub fn network_for_edges(target: usize, seed: u64) -> Result<SpnGraph, OracleError> {
    let mut num_vars = 2usize;
    loop {
        let depth = 2 * (num_vars as f64).log2().ceil() as usize + 3;
        let params = GeneratorParams {
            seed,
            num_vars,
            depth,
            sum_fanout: 2,
            product_fanout: 2,
            dag_merge_probability: 0.0,
            arity: 2,
        };
        let graph = generate_random_spn(&params)?;
        if graph.num_edges() >= target {
            return Ok(graph);
        }
        num_vars = (num_vars + 1).max(num_vars * 5 / 4);
    }
}

/// Median seconds per call of `f`, over `repetitions` batches each running
/// for at least `MIN_BATCH`.
pub fn time_per_call<F: FnMut()>(repetitions: usize, mut f: F) -> f64 {
    f();
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        let mut calls = 0u32;
        while start.elapsed() < MIN_BATCH {
            f();
            calls += 1;
        }
        samples.push(start.elapsed().as_secs_f64() / calls as f64);
    }
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// An instance with positive probability: a sample with every other
/// variable marginalized.
pub fn query_instance(graph: &SpnGraph, prior: &DirichletPrior, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = sample_instance(graph, &mean_weights(prior), &mut rng);
    Instance::new(
        sample
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { *v } else { None })
            .collect(),
    )
}

pub fn run_sweep(config: &SweepConfig) -> Result<BenchReport, SweepError> {
    let mut rows = Vec::new();
    for target in edge_targets(config.min_edges, config.max_edges, config.steps) {
        let graph = network_for_edges(target, config.seed)?;
        let prior = DirichletPrior::uniform(&graph);
        let instance = query_instance(&graph, &prior, config.seed);
        compute_moments(&graph, &prior, &instance, MomentFunction::Mean)?;
        let seconds = time_per_call(config.repetitions, || {
            std::hint::black_box(compute_moments(&graph, &prior, &instance, MomentFunction::Mean).unwrap());
        });
        let naive = if config.naive && graph.num_edges() <= config.naive_max_edges {
            let weights = mean_weights(&prior);
            Some(time_per_call(config.repetitions, || {
                std::hint::black_box(naive_lambdas(&graph, &weights, &instance).unwrap());
            }))
        } else {
            None
        };
        rows.push(BenchRow {
            target_edges: target,
            edges: graph.num_edges(),
            nodes: graph.num_nodes(),
            seconds_per_query: seconds,
            seconds_per_edge: seconds / graph.num_edges() as f64,
            naive_seconds_per_query: naive,
        });
    }
    Ok(BenchReport { rows })
}

/// Evaluation edge visits of one linear-time `lambda` query.
pub fn edge_visits(graph: &SpnGraph, prior: &DirichletPrior, instance: &Instance) -> Result<u64, MomentError> {
    Ok(edge_lambdas(graph, &mean_weights(prior), instance)?
        .stats()
        .total_edge_visits())
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Generator(#[from] OracleError),
    #[error(transparent)]
    Moment(#[from] MomentError),
}
