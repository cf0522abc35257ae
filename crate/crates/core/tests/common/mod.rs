//! Seeded graphs, priors and instances shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spn_core::inference::count_induced_trees;
use spn_core::oracle::{generate_random_spn, sample_instance, GeneratorParams};
use spn_core::{DirichletPrior, Instance, NodeId, SpnGraph, Weights};

/// `count` random networks with at least two and at most `max_trees`
/// induced trees, in seed order.
pub fn random_graphs(count: usize, merge: f64, max_trees: u64, seed: u64) -> Vec<SpnGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let num_vars = rng.gen_range(2..=5);
        let params = GeneratorParams {
            seed: rng.gen(),
            num_vars,
            depth: rng.gen_range(3..=6),
            sum_fanout: rng.gen_range(2..=3),
            product_fanout: 2,
            dag_merge_probability: merge,
            arity: rng.gen_range(2..=3),
        };
        let Ok(graph) = generate_random_spn(&params) else {
            continue;
        };
        let trees = count_induced_trees(&graph).to_u64();
        if trees.is_some_and(|t| (2..=max_trees).contains(&t)) {
            out.push(graph);
        }
    }
    out
}

/// Hyperparameters drawn uniformly from `[0.6, 5)`.
pub fn random_prior<R: Rng>(graph: &SpnGraph, rng: &mut R) -> DirichletPrior {
    let alpha = graph
        .node_ids()
        .map(|k| {
            graph
                .weights()
                .node(k)
                .iter()
                .map(|_| rng.gen_range(0.6..5.0))
                .collect()
        })
        .collect();
    DirichletPrior::new(graph, alpha).unwrap()
}

/// Random strictly positive weights, normalized per sum node.
pub fn random_weights<R: Rng>(graph: &SpnGraph, rng: &mut R) -> Weights {
    let mut w = graph.weights().clone();
    for k in graph.sum_nodes() {
        let raw: Vec<f64> = w.node(k).iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (x, r) in w.node_mut(k).iter_mut().zip(raw) {
            *x = r / total;
        }
    }
    w
}

/// An instance with positive probability under `weights`: an ancestral
/// sample with each variable hidden with probability 0.4.
pub fn random_instance<R: Rng>(graph: &SpnGraph, weights: &Weights, rng: &mut R) -> Instance {
    let sample = sample_instance(graph, weights, rng);
    Instance::new(
        sample
            .values()
            .iter()
            .map(|&v| if rng.gen_bool(0.4) { None } else { v })
            .collect(),
    )
}

/// Uniformly random partial assignment, possibly with zero probability.
pub fn arbitrary_instance<R: Rng>(graph: &SpnGraph, rng: &mut R) -> Instance {
    Instance::new(
        (0..graph.num_vars())
            .map(|v| {
                if rng.gen_bool(0.3) {
                    None
                } else {
                    Some(rng.gen_range(0..graph.arity(v)))
                }
            })
            .collect(),
    )
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn sum_edges(graph: &SpnGraph) -> Vec<(NodeId, usize, NodeId)> {
    graph.sum_edges().collect()
}
