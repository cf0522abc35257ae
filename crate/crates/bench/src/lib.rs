//! Workloads shared by the criterion benchmarks.

use spn_core::scaling::{network_for_edges, query_instance};
use spn_core::{DirichletPrior, Instance, SpnGraph};

pub struct Workload {
    pub graph: SpnGraph,
    pub prior: DirichletPrior,
    pub instance: Instance,
}

/// Random network with at least `edges` edges, a flat prior and an instance
/// with positive probability.
pub fn workload(edges: usize, seed: u64) -> Workload {
    let graph = network_for_edges(edges, seed).expect("generator parameters are feasible");
    let prior = DirichletPrior::uniform(&graph);
    let instance = query_instance(&graph, &prior, seed);
    Workload { graph, prior, instance }
}
