//! Exact posterior moments of the sum-node weights after one observation.
//!
//! With a factorized Dirichlet prior the one-step posterior is a mixture
//! over induced trees, so the moment of `f(w_kj)` is a convex combination
//! of two closed-form Dirichlet moments:
//!
//! ```text
//! M_p(f_kj) = (1 - lambda_kj) * M_prior(f_kj) + lambda_kj * M_incremented(f_kj)
//! lambda_kj = w_kj * V_j(x; w) * D_k(x; w) / V_root(x; w)
//! ```
//!
//! where `w` are the prior means, and "incremented" adds one pseudo-count to
//! edge `(k, j)`. One evaluation pass and one differentiation pass give
//! `lambda` for every sum edge at once.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{DirichletPrior, Instance, NodeId, SpnGraph, Weights};
use crate::inference::{differentiate, evaluate, CircuitTrace, InferenceError, LogValue, PassStats};
use crate::special::digamma;

/// Slack tolerated on `lambda` outside `[0, 1]` before clamping.
pub const LAMBDA_CLAMP_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("instance has zero probability under the current weights")]
    ZeroEvidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MomentFunction {
    /// `f(w) = w`
    Mean,
    /// `f(w) = w^2`
    SecondMoment,
    /// `f(w) = ln w`
    LogMoment,
}

impl MomentFunction {
    pub const ALL: [MomentFunction; 3] = [
        MomentFunction::Mean,
        MomentFunction::SecondMoment,
        MomentFunction::LogMoment,
    ];
}

impl FromStr for MomentFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(MomentFunction::Mean),
            "second" => Ok(MomentFunction::SecondMoment),
            "log" => Ok(MomentFunction::LogMoment),
            other => Err(format!(
                "unknown moment function `{other}` (expected mean, second or log)"
            )),
        }
    }
}

impl fmt::Display for MomentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MomentFunction::Mean => "mean",
            MomentFunction::SecondMoment => "second",
            MomentFunction::LogMoment => "log",
        })
    }
}

/// Dirichlet means `alpha_kj / sum_j' alpha_kj'`.
pub fn mean_weights(prior: &DirichletPrior) -> Weights {
    Weights::from_nested(
        (0..prior.num_nodes())
            .map(|k| {
                let alpha = prior.node(NodeId(k));
                let total: f64 = alpha.iter().sum();
                alpha.iter().map(|a| a / total).collect()
            })
            .collect(),
    )
}

/// `E[f(w_j)]` under `Dir(alpha)`, or under `Dir(alpha + e_j)` when
/// `incremented` is set.
pub fn prior_moment(alpha: &[f64], j: usize, f: MomentFunction, incremented: bool) -> f64 {
    let bump = if incremented { 1.0 } else { 0.0 };
    let a = alpha[j] + bump;
    let total = alpha.iter().sum::<f64>() + bump;
    match f {
        MomentFunction::Mean => a / total,
        MomentFunction::SecondMoment => a * (a + 1.0) / (total * (total + 1.0)),
        MomentFunction::LogMoment => digamma(a) - digamma(total),
    }
}

/// `lambda_kj` for every sum edge, aligned with the child order.
#[derive(Clone, Debug)]
pub struct Lambdas {
    per_node: Vec<Vec<f64>>,
    root_value: LogValue,
    trace: CircuitTrace,
}

impl Lambdas {
    #[inline]
    pub fn node(&self, k: NodeId) -> &[f64] {
        &self.per_node[k.0]
    }

    /// `sum_j lambda_kj`
    pub fn node_mass(&self, k: NodeId) -> f64 {
        self.per_node[k.0].iter().sum()
    }

    /// `V_root(x; w)`, which is `Z_x` when `w` are the prior means.
    pub fn root_value(&self) -> LogValue {
        self.root_value
    }

    /// The evaluation and differentiation trace the lambdas were read from.
    pub fn trace(&self) -> &CircuitTrace {
        &self.trace
    }

    pub fn stats(&self) -> PassStats {
        self.trace.stats()
    }
}

/// `lambda_kj = w_kj V_j D_k / V_root` at arbitrary weights.
///
/// Shared by the moment computation (prior-mean weights) and the CCCP
/// update (current weights).
pub fn edge_lambdas(graph: &SpnGraph, weights: &Weights, instance: &Instance) -> Result<Lambdas, MomentError> {
    let mut trace = evaluate(graph, weights, instance)?;
    let root_value = trace.root_value();
    if root_value.is_zero() {
        return Err(MomentError::ZeroEvidence);
    }
    differentiate(graph, weights, &mut trace)?;
    let derivs = trace.derivs().expect("differentiated");
    let values = trace.values();
    let per_node = graph
        .node_ids()
        .map(|k| {
            let w = weights.node(k);
            if w.is_empty() {
                return Vec::new();
            }
            let d = derivs[k.0];
            graph
                .children(k)
                .iter()
                .zip(w)
                .map(|(&c, &wkj)| {
                    let v = values[c.0];
                    if d.is_zero() || v.is_zero() || wkj == 0.0 {
                        return 0.0;
                    }
                    let lambda = (wkj.ln() + v.ln() + d.ln() - root_value.ln()).exp();
                    debug_assert!(lambda <= 1.0 + 1e-9, "lambda {lambda} at node {k}");
                    if lambda > 1.0 && lambda <= 1.0 + LAMBDA_CLAMP_SLACK {
                        1.0
                    } else {
                        lambda
                    }
                })
                .collect()
        })
        .collect();
    Ok(Lambdas {
        per_node,
        root_value,
        trace,
    })
}

/// `lambda` at the prior-mean weights.
pub fn compute_lambdas(graph: &SpnGraph, prior: &DirichletPrior, instance: &Instance) -> Result<Lambdas, MomentError> {
    edge_lambdas(graph, &mean_weights(prior), instance)
}

/// `Z_x = V_root(x; prior means)`.
pub fn z_x(graph: &SpnGraph, prior: &DirichletPrior, instance: &Instance) -> Result<f64, MomentError> {
    Ok(evaluate(graph, &mean_weights(prior), instance)?
        .root_value()
        .to_linear())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeMoment {
    pub parent: NodeId,
    pub position: usize,
    pub child: NodeId,
    pub lambda: f64,
    pub prior: f64,
    pub incremented: f64,
    pub posterior: f64,
}

/// Moments for all sum edges, sorted by `(parent, position)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMomentReport {
    pub function: MomentFunction,
    pub edges: Vec<EdgeMoment>,
    /// `ln Z_x`
    pub log_evidence: LogValue,
    pub stats: PassStats,
}

impl EdgeMomentReport {
    pub fn edge(&self, parent: NodeId, child: NodeId) -> Option<&EdgeMoment> {
        self.edges.iter().find(|e| e.parent == parent && e.child == child)
    }
}

/// Posterior moments of `f(w_kj)` for every sum edge in two circuit passes.
pub fn compute_moments(
    graph: &SpnGraph,
    prior: &DirichletPrior,
    instance: &Instance,
    function: MomentFunction,
) -> Result<EdgeMomentReport, MomentError> {
    let lambdas = compute_lambdas(graph, prior, instance)?;
    let mut edges = Vec::with_capacity(graph.num_sum_edges());
    for k in graph.sum_nodes() {
        let alpha = prior.node(k);
        for ((position, &child), &lambda) in graph.children(k).iter().enumerate().zip(lambdas.node(k)) {
            let before = prior_moment(alpha, position, function, false);
            let after = prior_moment(alpha, position, function, true);
            edges.push(EdgeMoment {
                parent: k,
                position,
                child,
                lambda,
                prior: before,
                incremented: after,
                posterior: (1.0 - lambda) * before + lambda * after,
            });
        }
    }
    Ok(EdgeMomentReport {
        function,
        edges,
        log_evidence: lambdas.root_value(),
        stats: lambdas.stats(),
    })
}

/// Quadratic baseline: one extra evaluation pass per sum edge.
///
/// By multilinearity, `V_root(w) - V_root(w with w_kj = 0)` is the mass of
/// the trees through `(k, j)`, so `lambda_kj` is that difference over
/// `V_root`. Used to contrast the linear algorithm in benchmarks.
pub fn naive_lambdas(graph: &SpnGraph, weights: &Weights, instance: &Instance) -> Result<Vec<Vec<f64>>, MomentError> {
    let root = evaluate(graph, weights, instance)?.root_value();
    if root.is_zero() {
        return Err(MomentError::ZeroEvidence);
    }
    let total = root.to_linear();
    let mut scratch = weights.clone();
    let mut out: Vec<Vec<f64>> = graph.node_ids().map(|k| vec![0.0; weights.node(k).len()]).collect();
    for k in graph.sum_nodes() {
        for (j, slot) in out[k.0].iter_mut().enumerate() {
            let saved = scratch.node(k)[j];
            scratch.set(k, j, 0.0);
            let without = evaluate(graph, &scratch, instance)?.root_value().to_linear();
            scratch.set(k, j, saved);
            *slot = ((total - without) / total).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{fixtures, parse_model};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    fn s1_prior(a: f64, b: f64) -> (SpnGraph, DirichletPrior) {
        let g = parse_model(fixtures::S1).unwrap();
        let mut p = DirichletPrior::uniform(&g);
        p.set_node(&g, NodeId(0), vec![a, b]).unwrap();
        (g, p)
    }

    #[test]
    fn means_of_priors() {
        let g = parse_model(
            "node 0 sum\nnode 1 leaf 0 0\nnode 2 leaf 0 1\nnode 3 leaf 0 2\nedge 0 1 0.2\nedge 0 2 0.3\nedge 0 3 0.5\n",
        )
        .unwrap();
        let mut p = DirichletPrior::uniform(&g);
        p.set_node(&g, NodeId(0), vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(mean_weights(&p).node(NodeId(0)), &[0.25, 0.25, 0.5]);
        let (_, p) = s1_prior(1.0, 1.0);
        assert_eq!(mean_weights(&p).node(NodeId(0)), &[0.5, 0.5]);
        let (_, p) = s1_prior(2.0, 6.0);
        assert_eq!(mean_weights(&p).node(NodeId(0)), &[0.25, 0.75]);
    }

    #[test]
    fn closed_form_prior_moments() {
        let alpha = [1.0, 1.0];
        assert_eq!(prior_moment(&alpha, 0, MomentFunction::Mean, false), 0.5);
        assert!(close(
            prior_moment(&alpha, 0, MomentFunction::Mean, true),
            2.0 / 3.0,
            1e-15
        ));
        assert!(close(
            prior_moment(&alpha, 0, MomentFunction::SecondMoment, false),
            1.0 / 3.0,
            1e-15
        ));
        // E[ln w] under Beta(1, 1) is -1
        assert!(close(
            prior_moment(&alpha, 0, MomentFunction::LogMoment, false),
            -1.0,
            1e-14
        ));
        // Beta(2, 1): psi(2) - psi(3) = -1/2
        assert!(close(
            prior_moment(&alpha, 0, MomentFunction::LogMoment, true),
            -0.5,
            1e-14
        ));
    }

    #[test]
    fn s1_lambdas() {
        let (g, p) = s1_prior(2.0, 3.0);
        let l = compute_lambdas(&g, &p, &Instance::full(&[0, 0])).unwrap();
        assert_eq!(l.node(NodeId(0)), &[1.0, 0.0]);

        for (a, b) in [(1.0, 1.0), (2.0, 3.0), (0.3, 7.0)] {
            let (g, p) = s1_prior(a, b);
            let l = compute_lambdas(&g, &p, &Instance::marginal(2)).unwrap();
            let w = mean_weights(&p);
            assert!(close(l.node(NodeId(0))[0], w.node(NodeId(0))[0], 1e-14));
            assert!(close(l.node(NodeId(0))[1], w.node(NodeId(0))[1], 1e-14));
        }
    }

    #[test]
    fn s2_lambdas_at_fixture_weights() {
        let g = parse_model(fixtures::S2).unwrap();
        let l = edge_lambdas(&g, g.weights(), &Instance::full(&[0, 1])).unwrap();
        assert!(close(l.node(NodeId(0))[0], 1.0 / 3.0, 1e-14));
        assert!(close(l.node(NodeId(0))[1], 2.0 / 3.0, 1e-14));
        assert!(close(l.node(NodeId(3))[0], 1.0, 1e-14));
        assert_eq!(l.node(NodeId(3))[1], 0.0);
        assert_eq!(l.stats().total_edge_visits(), 2 * g.num_edges() as u64);

        // a prior whose means reproduce the fixture weights
        let mut p = DirichletPrior::uniform(&g);
        p.set_node(&g, NodeId(3), vec![3.0, 7.0]).unwrap();
        p.set_node(&g, NodeId(4), vec![6.0, 4.0]).unwrap();
        p.set_node(&g, NodeId(5), vec![2.0, 8.0]).unwrap();
        let viaprior = compute_lambdas(&g, &p, &Instance::full(&[0, 1])).unwrap();
        for k in g.sum_nodes() {
            for (a, b) in viaprior.node(k).iter().zip(l.node(k)) {
                assert!(close(*a, *b, 1e-14));
            }
        }
        assert!(close(z_x(&g, &p, &Instance::full(&[0, 1])).unwrap(), 0.18, 1e-14));
    }

    #[test]
    fn s1_moment_report() {
        let (g, p) = s1_prior(1.0, 1.0);
        let r = compute_moments(&g, &p, &Instance::full(&[0, 0]), MomentFunction::Mean).unwrap();
        assert_eq!(r.edges.len(), 2);
        let e1 = r.edge(NodeId(0), NodeId(1)).unwrap();
        assert_eq!(e1.lambda, 1.0);
        assert!(close(e1.posterior, 2.0 / 3.0, 1e-15));
        let e2 = r.edge(NodeId(0), NodeId(2)).unwrap();
        assert_eq!(e2.lambda, 0.0);
        assert_eq!(e2.posterior, e2.prior);
        assert_eq!(e2.posterior, 0.5);
        assert_eq!(r.stats.forward_passes, 1);
        assert_eq!(r.stats.backward_passes, 1);
    }

    #[test]
    fn z_x_values() {
        let (g, p) = s1_prior(1.0, 1.0);
        assert!(close(z_x(&g, &p, &Instance::full(&[0, 0])).unwrap(), 0.5, 1e-15));
        assert!(close(z_x(&g, &p, &Instance::marginal(2)).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn zero_evidence_is_an_error() {
        let (g, p) = s1_prior(1.0, 1.0);
        let mut w = mean_weights(&p);
        w.set(NodeId(0), 1, 0.0);
        assert_eq!(
            edge_lambdas(&g, &w, &Instance::full(&[1, 1])).unwrap_err(),
            MomentError::ZeroEvidence
        );
        assert_eq!(
            compute_moments(&g, &p, &Instance::full(&[0, 1]), MomentFunction::Mean).unwrap_err(),
            MomentError::ZeroEvidence
        );
    }

    #[test]
    fn naive_matches_two_pass() {
        let g = parse_model(fixtures::S2).unwrap();
        for x in [
            Instance::full(&[0, 1]),
            Instance::full(&[1, 0]),
            Instance::new(vec![None, Some(0)]),
        ] {
            let fast = edge_lambdas(&g, g.weights(), &x).unwrap();
            let slow = naive_lambdas(&g, g.weights(), &x).unwrap();
            for k in g.sum_nodes() {
                for (a, b) in fast.node(k).iter().zip(&slow[k.0]) {
                    assert!((a - b).abs() < 1e-12, "node {k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn parse_function_names() {
        assert_eq!("mean".parse::<MomentFunction>().unwrap(), MomentFunction::Mean);
        assert_eq!(
            "second".parse::<MomentFunction>().unwrap(),
            MomentFunction::SecondMoment
        );
        assert_eq!("log".parse::<MomentFunction>().unwrap(), MomentFunction::LogMoment);
        assert!("var".parse::<MomentFunction>().is_err());
        for f in MomentFunction::ALL {
            assert_eq!(f.to_string().parse::<MomentFunction>().unwrap(), f);
        }
    }
}
