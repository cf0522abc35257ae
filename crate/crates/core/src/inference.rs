//! Bottom-up evaluation and top-down differentiation of the network
//! polynomial, plus exact induced-tree counting.
//!
//! Node values `V_k` and derivatives `D_k = dV_root / dV_k` are kept in log
//! space. Each pass visits every edge exactly once; [`PassStats`] records
//! the visits so callers can check the linear cost directly.

use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::graph::{GraphError, Instance, NodeKind, SpnGraph, Weights, NORMALIZATION_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("negative weight {weight} on a sum edge of node {node}")]
    NegativeWeight { node: usize, weight: f64 },
    #[error("trace was computed with a different weight set")]
    WeightsMismatch,
    #[error("trace belongs to a network with {expected} nodes, got {got}")]
    TraceShape { expected: usize, got: usize },
}

/// A non-negative real stored as its natural logarithm.
///
/// Zero is represented explicitly by `ln = -inf`; [`LogValue::is_zero`] is
/// the marker test.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogValue(f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan());
        LogValue(ln)
    }

    pub fn from_linear(x: f64) -> Self {
        debug_assert!(x >= 0.0);
        LogValue(x.ln())
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn to_linear(self) -> f64 {
        self.0.exp()
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    #[inline]
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero() || rhs.is_zero() {
            LogValue::ZERO
        } else {
            LogValue(self.0 + rhs.0)
        }
    }
}

impl Add for LogValue {
    type Output = LogValue;

    #[inline]
    fn add(self, rhs: LogValue) -> LogValue {
        let (hi, lo) = if self.0 >= rhs.0 {
            (self.0, rhs.0)
        } else {
            (rhs.0, self.0)
        };
        if lo == f64::NEG_INFINITY {
            return LogValue(hi);
        }
        LogValue(hi + (lo - hi).exp().ln_1p())
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Streaming log-sum-exp: one `exp` per pushed term.
#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn finish(self) -> LogValue {
        if self.max == f64::NEG_INFINITY {
            LogValue::ZERO
        } else {
            LogValue(self.max + self.scaled.ln())
        }
    }
}

/// Edge-visit instrumentation for one trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PassStats {
    pub forward_passes: u32,
    pub backward_passes: u32,
    pub forward_edge_visits: u64,
    pub backward_edge_visits: u64,
}

impl PassStats {
    pub fn total_edge_visits(&self) -> u64 {
        self.forward_edge_visits + self.backward_edge_visits
    }
}

/// Cached forward values and (after [`differentiate`]) backward derivatives
/// for one `(instance, weights)` pair.
#[derive(Clone, Debug)]
pub struct CircuitTrace {
    values: Vec<LogValue>,
    derivs: Option<Vec<LogValue>>,
    // product nodes only: number of zero-valued children and the log of the
    // product of the nonzero ones
    zero_children: Vec<u32>,
    nonzero_ln: Vec<f64>,
    instance: Instance,
    weights_tag: u64,
    root: usize,
    stats: PassStats,
}

impl CircuitTrace {
    #[inline]
    pub fn value(&self, k: crate::NodeId) -> LogValue {
        self.values[k.0]
    }

    pub fn values(&self) -> &[LogValue] {
        &self.values
    }

    pub fn root_value(&self) -> LogValue {
        self.values[self.root]
    }

    /// `D_k`; `None` before [`differentiate`] has run.
    #[inline]
    pub fn deriv(&self, k: crate::NodeId) -> Option<LogValue> {
        self.derivs.as_ref().map(|d| d[k.0])
    }

    pub fn derivs(&self) -> Option<&[LogValue]> {
        self.derivs.as_deref()
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn weights_tag(&self) -> u64 {
        self.weights_tag
    }

    pub fn stats(&self) -> PassStats {
        self.stats
    }
}

fn check_weights(graph: &SpnGraph, weights: &Weights) -> Result<(), InferenceError> {
    weights.check_shape(graph)?;
    for k in graph.sum_nodes() {
        if let Some(&w) = weights.node(k).iter().find(|&&w| w < 0.0 || w.is_nan()) {
            return Err(InferenceError::NegativeWeight { node: k.0, weight: w });
        }
    }
    Ok(())
}

/// One bottom-up pass: leaves are indicators (1 when marginalized), products
/// multiply, sums take the weighted sum. Weights need not be normalized.
pub fn evaluate(graph: &SpnGraph, weights: &Weights, instance: &Instance) -> Result<CircuitTrace, InferenceError> {
    check_weights(graph, weights)?;
    instance.check(graph)?;
    let n = graph.num_nodes();
    let mut values = vec![LogValue::ZERO; n];
    let mut zero_children = vec![0u32; n];
    let mut nonzero_ln = vec![0.0f64; n];
    let mut visits = 0u64;
    for &k in graph.topo_order() {
        let children = graph.children(k);
        visits += children.len() as u64;
        values[k.0] = match graph.kind(k) {
            NodeKind::Leaf { var, value } => match instance.get(var) {
                Some(x) if x != value => LogValue::ZERO,
                _ => LogValue::ONE,
            },
            NodeKind::Sum => {
                let mut acc = LogSum::new();
                for (&c, &w) in children.iter().zip(weights.node(k)) {
                    let v = values[c.0];
                    if w > 0.0 && !v.is_zero() {
                        acc.push(w.ln() + v.ln());
                    }
                }
                acc.finish()
            }
            NodeKind::Product => {
                let mut zeros = 0u32;
                let mut ln = 0.0;
                for &c in children {
                    let v = values[c.0];
                    if v.is_zero() {
                        zeros += 1;
                    } else {
                        ln += v.ln();
                    }
                }
                zero_children[k.0] = zeros;
                nonzero_ln[k.0] = ln;
                if zeros == 0 {
                    LogValue(ln)
                } else {
                    LogValue::ZERO
                }
            }
        };
    }
    Ok(CircuitTrace {
        values,
        derivs: None,
        zero_children,
        nonzero_ln,
        instance: instance.clone(),
        weights_tag: weights.tag(),
        root: graph.root().0,
        stats: PassStats {
            forward_passes: 1,
            forward_edge_visits: visits,
            ..PassStats::default()
        },
    })
}

/// One top-down pass filling `D_k = dV_root / dV_k` for every node.
///
/// A sum parent `k` passes `w_kj * D_k` to child `j`; a product parent passes
/// `D_k` times the product of the other children's values, read off the
/// cached zero count and nonzero log-product so that zero-valued children
/// need no division.
pub fn differentiate(graph: &SpnGraph, weights: &Weights, trace: &mut CircuitTrace) -> Result<(), InferenceError> {
    if trace.values.len() != graph.num_nodes() {
        return Err(InferenceError::TraceShape {
            expected: graph.num_nodes(),
            got: trace.values.len(),
        });
    }
    if weights.tag() != trace.weights_tag {
        return Err(InferenceError::WeightsMismatch);
    }
    let mut derivs = vec![LogValue::ZERO; graph.num_nodes()];
    derivs[graph.root().0] = LogValue::ONE;
    let mut visits = 0u64;
    for &k in graph.topo_order().iter().rev() {
        let children = graph.children(k);
        visits += children.len() as u64;
        let d = derivs[k.0];
        match graph.kind(k) {
            NodeKind::Leaf { .. } => {}
            NodeKind::Sum => {
                for (&c, &w) in children.iter().zip(weights.node(k)) {
                    if w > 0.0 && !d.is_zero() {
                        derivs[c.0] = derivs[c.0] + LogValue(d.ln() + w.ln());
                    }
                }
            }
            NodeKind::Product => {
                let zeros = trace.zero_children[k.0];
                let ln = trace.nonzero_ln[k.0];
                for &c in children {
                    let v = trace.values[c.0];
                    let siblings = match (zeros, v.is_zero()) {
                        (0, _) => LogValue(ln - v.ln()),
                        (1, true) => LogValue(ln),
                        _ => LogValue::ZERO,
                    };
                    derivs[c.0] = derivs[c.0] + d * siblings;
                }
            }
        }
    }
    trace.derivs = Some(derivs);
    trace.stats.backward_passes += 1;
    trace.stats.backward_edge_visits += visits;
    Ok(())
}

/// `ln V_root(x; w) - ln V_root(1; w)`; the zero marker when `x` has no mass.
///
/// The normalizing pass is skipped when the weights are locally normalized.
pub fn log_likelihood(graph: &SpnGraph, weights: &Weights, instance: &Instance) -> Result<LogValue, InferenceError> {
    let value = evaluate(graph, weights, instance)?.root_value();
    if value.is_zero() || weights.is_normalized(NORMALIZATION_TOLERANCE) {
        return Ok(value);
    }
    let norm = evaluate(graph, weights, &Instance::marginal(graph.num_vars()))?.root_value();
    Ok(LogValue(value.ln() - norm.ln()))
}

/// Number of distinct induced trees.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TreeCount(pub BigUint);

impl TreeCount {
    pub fn to_u64(&self) -> Option<u64> {
        u64::try_from(&self.0).ok()
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }
}

impl fmt::Display for TreeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The network polynomial at all-ones weights and leaves, in exact integers.
pub fn count_induced_trees(graph: &SpnGraph) -> TreeCount {
    let mut counts: Vec<BigUint> = vec![BigUint::zero(); graph.num_nodes()];
    for &k in graph.topo_order() {
        let children = graph.children(k);
        counts[k.0] = match graph.kind(k) {
            NodeKind::Leaf { .. } => BigUint::one(),
            NodeKind::Sum => children.iter().map(|c| &counts[c.0]).sum(),
            NodeKind::Product => children.iter().fold(BigUint::one(), |acc, c| acc * &counts[c.0]),
        };
    }
    TreeCount(std::mem::take(&mut counts[graph.root().0]))
}
