//! Network structure: node kinds, adjacency, scopes and structural checks.
//!
//! A [`SpnGraph`] is immutable once built. Construction through
//! [`SpnBuilder`] guarantees a rooted DAG with dense node ids and a cached
//! children-before-parents order; the semantic properties (completeness,
//! decomposability, normalized sum weights) are checked separately by
//! [`validate`] so that broken models can still be loaded and reported on.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::BinaryHeap;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// Tolerance on `|sum_j w_kj - 1|` for a sum node to count as normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Sum,
    Product,
    /// Indicator `[x_var == value]`.
    Leaf {
        var: usize,
        value: usize,
    },
}

impl NodeKind {
    pub fn is_sum(self) -> bool {
        matches!(self, NodeKind::Sum)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("network has no nodes")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateNode(usize),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("node ids must be dense, id {0} is missing")]
    SparseIds(usize),
    #[error("parallel edge {parent} -> {child}")]
    ParallelEdge { parent: NodeId, child: NodeId },
    #[error("leaf {0} cannot have children")]
    LeafWithChildren(NodeId),
    #[error("missing weight on sum edge {parent} -> {child}")]
    MissingWeight { parent: NodeId, child: NodeId },
    #[error("weight on non-sum edge {parent} -> {child}")]
    UnexpectedWeight { parent: NodeId, child: NodeId },
    #[error("invalid weight {weight} on edge {parent} -> {child}")]
    InvalidWeight { parent: NodeId, child: NodeId, weight: f64 },
    #[error("leaf {node} uses variable {var} but only {num_vars} variables are declared")]
    VariableOutOfRange { node: NodeId, var: usize, num_vars: usize },
    #[error("cycle detected through edge {parent} -> {child}")]
    Cycle { parent: NodeId, child: NodeId },
    #[error("multiple roots: {0:?}")]
    MultipleRoots(Vec<NodeId>),
    #[error("instance has {got} values but the network has {expected} variables")]
    InstanceLength { expected: usize, got: usize },
    #[error("value {value} of variable {var} is outside its arity {arity}")]
    ValueOutOfRange { var: usize, value: usize, arity: usize },
    #[error("weight vector of node {node} has length {got}, expected {expected}")]
    WeightShape { node: NodeId, expected: usize, got: usize },
    #[error("non-positive hyperparameter {value} at node {node}")]
    NonPositiveHyperparameter { node: NodeId, value: f64 },
    #[error("node {node} has {expected} children but {got} hyperparameters were given")]
    HyperparameterLength { node: NodeId, expected: usize, got: usize },
    #[error("node {0} is not a sum node")]
    NotSumNode(NodeId),
}

/// Per-sum-edge weights, aligned with each node's child order.
///
/// Non-sum nodes carry an empty vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    per_node: Vec<Vec<f64>>,
}

impl Weights {
    pub fn from_nested(per_node: Vec<Vec<f64>>) -> Self {
        Weights { per_node }
    }

    /// All sum edges set to one; evaluating with these counts induced trees.
    pub fn ones(graph: &SpnGraph) -> Self {
        let per_node = graph
            .node_ids()
            .map(|k| match graph.kind(k) {
                NodeKind::Sum => vec![1.0; graph.children(k).len()],
                _ => Vec::new(),
            })
            .collect();
        Weights { per_node }
    }

    #[inline]
    pub fn node(&self, k: NodeId) -> &[f64] {
        &self.per_node[k.0]
    }

    pub fn node_mut(&mut self, k: NodeId) -> &mut [f64] {
        &mut self.per_node[k.0]
    }

    pub fn set(&mut self, k: NodeId, position: usize, weight: f64) {
        self.per_node[k.0][position] = weight;
    }

    pub fn num_nodes(&self) -> usize {
        self.per_node.len()
    }

    pub fn into_nested(self) -> Vec<Vec<f64>> {
        self.per_node
    }

    pub fn check_shape(&self, graph: &SpnGraph) -> Result<(), GraphError> {
        if self.per_node.len() != graph.num_nodes() {
            return Err(GraphError::WeightShape {
                node: NodeId(self.per_node.len().min(graph.num_nodes())),
                expected: graph.num_nodes(),
                got: self.per_node.len(),
            });
        }
        for k in graph.node_ids() {
            let expected = match graph.kind(k) {
                NodeKind::Sum => graph.children(k).len(),
                _ => 0,
            };
            let got = self.per_node[k.0].len();
            if got != expected {
                return Err(GraphError::WeightShape { node: k, expected, got });
            }
        }
        Ok(())
    }

    /// True when every non-empty weight vector sums to one within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.per_node
            .iter()
            .filter(|w| !w.is_empty())
            .all(|w| (w.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    /// Identifier of this exact weight set (hash of the bit patterns).
    pub fn tag(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for w in &self.per_node {
            w.len().hash(&mut hasher);
            for x in w {
                x.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

/// Dirichlet hyperparameters, one vector per sum node in child order.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPrior {
    alpha: Vec<Vec<f64>>,
}

impl DirichletPrior {
    /// All-ones hyperparameters, i.e. the uniform Dirichlet at every sum node.
    pub fn uniform(graph: &SpnGraph) -> Self {
        DirichletPrior {
            alpha: Weights::ones(graph).into_nested(),
        }
    }

    /// Unchecked construction for callers that maintain positivity themselves.
    pub(crate) fn from_raw(alpha: Vec<Vec<f64>>) -> Self {
        debug_assert!(alpha.iter().flatten().all(|&a| a > 0.0));
        DirichletPrior { alpha }
    }

    pub fn new(graph: &SpnGraph, alpha: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let weights = Weights::from_nested(alpha);
        weights.check_shape(graph).map_err(|e| match e {
            GraphError::WeightShape { node, expected, got } => GraphError::HyperparameterLength { node, expected, got },
            other => other,
        })?;
        let alpha = weights.into_nested();
        for (k, a) in alpha.iter().enumerate() {
            if let Some(&bad) = a.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(GraphError::NonPositiveHyperparameter {
                    node: NodeId(k),
                    value: bad,
                });
            }
        }
        Ok(DirichletPrior { alpha })
    }

    /// Replace the hyperparameters of one sum node.
    pub fn set_node(&mut self, graph: &SpnGraph, k: NodeId, alpha: Vec<f64>) -> Result<(), GraphError> {
        if k.0 >= graph.num_nodes() {
            return Err(GraphError::UnknownNode(k.0));
        }
        if !graph.kind(k).is_sum() {
            return Err(GraphError::NotSumNode(k));
        }
        let expected = graph.children(k).len();
        if alpha.len() != expected {
            return Err(GraphError::HyperparameterLength {
                node: k,
                expected,
                got: alpha.len(),
            });
        }
        if let Some(&bad) = alpha.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(GraphError::NonPositiveHyperparameter { node: k, value: bad });
        }
        self.alpha[k.0] = alpha;
        Ok(())
    }

    #[inline]
    pub fn node(&self, k: NodeId) -> &[f64] {
        &self.alpha[k.0]
    }

    pub fn concentration(&self, k: NodeId) -> f64 {
        self.alpha[k.0].iter().sum()
    }

    pub fn num_nodes(&self) -> usize {
        self.alpha.len()
    }
}

/// A partial assignment; `None` marginalizes the variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance(Vec<Option<usize>>);

impl Instance {
    pub fn new(values: Vec<Option<usize>>) -> Self {
        Instance(values)
    }

    /// Every variable marginalized.
    pub fn marginal(num_vars: usize) -> Self {
        Instance(vec![None; num_vars])
    }

    pub fn full(values: &[usize]) -> Self {
        Instance(values.iter().map(|&v| Some(v)).collect())
    }

    #[inline]
    pub fn get(&self, var: usize) -> Option<usize> {
        self.0[var]
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, graph: &SpnGraph) -> Result<(), GraphError> {
        if self.0.len() != graph.num_vars() {
            return Err(GraphError::InstanceLength {
                expected: graph.num_vars(),
                got: self.0.len(),
            });
        }
        for (var, value) in self.0.iter().enumerate() {
            if let Some(value) = *value {
                let arity = graph.arity(var);
                if value >= arity {
                    return Err(GraphError::ValueOutOfRange { var, value, arity });
                }
            }
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct SpnBuilder {
    kinds: Vec<Option<NodeKind>>,
    children: Vec<Vec<NodeId>>,
    weights: Vec<Vec<f64>>,
    declared_vars: Option<usize>,
}

impl SpnBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_vars(&mut self, num_vars: usize) -> &mut Self {
        self.declared_vars = Some(num_vars);
        self
    }

    pub fn add_node(&mut self, id: usize, kind: NodeKind) -> Result<NodeId, GraphError> {
        if id >= self.kinds.len() {
            self.kinds.resize(id + 1, None);
            self.children.resize_with(id + 1, Vec::new);
            self.weights.resize_with(id + 1, Vec::new);
        }
        if self.kinds[id].is_some() {
            return Err(GraphError::DuplicateNode(id));
        }
        self.kinds[id] = Some(kind);
        Ok(NodeId(id))
    }

    /// Add a node with the next free id.
    pub fn push_node(&mut self, kind: NodeKind) -> NodeId {
        let id = self.kinds.len();
        self.kinds.push(Some(kind));
        self.children.push(Vec::new());
        self.weights.push(Vec::new());
        NodeId(id)
    }

    pub fn kind(&self, id: usize) -> Option<NodeKind> {
        self.kinds.get(id).copied().flatten()
    }

    pub fn has_edge(&self, parent: NodeId, child: NodeId) -> bool {
        self.children.get(parent.0).is_some_and(|c| c.contains(&child))
    }

    /// Add `parent -> child`. The weight must be present iff `parent` is a sum.
    pub fn add_edge(&mut self, parent: usize, child: usize, weight: Option<f64>) -> Result<(), GraphError> {
        let parent_kind = self.kind(parent).ok_or(GraphError::UnknownNode(parent))?;
        self.kind(child).ok_or(GraphError::UnknownNode(child))?;
        let (p, c) = (NodeId(parent), NodeId(child));
        match (parent_kind, weight) {
            (NodeKind::Leaf { .. }, _) => return Err(GraphError::LeafWithChildren(p)),
            (NodeKind::Sum, None) => return Err(GraphError::MissingWeight { parent: p, child: c }),
            (NodeKind::Product, Some(_)) => return Err(GraphError::UnexpectedWeight { parent: p, child: c }),
            (NodeKind::Sum, Some(w)) if !w.is_finite() => {
                return Err(GraphError::InvalidWeight {
                    parent: p,
                    child: c,
                    weight: w,
                })
            }
            _ => {}
        }
        if self.children[parent].contains(&c) {
            return Err(GraphError::ParallelEdge { parent: p, child: c });
        }
        self.children[parent].push(c);
        if let Some(w) = weight {
            self.weights[parent].push(w);
        }
        Ok(())
    }

    pub fn build(self) -> Result<SpnGraph, GraphError> {
        if self.kinds.is_empty() {
            return Err(GraphError::Empty);
        }
        let kinds: Vec<NodeKind> = self
            .kinds
            .iter()
            .enumerate()
            .map(|(id, k)| k.ok_or(GraphError::SparseIds(id)))
            .collect::<Result<_, _>>()?;

        let mut arities: Vec<usize> = Vec::new();
        for kind in &kinds {
            if let NodeKind::Leaf { var, value } = *kind {
                if var >= arities.len() {
                    arities.resize(var + 1, 0);
                }
                arities[var] = arities[var].max(value + 1);
            }
        }
        let num_vars = match self.declared_vars {
            Some(n) => {
                if let Some((id, var)) = kinds.iter().enumerate().find_map(|(id, k)| match *k {
                    NodeKind::Leaf { var, .. } if var >= n => Some((id, var)),
                    _ => None,
                }) {
                    return Err(GraphError::VariableOutOfRange {
                        node: NodeId(id),
                        var,
                        num_vars: n,
                    });
                }
                n
            }
            None => arities.len(),
        };
        arities.resize(num_vars, 0);
        // A variable without any leaf still gets a single admissible value.
        for a in &mut arities {
            *a = (*a).max(1);
        }

        let topo = topological_order(&self.children)?;
        let mut num_parents = vec![0usize; kinds.len()];
        for ch in &self.children {
            for c in ch {
                num_parents[c.0] += 1;
            }
        }
        let roots: Vec<NodeId> = (0..kinds.len()).filter(|&i| num_parents[i] == 0).map(NodeId).collect();
        if roots.len() != 1 {
            // An acyclic non-empty graph always has at least one parentless node.
            return Err(GraphError::MultipleRoots(roots));
        }
        let num_edges = self.children.iter().map(Vec::len).sum();

        Ok(SpnGraph {
            kinds,
            children: self.children,
            weights: Weights::from_nested(self.weights),
            num_parents,
            arities,
            root: roots[0],
            topo,
            num_edges,
        })
    }
}

/// Immutable rooted DAG of sum, product and indicator-leaf nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpnGraph {
    kinds: Vec<NodeKind>,
    children: Vec<Vec<NodeId>>,
    weights: Weights,
    num_parents: Vec<usize>,
    arities: Vec<usize>,
    root: NodeId,
    topo: Vec<NodeId>,
    num_edges: usize,
}

impl SpnGraph {
    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    /// Sum and product edges together.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_sum_edges(&self) -> usize {
        self.sum_nodes().map(|k| self.children(k).len()).sum()
    }

    pub fn num_vars(&self) -> usize {
        self.arities.len()
    }

    pub fn arity(&self, var: usize) -> usize {
        self.arities[var]
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    #[inline]
    pub fn kind(&self, k: NodeId) -> NodeKind {
        self.kinds[k.0]
    }

    #[inline]
    pub fn children(&self, k: NodeId) -> &[NodeId] {
        &self.children[k.0]
    }

    pub fn num_parents(&self, k: NodeId) -> usize {
        self.num_parents[k.0]
    }

    /// Weights attached to the model file.
    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Children before parents; ties broken by ascending id.
    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn node_ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.kinds.len()).map(NodeId)
    }

    pub fn sum_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&k| self.kinds[k.0].is_sum())
    }

    /// Sum edges as `(parent, position, child)` in (parent id, position) order.
    pub fn sum_edges(&self) -> impl Iterator<Item = (NodeId, usize, NodeId)> + '_ {
        self.sum_nodes()
            .flat_map(move |k| self.children(k).iter().enumerate().map(move |(j, &c)| (k, j, c)))
    }

    /// Position of `child` among the children of `parent`.
    pub fn child_position(&self, parent: NodeId, child: NodeId) -> Option<usize> {
        self.children(parent).iter().position(|&c| c == child)
    }

    /// Same structure with a different weight set.
    pub fn with_weights(&self, weights: Weights) -> Result<SpnGraph, GraphError> {
        weights.check_shape(self)?;
        Ok(SpnGraph {
            weights,
            ..self.clone()
        })
    }
}

/// Children-before-parents order of the adjacency lists, ties broken by
/// ascending node id.
pub fn topological_order(children: &[Vec<NodeId>]) -> Result<Vec<NodeId>, GraphError> {
    let n = children.len();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending: Vec<usize> = vec![0; n];
    for (p, ch) in children.iter().enumerate() {
        pending[p] = ch.len();
        for c in ch {
            if c.0 >= n {
                return Err(GraphError::UnknownNode(c.0));
            }
            parents[c.0].push(p);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| pending[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(NodeId(v));
        for &p in &parents[v] {
            pending[p] -= 1;
            if pending[p] == 0 {
                ready.push(Reverse(p));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every unfinished node has an unfinished child, so walking unfinished
    // children must revisit a node.
    let start = (0..n).find(|&i| pending[i] > 0).expect("unfinished node");
    let mut seen = vec![false; n];
    let mut cur = start;
    loop {
        seen[cur] = true;
        let next = children[cur]
            .iter()
            .map(|c| c.0)
            .find(|&c| pending[c] > 0)
            .expect("unfinished node has an unfinished child");
        if seen[next] {
            return Err(GraphError::Cycle {
                parent: NodeId(cur),
                child: NodeId(next),
            });
        }
        cur = next;
    }
}

/// Sorted set of variable indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Scope(Vec<usize>);

impl Scope {
    pub fn single(var: usize) -> Self {
        Scope(vec![var])
    }

    pub fn from_vars(mut vars: Vec<usize>) -> Self {
        vars.sort_unstable();
        vars.dedup();
        Scope(vars)
    }

    pub fn vars(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    pub fn union(&self, other: &Scope) -> Scope {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Scope(out)
    }

    pub fn is_disjoint(&self, other: &Scope) -> bool {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    Acyclic,
    SingleRoot,
    NonEmptyInternal,
    Complete,
    Decomposable,
    Normalized,
    CoversAllVariables,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::Acyclic,
        Property::SingleRoot,
        Property::NonEmptyInternal,
        Property::Complete,
        Property::Decomposable,
        Property::Normalized,
        Property::CoversAllVariables,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Acyclic => "acyclic",
            Property::SingleRoot => "single-root",
            Property::NonEmptyInternal => "non-empty-internal",
            Property::Complete => "complete",
            Property::Decomposable => "decomposable",
            Property::Normalized => "normalized",
            Property::CoversAllVariables => "covers-all-variables",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Cycle {
        parent: NodeId,
        child: NodeId,
    },
    MultipleRoots(Vec<NodeId>),
    EmptyInternal(NodeId),
    /// `child`'s scope differs from the first child's scope.
    Incomplete {
        node: NodeId,
        child: NodeId,
    },
    /// `child`'s scope overlaps an earlier sibling's scope.
    NotDecomposable {
        node: NodeId,
        child: NodeId,
    },
    NonPositiveWeight {
        node: NodeId,
        position: usize,
        weight: f64,
    },
    Unnormalized {
        node: NodeId,
        total: f64,
    },
    UncoveredVariables(Vec<usize>),
}

impl Violation {
    pub fn property(&self) -> Property {
        match self {
            Violation::Cycle { .. } => Property::Acyclic,
            Violation::MultipleRoots(_) => Property::SingleRoot,
            Violation::EmptyInternal(_) => Property::NonEmptyInternal,
            Violation::Incomplete { .. } => Property::Complete,
            Violation::NotDecomposable { .. } => Property::Decomposable,
            Violation::NonPositiveWeight { .. } | Violation::Unnormalized { .. } => Property::Normalized,
            Violation::UncoveredVariables(_) => Property::CoversAllVariables,
        }
    }

    /// The offending node, when the violation is local to one.
    pub fn node(&self) -> Option<NodeId> {
        match *self {
            Violation::Cycle { parent, .. } => Some(parent),
            Violation::EmptyInternal(node)
            | Violation::Incomplete { node, .. }
            | Violation::NotDecomposable { node, .. }
            | Violation::NonPositiveWeight { node, .. }
            | Violation::Unnormalized { node, .. } => Some(node),
            Violation::MultipleRoots(_) | Violation::UncoveredVariables(_) => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { parent, child } => write!(f, "cycle through edge {parent} -> {child}"),
            Violation::MultipleRoots(roots) => {
                let ids: Vec<String> = roots.iter().map(|r| r.to_string()).collect();
                write!(f, "multiple parentless nodes: {}", ids.join(", "))
            }
            Violation::EmptyInternal(node) => write!(f, "node {node}: internal node without children"),
            Violation::Incomplete { node, child } => {
                write!(
                    f,
                    "node {node}: sum child {child} has a different scope than its siblings"
                )
            }
            Violation::NotDecomposable { node, child } => {
                write!(
                    f,
                    "node {node}: product child {child} overlaps the scope of an earlier sibling"
                )
            }
            Violation::NonPositiveWeight { node, position, weight } => {
                write!(f, "node {node}: weight {weight} at position {position} is not positive")
            }
            Violation::Unnormalized { node, total } => {
                write!(f, "node {node}: weights sum to {total}, not 1")
            }
            Violation::UncoveredVariables(vars) => {
                write!(f, "root scope misses variables {vars:?}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    scopes: Vec<Scope>,
    violations: Vec<Violation>,
}

impl ValidationReport {
    /// Report for a model whose structure could not even be built.
    ///
    /// Returns `None` for errors that are not structural violations.
    pub fn from_structure_error(err: &GraphError) -> Option<Self> {
        let violation = match err {
            GraphError::Cycle { parent, child } => Violation::Cycle {
                parent: *parent,
                child: *child,
            },
            GraphError::MultipleRoots(roots) => Violation::MultipleRoots(roots.clone()),
            _ => return None,
        };
        Some(ValidationReport {
            scopes: Vec::new(),
            violations: vec![violation],
        })
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn passed(&self, property: Property) -> bool {
        self.violations.iter().all(|v| v.property() != property)
    }

    /// Per-node scopes; empty when the structure could not be built.
    pub fn scopes(&self) -> &[Scope] {
        &self.scopes
    }

    pub fn scope(&self, k: NodeId) -> &Scope {
        &self.scopes[k.0]
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in Property::ALL {
            writeln!(f, "{} {}", if self.passed(p) { "PASS" } else { "FAIL" }, p.name())?;
        }
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        Ok(())
    }
}

/// Scope of every node, computed bottom-up.
pub fn scopes(graph: &SpnGraph) -> Vec<Scope> {
    let mut scopes = vec![Scope::default(); graph.num_nodes()];
    for &k in graph.topo_order() {
        scopes[k.0] = match graph.kind(k) {
            NodeKind::Leaf { var, .. } => Scope::single(var),
            _ => graph
                .children(k)
                .iter()
                .fold(Scope::default(), |acc, c| acc.union(&scopes[c.0])),
        };
    }
    scopes
}

/// Check completeness, decomposability and weight normalization.
pub fn validate(graph: &SpnGraph) -> ValidationReport {
    let scopes = scopes(graph);
    let mut violations = Vec::new();
    for k in graph.node_ids() {
        let children = graph.children(k);
        match graph.kind(k) {
            NodeKind::Leaf { .. } => continue,
            _ if children.is_empty() => violations.push(Violation::EmptyInternal(k)),
            NodeKind::Sum => {
                let first = &scopes[children[0].0];
                for &c in &children[1..] {
                    if &scopes[c.0] != first {
                        violations.push(Violation::Incomplete { node: k, child: c });
                    }
                }
                let w = graph.weights().node(k);
                for (position, &weight) in w.iter().enumerate() {
                    if weight <= 0.0 {
                        violations.push(Violation::NonPositiveWeight {
                            node: k,
                            position,
                            weight,
                        });
                    }
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    violations.push(Violation::Unnormalized { node: k, total });
                }
            }
            NodeKind::Product => {
                let mut seen = Scope::default();
                for &c in children {
                    if !seen.is_disjoint(&scopes[c.0]) {
                        violations.push(Violation::NotDecomposable { node: k, child: c });
                    }
                    seen = seen.union(&scopes[c.0]);
                }
            }
        }
    }
    let root_scope = &scopes[graph.root().0];
    let missing: Vec<usize> = (0..graph.num_vars()).filter(|&v| !root_scope.contains(v)).collect();
    if !missing.is_empty() {
        violations.push(Violation::UncoveredVariables(missing));
    }
    ValidationReport { scopes, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1_builder() -> SpnBuilder {
        let mut b = SpnBuilder::new();
        b.add_node(0, NodeKind::Sum).unwrap();
        b.add_node(1, NodeKind::Product).unwrap();
        b.add_node(2, NodeKind::Product).unwrap();
        b.add_node(3, NodeKind::Leaf { var: 0, value: 0 }).unwrap();
        b.add_node(4, NodeKind::Leaf { var: 1, value: 0 }).unwrap();
        b.add_node(5, NodeKind::Leaf { var: 0, value: 1 }).unwrap();
        b.add_node(6, NodeKind::Leaf { var: 1, value: 1 }).unwrap();
        b.add_edge(0, 1, Some(0.4)).unwrap();
        b.add_edge(0, 2, Some(0.6)).unwrap();
        b.add_edge(1, 3, None).unwrap();
        b.add_edge(1, 4, None).unwrap();
        b.add_edge(2, 5, None).unwrap();
        b.add_edge(2, 6, None).unwrap();
        b
    }

    #[test]
    fn s1_topology() {
        let g = s1_builder().build().unwrap();
        assert_eq!(g.root(), NodeId(0));
        let order: Vec<usize> = g.topo_order().iter().map(|n| n.0).collect();
        assert_eq!(order, vec![3, 4, 1, 5, 6, 2, 0]);
        assert_eq!(g.arities(), &[2, 2]);
        let report = validate(&g);
        assert!(report.is_valid(), "{report}");
        assert_eq!(report.scope(g.root()).vars(), &[0, 1]);
    }

    #[test]
    fn single_leaf() {
        let mut b = SpnBuilder::new();
        b.push_node(NodeKind::Leaf { var: 0, value: 0 });
        let g = b.build().unwrap();
        assert_eq!(g.topo_order(), &[NodeId(0)]);
        assert!(validate(&g).is_valid());
    }

    #[test]
    fn two_cycle_is_reported() {
        let children = vec![vec![NodeId(1)], vec![NodeId(0)]];
        match topological_order(&children) {
            Err(GraphError::Cycle { .. }) => {}
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn cycle_edge_is_on_the_cycle() {
        // 0 -> 1 -> 2 -> 3 -> 1, plus a leaf under 3
        let children = vec![
            vec![NodeId(1)],
            vec![NodeId(2)],
            vec![NodeId(3)],
            vec![NodeId(1), NodeId(4)],
            vec![],
        ];
        let Err(GraphError::Cycle { parent, child }) = topological_order(&children) else {
            panic!("expected cycle");
        };
        assert!(children[parent.0].contains(&child));
        assert!([1, 2, 3].contains(&parent.0) && [1, 2, 3].contains(&child.0));
    }

    #[test]
    fn builder_errors() {
        let mut b = s1_builder();
        assert_eq!(b.add_edge(0, 9, Some(0.1)), Err(GraphError::UnknownNode(9)));
        assert!(matches!(
            b.add_edge(0, 1, Some(0.1)),
            Err(GraphError::ParallelEdge { .. })
        ));
        assert!(matches!(
            b.add_edge(1, 5, Some(0.1)),
            Err(GraphError::UnexpectedWeight { .. })
        ));
        assert!(matches!(b.add_edge(3, 5, None), Err(GraphError::LeafWithChildren(_))));
        assert!(matches!(
            b.add_node(2, NodeKind::Sum),
            Err(GraphError::DuplicateNode(2))
        ));

        let mut b = SpnBuilder::new();
        b.add_node(0, NodeKind::Sum).unwrap();
        b.add_node(1, NodeKind::Leaf { var: 0, value: 0 }).unwrap();
        assert!(matches!(b.add_edge(0, 1, None), Err(GraphError::MissingWeight { .. })));

        let mut b = SpnBuilder::new();
        b.add_node(0, NodeKind::Leaf { var: 0, value: 0 }).unwrap();
        b.add_node(2, NodeKind::Leaf { var: 0, value: 1 }).unwrap();
        assert_eq!(b.build(), Err(GraphError::SparseIds(1)));
    }

    #[test]
    fn multiple_roots() {
        let mut b = SpnBuilder::new();
        b.push_node(NodeKind::Leaf { var: 0, value: 0 });
        b.push_node(NodeKind::Leaf { var: 0, value: 1 });
        assert!(matches!(b.build(), Err(GraphError::MultipleRoots(r)) if r.len() == 2));
    }

    #[test]
    fn overlap_under_product_is_not_decomposable() {
        let mut b = s1_builder();
        // second var-1 leaf under product 1, next to leaf 4
        let extra = b.push_node(NodeKind::Leaf { var: 1, value: 1 });
        b.add_edge(1, extra.0, None).unwrap();
        let g = b.build().unwrap();
        let report = validate(&g);
        assert!(!report.passed(Property::Decomposable));
        assert_eq!(report.violations()[0].node(), Some(NodeId(1)));
    }

    #[test]
    fn scope_mismatch_under_sum_is_incomplete() {
        let mut b = SpnBuilder::new();
        b.add_node(0, NodeKind::Sum).unwrap();
        b.add_node(1, NodeKind::Leaf { var: 0, value: 0 }).unwrap();
        b.add_node(2, NodeKind::Leaf { var: 1, value: 0 }).unwrap();
        b.add_edge(0, 1, Some(0.5)).unwrap();
        b.add_edge(0, 2, Some(0.5)).unwrap();
        let report = validate(&b.build().unwrap());
        assert_eq!(
            report.violations(),
            &[Violation::Incomplete {
                node: NodeId(0),
                child: NodeId(2)
            }]
        );
    }

    #[test]
    fn unnormalized_weights_are_rejected() {
        let mut b = SpnBuilder::new();
        b.add_node(0, NodeKind::Sum).unwrap();
        b.add_node(1, NodeKind::Leaf { var: 0, value: 0 }).unwrap();
        b.add_node(2, NodeKind::Leaf { var: 0, value: 1 }).unwrap();
        b.add_edge(0, 1, Some(0.5)).unwrap();
        b.add_edge(0, 2, Some(0.6)).unwrap();
        let report = validate(&b.build().unwrap());
        assert!(!report.passed(Property::Normalized));
        assert!(report.passed(Property::Complete));
    }

    #[test]
    fn declared_vars_cover_check() {
        let mut b = s1_builder();
        b.declare_vars(3);
        let g = b.build().unwrap();
        assert_eq!(g.num_vars(), 3);
        let report = validate(&g);
        assert_eq!(report.violations(), &[Violation::UncoveredVariables(vec![2])]);

        let mut b = s1_builder();
        b.declare_vars(1);
        assert!(matches!(b.build(), Err(GraphError::VariableOutOfRange { .. })));
    }

    #[test]
    fn instance_checks() {
        let g = s1_builder().build().unwrap();
        assert!(Instance::full(&[0, 1]).check(&g).is_ok());
        assert!(Instance::marginal(2).check(&g).is_ok());
        assert!(matches!(
            Instance::full(&[0]).check(&g),
            Err(GraphError::InstanceLength { expected: 2, got: 1 })
        ));
        assert!(matches!(
            Instance::full(&[0, 2]).check(&g),
            Err(GraphError::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn prior_checks() {
        let g = s1_builder().build().unwrap();
        let p = DirichletPrior::uniform(&g);
        assert_eq!(p.node(NodeId(0)), &[1.0, 1.0]);
        assert!(p.node(NodeId(1)).is_empty());
        let bad = vec![vec![2.0, 0.0], vec![], vec![], vec![], vec![], vec![], vec![]];
        assert!(matches!(
            DirichletPrior::new(&g, bad),
            Err(GraphError::NonPositiveHyperparameter { value, .. }) if value == 0.0
        ));
        let mut p = p;
        assert!(matches!(
            p.set_node(&g, NodeId(0), vec![1.0]),
            Err(GraphError::HyperparameterLength {
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            p.set_node(&g, NodeId(1), vec![1.0]),
            Err(GraphError::NotSumNode(_))
        ));
    }

    #[test]
    fn scope_set_ops() {
        let a = Scope::from_vars(vec![3, 1, 1]);
        let b = Scope::from_vars(vec![2, 4]);
        assert_eq!(a.vars(), &[1, 3]);
        assert!(a.is_disjoint(&b));
        assert_eq!(a.union(&b).vars(), &[1, 2, 3, 4]);
        assert!(!a.union(&b).is_disjoint(&a));
    }
}
