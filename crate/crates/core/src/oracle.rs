//! Exponential-time reference computations over explicitly enumerated
//! induced trees, and a seeded random network generator.
//!
//! An induced tree keeps the root, exactly one child of every included sum
//! node and all children of every included product node. Each tree is one
//! monomial of the network polynomial, so every quantity here is a plain sum
//! over trees. None of it goes through the circuit passes in
//! [`crate::inference`]; that independence is what makes it a useful
//! cross-check.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

use crate::graph::{DirichletPrior, GraphError, Instance, NodeId, NodeKind, SpnBuilder, SpnGraph, Weights};
use crate::moments::MomentFunction;
use crate::special::digamma;

/// Default refusal threshold on the number of induced trees.
pub const DEFAULT_TREE_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("more than {cap} induced trees; refusing to enumerate")]
    CapExceeded { cap: usize },
    #[error("instance has zero probability under the prior means")]
    ZeroEvidence,
    #[error("edge {parent} -> {child} is not a sum edge")]
    NotSumEdge { parent: NodeId, child: NodeId },
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedTree {
    /// `(parent, child)` pairs, sorted.
    pub edges: Vec<(NodeId, NodeId)>,
    /// Sorted node set.
    pub nodes: Vec<NodeId>,
}

impl InducedTree {
    pub fn contains_edge(&self, parent: NodeId, child: NodeId) -> bool {
        self.edges.binary_search(&(parent, child)).is_ok()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

/// Per-tree factors of the posterior mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeTerm {
    /// Product of the tree's leaf indicators under the instance.
    pub c: f64,
    /// Product over tree sum edges of the prior means `alpha_kj / A_k`.
    pub u: f64,
    /// Product over tree sum edges of the given weights.
    pub w: f64,
}

/// All induced trees, depth-first over sum-node choices in child order.
pub fn enumerate_trees(graph: &SpnGraph, cap: usize) -> Result<Vec<InducedTree>, OracleError> {
    let mut out = Vec::new();
    let mut edges = Vec::new();
    let mut nodes = Vec::new();
    expand(graph, vec![graph.root()], &mut edges, &mut nodes, &mut out, cap)?;
    Ok(out)
}

fn expand(
    graph: &SpnGraph,
    mut pending: Vec<NodeId>,
    edges: &mut Vec<(NodeId, NodeId)>,
    nodes: &mut Vec<NodeId>,
    out: &mut Vec<InducedTree>,
    cap: usize,
) -> Result<(), OracleError> {
    // Expand forced structure (products, leaves) until a sum choice point.
    while let Some(v) = pending.pop() {
        nodes.push(v);
        match graph.kind(v) {
            NodeKind::Leaf { .. } => {}
            NodeKind::Product => {
                // reversed so that children are expanded in order
                for &c in graph.children(v).iter().rev() {
                    edges.push((v, c));
                    pending.push(c);
                }
            }
            NodeKind::Sum => {
                let (e_len, n_len) = (edges.len(), nodes.len());
                for &c in graph.children(v) {
                    edges.push((v, c));
                    let mut next = pending.clone();
                    next.push(c);
                    expand(graph, next, edges, nodes, out, cap)?;
                    edges.truncate(e_len);
                    nodes.truncate(n_len);
                }
                return Ok(());
            }
        }
    }
    if out.len() == cap {
        return Err(OracleError::CapExceeded { cap });
    }
    let mut e = edges.clone();
    e.sort_unstable();
    let mut n = nodes.clone();
    n.sort_unstable();
    out.push(InducedTree { edges: e, nodes: n });
    Ok(())
}

/// Tree-by-tree reference engine over a cached enumeration.
pub struct Oracle<'g> {
    graph: &'g SpnGraph,
    trees: Vec<InducedTree>,
}

impl<'g> Oracle<'g> {
    pub fn new(graph: &'g SpnGraph, cap: usize) -> Result<Self, OracleError> {
        Ok(Oracle {
            graph,
            trees: enumerate_trees(graph, cap)?,
        })
    }

    pub fn trees(&self) -> &[InducedTree] {
        &self.trees
    }

    pub fn term(&self, tree: &InducedTree, weights: &Weights, prior: &DirichletPrior, instance: &Instance) -> TreeTerm {
        let g = self.graph;
        let mut c = 1.0;
        for &v in &tree.nodes {
            if let NodeKind::Leaf { var, value } = g.kind(v) {
                if instance.get(var).is_some_and(|x| x != value) {
                    c = 0.0;
                }
            }
        }
        let (mut u, mut w) = (1.0, 1.0);
        for &(k, child) in &tree.edges {
            if g.kind(k).is_sum() {
                let j = g.child_position(k, child).expect("tree edge exists");
                let alpha = prior.node(k);
                u *= alpha[j] / alpha.iter().sum::<f64>();
                w *= weights.node(k)[j];
            }
        }
        TreeTerm { c, u, w }
    }

    fn c_of(&self, tree: &InducedTree, instance: &Instance) -> f64 {
        let blocked = tree.nodes.iter().any(|&v| match self.graph.kind(v) {
            NodeKind::Leaf { var, value } => instance.get(var).is_some_and(|x| x != value),
            _ => false,
        });
        if blocked {
            0.0
        } else {
            1.0
        }
    }

    fn weight_product(&self, tree: &InducedTree, weights: &Weights) -> f64 {
        tree.edges
            .iter()
            .filter(|(k, _)| self.graph.kind(*k).is_sum())
            .map(|&(k, c)| weights.node(k)[self.graph.child_position(k, c).expect("tree edge")])
            .product()
    }

    fn mean_product(&self, tree: &InducedTree, prior: &DirichletPrior) -> f64 {
        tree.edges
            .iter()
            .filter(|(k, _)| self.graph.kind(*k).is_sum())
            .map(|&(k, c)| {
                let alpha = prior.node(k);
                alpha[self.graph.child_position(k, c).expect("tree edge")] / alpha.iter().sum::<f64>()
            })
            .product()
    }

    /// `sum_t w_t c_t`
    pub fn polynomial(&self, weights: &Weights, instance: &Instance) -> f64 {
        self.trees
            .iter()
            .map(|t| self.c_of(t, instance) * self.weight_product(t, weights))
            .sum()
    }

    /// `Z_x = sum_t c_t u_t`
    pub fn evidence(&self, prior: &DirichletPrior, instance: &Instance) -> f64 {
        self.trees
            .iter()
            .map(|t| self.c_of(t, instance) * self.mean_product(t, prior))
            .sum()
    }

    fn check_edge(&self, parent: NodeId, child: NodeId) -> Result<usize, OracleError> {
        if parent.0 >= self.graph.num_nodes() || !self.graph.kind(parent).is_sum() {
            return Err(OracleError::NotSumEdge { parent, child });
        }
        self.graph
            .child_position(parent, child)
            .ok_or(OracleError::NotSumEdge { parent, child })
    }

    /// `sum_{t contains (k, j)} c_t u_t`
    pub fn edge_mass(
        &self,
        prior: &DirichletPrior,
        instance: &Instance,
        parent: NodeId,
        child: NodeId,
    ) -> Result<f64, OracleError> {
        self.check_edge(parent, child)?;
        Ok(self
            .trees
            .iter()
            .filter(|t| t.contains_edge(parent, child))
            .map(|t| self.c_of(t, instance) * self.mean_product(t, prior))
            .sum())
    }

    /// Share of the posterior tree mass passing through `(parent, child)`.
    pub fn lambda(
        &self,
        prior: &DirichletPrior,
        instance: &Instance,
        parent: NodeId,
        child: NodeId,
    ) -> Result<f64, OracleError> {
        let through = self.edge_mass(prior, instance, parent, child)?;
        let z = self.evidence(prior, instance);
        if z == 0.0 {
            return Err(OracleError::ZeroEvidence);
        }
        Ok(through / z)
    }

    /// Moment of `f(w_kj)` from the tree partition: trees through the edge
    /// see the incremented Dirichlet, the others see the prior.
    pub fn moment(
        &self,
        prior: &DirichletPrior,
        instance: &Instance,
        parent: NodeId,
        child: NodeId,
        function: MomentFunction,
    ) -> Result<f64, OracleError> {
        let j = self.check_edge(parent, child)?;
        let (mut with_edge, mut without_edge) = (0.0, 0.0);
        for t in &self.trees {
            let mass = self.c_of(t, instance) * self.mean_product(t, prior);
            if t.contains_edge(parent, child) {
                with_edge += mass;
            } else {
                without_edge += mass;
            }
        }
        let z = with_edge + without_edge;
        if z == 0.0 {
            return Err(OracleError::ZeroEvidence);
        }
        let alpha = prior.node(parent);
        let total: f64 = alpha.iter().sum();
        let dirichlet = |a: f64, s: f64| match function {
            MomentFunction::Mean => a / s,
            MomentFunction::SecondMoment => a * (a + 1.0) / (s * (s + 1.0)),
            MomentFunction::LogMoment => digamma(a) - digamma(s),
        };
        Ok((without_edge * dirichlet(alpha[j], total) + with_edge * dirichlet(alpha[j] + 1.0, total + 1.0)) / z)
    }
}

pub fn oracle_polynomial(graph: &SpnGraph, weights: &Weights, instance: &Instance) -> Result<f64, OracleError> {
    Ok(Oracle::new(graph, DEFAULT_TREE_CAP)?.polynomial(weights, instance))
}

pub fn oracle_lambda(
    graph: &SpnGraph,
    prior: &DirichletPrior,
    instance: &Instance,
    parent: NodeId,
    child: NodeId,
) -> Result<f64, OracleError> {
    Oracle::new(graph, DEFAULT_TREE_CAP)?.lambda(prior, instance, parent, child)
}

pub fn oracle_moment(
    graph: &SpnGraph,
    prior: &DirichletPrior,
    instance: &Instance,
    parent: NodeId,
    child: NodeId,
    function: MomentFunction,
) -> Result<f64, OracleError> {
    Oracle::new(graph, DEFAULT_TREE_CAP)?.moment(prior, instance, parent, child, function)
}

/// Parameters of [`generate_random_spn`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub num_vars: usize,
    /// Number of alternating sum/product layers on the longest path, the
    /// root being a sum layer. Sums over a single variable end the
    /// recursion early with that variable's indicator leaves.
    pub depth: usize,
    pub sum_fanout: usize,
    pub product_fanout: usize,
    /// Probability of reusing an already built sub-network with the same
    /// scope at the same layer instead of building a fresh one.
    pub dag_merge_probability: f64,
    /// Categories per variable.
    pub arity: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            seed: 0,
            num_vars: 4,
            depth: 5,
            sum_fanout: 2,
            product_fanout: 2,
            dag_merge_probability: 0.0,
            arity: 2,
        }
    }
}

struct Generator {
    params: GeneratorParams,
    rng: ChaCha8Rng,
    builder: SpnBuilder,
    // (scope, remaining depth, is_sum) -> built roots
    built: HashMap<(Vec<usize>, usize, bool), Vec<NodeId>>,
    leaves: HashMap<(usize, usize), Vec<NodeId>>,
}

impl Generator {
    fn reuse(&mut self, key: &(Vec<usize>, usize, bool), parent_children: &[NodeId]) -> Option<NodeId> {
        let p = self.params.dag_merge_probability;
        if p <= 0.0 {
            return None;
        }
        let candidates: Vec<NodeId> = self
            .built
            .get(key)?
            .iter()
            .copied()
            .filter(|c| !parent_children.contains(c))
            .collect();
        if candidates.is_empty() || !self.rng.gen_bool(p.min(1.0)) {
            return None;
        }
        candidates.choose(&mut self.rng).copied()
    }

    fn leaf(&mut self, var: usize, value: usize, siblings: &[NodeId]) -> NodeId {
        let p = self.params.dag_merge_probability;
        if p > 0.0 {
            if let Some(existing) = self.leaves.get(&(var, value)).and_then(|v| v.first().copied()) {
                if !siblings.contains(&existing) && self.rng.gen_bool(p.min(1.0)) {
                    return existing;
                }
            }
        }
        let id = self.builder.push_node(NodeKind::Leaf { var, value });
        self.leaves.entry((var, value)).or_default().push(id);
        id
    }

    fn dirichlet_weights(&mut self, n: usize) -> Vec<f64> {
        let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut self.rng)).collect::<Vec<f64>>();
        let total: f64 = draws.iter().sum();
        draws.iter().map(|d| d / total).collect()
    }

    fn sum_node(&mut self, scope: &[usize], depth: usize) -> Result<NodeId, OracleError> {
        let id = self.builder.push_node(NodeKind::Sum);
        let mut children = Vec::new();
        if scope.len() == 1 {
            let var = scope[0];
            for value in 0..self.params.arity {
                let leaf = self.leaf(var, value, &children);
                children.push(leaf);
            }
        } else {
            if depth <= 1 {
                return Err(OracleError::Infeasible(format!(
                    "depth exhausted on a sum node over {} variables; increase depth",
                    scope.len()
                )));
            }
            for _ in 0..self.params.sum_fanout {
                let key = (scope.to_vec(), depth - 1, false);
                let child = match self.reuse(&key, &children) {
                    Some(c) => c,
                    None => {
                        let c = self.product_node(scope, depth - 1)?;
                        self.built.entry(key).or_default().push(c);
                        c
                    }
                };
                children.push(child);
            }
        }
        let weights = self.dirichlet_weights(children.len());
        for (c, w) in children.iter().zip(weights) {
            self.builder.add_edge(id.0, c.0, Some(w))?;
        }
        Ok(id)
    }

    fn product_node(&mut self, scope: &[usize], depth: usize) -> Result<NodeId, OracleError> {
        let id = self.builder.push_node(NodeKind::Product);
        let mut children = Vec::new();
        if depth <= 1 {
            // last layer: one indicator per variable
            for &var in scope {
                let value = self.rng.gen_range(0..self.params.arity);
                let leaf = self.leaf(var, value, &children);
                children.push(leaf);
            }
        } else {
            let mut vars = scope.to_vec();
            vars.shuffle(&mut self.rng);
            let blocks = self.params.product_fanout.min(vars.len());
            let (base, extra) = (vars.len() / blocks, vars.len() % blocks);
            let mut start = 0;
            for b in 0..blocks {
                let len = base + usize::from(b < extra);
                let mut block = vars[start..start + len].to_vec();
                block.sort_unstable();
                start += len;
                let key = (block.clone(), depth - 1, true);
                let child = match self.reuse(&key, &children) {
                    Some(c) => c,
                    None => {
                        let c = self.sum_node(&block, depth - 1)?;
                        self.built.entry(key).or_default().push(c);
                        c
                    }
                };
                children.push(child);
            }
        }
        for c in &children {
            self.builder.add_edge(id.0, c.0, None)?;
        }
        Ok(id)
    }
}

/// Seeded complete and decomposable network with alternating sum and
/// product layers and symmetric Dirichlet(1) sum weights.
///
/// Product nodes split their scope into `product_fanout` near-equal random
/// blocks. A product node on the last layer takes one random indicator per
/// variable. With `dag_merge_probability > 0` sub-networks and leaves are
/// shared between parents; with 0 the result is a tree.
pub fn generate_random_spn(params: &GeneratorParams) -> Result<SpnGraph, OracleError> {
    if params.num_vars == 0 || params.depth == 0 || params.sum_fanout == 0 || params.arity == 0 {
        return Err(OracleError::Infeasible(
            "num_vars, depth, sum_fanout and arity must be positive".into(),
        ));
    }
    if params.product_fanout < 2 && params.num_vars > 1 {
        return Err(OracleError::Infeasible("product_fanout must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&params.dag_merge_probability) {
        return Err(OracleError::Infeasible(
            "dag_merge_probability must lie in [0, 1]".into(),
        ));
    }
    let mut gen = Generator {
        params: params.clone(),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        builder: SpnBuilder::new(),
        built: HashMap::new(),
        leaves: HashMap::new(),
    };
    let scope: Vec<usize> = (0..params.num_vars).collect();
    gen.sum_node(&scope, params.depth)?;
    let mut builder = gen.builder;
    builder.declare_vars(params.num_vars);
    Ok(builder.build()?)
}

/// Ancestral sample of a full assignment.
pub fn sample_instance<R: Rng + ?Sized>(graph: &SpnGraph, weights: &Weights, rng: &mut R) -> Instance {
    let mut values = vec![None; graph.num_vars()];
    let mut stack = vec![graph.root()];
    while let Some(v) = stack.pop() {
        match graph.kind(v) {
            NodeKind::Leaf { var, value } => values[var] = Some(value),
            NodeKind::Product => stack.extend_from_slice(graph.children(v)),
            NodeKind::Sum => {
                let w = weights.node(v);
                let total: f64 = w.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = w.len() - 1;
                for (j, &wj) in w.iter().enumerate() {
                    if u < wj {
                        pick = j;
                        break;
                    }
                    u -= wj;
                }
                stack.push(graph.children(v)[pick]);
            }
        }
    }
    // variables outside the sampled tree's scope cannot occur in a
    // validated network; fill defensively with category 0
    Instance::new(values.into_iter().map(|v| Some(v.unwrap_or(0))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{fixtures, parse_model};
    use crate::graph::validate;

    #[test]
    fn single_leaf_has_one_tree() {
        let g = parse_model(fixtures::SINGLE_LEAF).unwrap();
        let trees = enumerate_trees(&g, 10).unwrap();
        assert_eq!(
            trees,
            vec![InducedTree {
                edges: vec![],
                nodes: vec![NodeId(0)]
            }]
        );
    }

    #[test]
    fn s1_trees() {
        let g = parse_model(fixtures::S1).unwrap();
        let trees = enumerate_trees(&g, 10).unwrap();
        assert_eq!(trees.len(), 2);
        assert!(trees[0].contains_edge(NodeId(0), NodeId(1)));
        assert!(trees[0].contains_edge(NodeId(1), NodeId(3)));
        assert!(trees[0].contains_edge(NodeId(1), NodeId(4)));
        assert!(trees[1].contains_edge(NodeId(0), NodeId(2)));
        assert_eq!(trees[1].edges.len(), 3);
    }

    #[test]
    fn s2_trees() {
        let g = parse_model(fixtures::S2).unwrap();
        let trees = enumerate_trees(&g, 100).unwrap();
        assert_eq!(trees.len(), 8);
        for t in &trees {
            let a = t.contains_edge(NodeId(3), NodeId(6));
            let b = t.contains_edge(NodeId(3), NodeId(7));
            assert!(a ^ b);
            assert_eq!(t.edges.len() + 1, t.nodes.len());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let g = parse_model(fixtures::S2).unwrap();
        assert_eq!(enumerate_trees(&g, 7), Err(OracleError::CapExceeded { cap: 7 }));
        assert_eq!(enumerate_trees(&g, 8).unwrap().len(), 8);
    }

    #[test]
    fn polynomial_by_terms() {
        let g = parse_model(fixtures::S1).unwrap();
        assert!((oracle_polynomial(&g, g.weights(), &Instance::full(&[0, 0])).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(
            oracle_polynomial(&g, g.weights(), &Instance::full(&[0, 1])).unwrap(),
            0.0
        );
        let g = parse_model(fixtures::S2).unwrap();
        assert!((oracle_polynomial(&g, g.weights(), &Instance::full(&[0, 1])).unwrap() - 0.18).abs() < 1e-15);
        assert!((oracle_polynomial(&g, g.weights(), &Instance::marginal(2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn s1_lambda_and_moment() {
        let g = parse_model(fixtures::S1).unwrap();
        let mut p = DirichletPrior::uniform(&g);
        p.set_node(&g, NodeId(0), vec![2.0, 3.0]).unwrap();
        let x = Instance::full(&[0, 0]);
        assert_eq!(oracle_lambda(&g, &p, &x, NodeId(0), NodeId(1)).unwrap(), 1.0);
        assert_eq!(oracle_lambda(&g, &p, &x, NodeId(0), NodeId(2)).unwrap(), 0.0);

        let p = DirichletPrior::uniform(&g);
        assert_eq!(
            oracle_lambda(&g, &p, &Instance::marginal(2), NodeId(0), NodeId(1)).unwrap(),
            0.5
        );
        let m = oracle_moment(&g, &p, &x, NodeId(0), NodeId(1), MomentFunction::Mean).unwrap();
        assert!((m - 2.0 / 3.0).abs() < 1e-15);
        // lambda = 0 edge falls back to the prior moment
        let m = oracle_moment(&g, &p, &x, NodeId(0), NodeId(2), MomentFunction::Mean).unwrap();
        assert_eq!(m, 0.5);
        assert_eq!(
            oracle_lambda(&g, &p, &x, NodeId(1), NodeId(3)),
            Err(OracleError::NotSumEdge {
                parent: NodeId(1),
                child: NodeId(3)
            })
        );
        assert_eq!(
            oracle_lambda(&g, &p, &Instance::full(&[0, 1]), NodeId(0), NodeId(1)),
            Err(OracleError::ZeroEvidence)
        );
    }

    #[test]
    fn s2_log_moment_is_forced() {
        let g = parse_model(fixtures::S2).unwrap();
        let p = DirichletPrior::uniform(&g);
        let m = oracle_moment(
            &g,
            &p,
            &Instance::full(&[0, 1]),
            NodeId(3),
            NodeId(6),
            MomentFunction::LogMoment,
        )
        .unwrap();
        assert!((m - (digamma(2.0) - digamma(3.0))).abs() < 1e-15);
    }

    #[test]
    fn tree_terms() {
        let g = parse_model(fixtures::S2).unwrap();
        let p = DirichletPrior::uniform(&g);
        let oracle = Oracle::new(&g, 100).unwrap();
        let x = Instance::full(&[0, 1]);
        let mut u_total = 0.0;
        for t in oracle.trees() {
            let term = oracle.term(t, g.weights(), &p, &x);
            assert!(term.c == 0.0 || term.c == 1.0);
            assert!(term.u > 0.0 && term.u <= 1.0);
            assert!(term.w > 0.0 && term.w <= 1.0);
            u_total += term.u;
        }
        // prior means are normalized, so the tree masses sum to one
        assert!((u_total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn generator_base_case() {
        let g = generate_random_spn(&GeneratorParams {
            num_vars: 1,
            depth: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.kind(g.root()), NodeKind::Sum);
        assert!(g
            .children(g.root())
            .iter()
            .all(|&c| matches!(g.kind(c), NodeKind::Leaf { var: 0, .. })));
        assert!(validate(&g).is_valid());
    }

    #[test]
    fn generator_tree_without_merging() {
        let params = GeneratorParams {
            seed: 3,
            num_vars: 6,
            depth: 7,
            sum_fanout: 3,
            ..Default::default()
        };
        let g = generate_random_spn(&params).unwrap();
        assert!(validate(&g).is_valid());
        assert!(g.node_ids().filter(|&k| k != g.root()).all(|k| g.num_parents(k) == 1));
    }

    #[test]
    fn generator_merges_into_dag() {
        let params = GeneratorParams {
            seed: 11,
            num_vars: 6,
            depth: 7,
            sum_fanout: 3,
            dag_merge_probability: 0.5,
            ..Default::default()
        };
        let g = generate_random_spn(&params).unwrap();
        let report = validate(&g);
        assert!(report.is_valid(), "{report}");
        assert!(g.node_ids().any(|k| g.num_parents(k) > 1));
    }

    #[test]
    fn generator_is_deterministic() {
        let params = GeneratorParams {
            seed: 42,
            num_vars: 8,
            depth: 9,
            sum_fanout: 3,
            dag_merge_probability: 0.4,
            ..Default::default()
        };
        assert_eq!(
            generate_random_spn(&params).unwrap(),
            generate_random_spn(&params).unwrap()
        );
        let other = GeneratorParams {
            seed: 43,
            ..params.clone()
        };
        assert_ne!(
            generate_random_spn(&params).unwrap(),
            generate_random_spn(&other).unwrap()
        );
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        let bad = [
            GeneratorParams {
                num_vars: 0,
                ..Default::default()
            },
            GeneratorParams {
                depth: 0,
                ..Default::default()
            },
            GeneratorParams {
                num_vars: 4,
                depth: 1,
                ..Default::default()
            },
            GeneratorParams {
                product_fanout: 1,
                ..Default::default()
            },
            GeneratorParams {
                dag_merge_probability: 1.5,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(
                matches!(generate_random_spn(&p), Err(OracleError::Infeasible(_))),
                "{p:?}"
            );
        }
    }

    #[test]
    fn samples_have_positive_probability() {
        let params = GeneratorParams {
            seed: 5,
            num_vars: 5,
            depth: 4,
            dag_merge_probability: 0.5,
            ..Default::default()
        };
        let g = generate_random_spn(&params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = sample_instance(&g, g.weights(), &mut rng);
            assert!(oracle_polynomial(&g, g.weights(), &x).unwrap() > 0.0);
        }
    }
}
