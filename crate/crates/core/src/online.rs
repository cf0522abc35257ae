//! Streaming learners built on the per-edge `lambda` values.
//!
//! * ADF projects the one-step posterior back onto a product of Dirichlets
//!   by matching `E[ln w]`, with `exp(psi(b)) ~ b - 1/2`.
//! * BMM matches the posterior means instead.
//! * CCCP reweights every sum node proportionally to `lambda` evaluated at
//!   the current point estimate.
//!
//! Dirichlet learners store a normalized mean and a concentration
//! `A_k = sum_j alpha_kj` per sum node; every observation adds one
//! pseudo-count to each concentration.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::format::format_real;
use crate::graph::{DirichletPrior, Instance, NodeId, SpnGraph, Weights};
use crate::inference::LogValue;
use crate::moments::{edge_lambdas, MomentError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error("ADF needs every hyperparameter above 1/2; node {node} position {position} has {alpha}")]
    AdfDomain { node: NodeId, position: usize, alpha: f64 },
    #[error("instance {step} has zero probability under the current parameters")]
    ZeroEvidence { step: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Adf,
    Bmm,
    Cccp,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adf" => Ok(Algorithm::Adf),
            "bmm" => Ok(Algorithm::Bmm),
            "cccp" => Ok(Algorithm::Cccp),
            other => Err(format!("unknown algorithm `{other}` (expected adf, bmm or cccp)")),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Adf => "adf",
            Algorithm::Bmm => "bmm",
            Algorithm::Cccp => "cccp",
        })
    }
}

/// Product-of-Dirichlets posterior approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletState {
    means: Vec<Vec<f64>>,
    concentration: Vec<f64>,
    steps: usize,
}

impl DirichletState {
    pub fn from_prior(prior: &DirichletPrior) -> Self {
        let mut means = Vec::with_capacity(prior.num_nodes());
        let mut concentration = Vec::with_capacity(prior.num_nodes());
        for k in 0..prior.num_nodes() {
            let alpha = prior.node(NodeId(k));
            let total: f64 = alpha.iter().sum();
            means.push(alpha.iter().map(|a| a / total).collect());
            concentration.push(total);
        }
        DirichletState {
            means,
            concentration,
            steps: 0,
        }
    }

    /// `alpha = mean * concentration`
    pub fn alpha(&self) -> DirichletPrior {
        DirichletPrior::from_raw(
            self.means
                .iter()
                .zip(&self.concentration)
                .map(|(m, &a)| m.iter().map(|x| x * a).collect())
                .collect(),
        )
    }

    pub fn mean_weights(&self) -> Weights {
        Weights::from_nested(self.means.clone())
    }

    pub fn mean(&self, k: NodeId) -> &[f64] {
        &self.means[k.0]
    }

    pub fn concentration(&self, k: NodeId) -> f64 {
        self.concentration[k.0]
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn check_adf_domain(&self) -> Result<(), LearnError> {
        for (k, (m, &a)) in self.means.iter().zip(&self.concentration).enumerate() {
            for (position, &mj) in m.iter().enumerate() {
                let alpha = mj * a;
                if alpha <= 0.5 {
                    return Err(LearnError::AdfDomain {
                        node: NodeId(k),
                        position,
                        alpha,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Point estimate for CCCP plus the accumulated expected edge counts used by
/// the streaming variant.
#[derive(Clone, Debug, PartialEq)]
pub struct CccpState {
    weights: Weights,
    counts: Vec<Vec<f64>>,
    steps: usize,
}

impl CccpState {
    /// Start at the prior means, with the hyperparameters as pseudo-counts.
    pub fn from_prior(prior: &DirichletPrior) -> Self {
        let counts: Vec<Vec<f64>> = (0..prior.num_nodes()).map(|k| prior.node(NodeId(k)).to_vec()).collect();
        let weights = normalize_rows(&counts);
        CccpState {
            weights,
            counts,
            steps: 0,
        }
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn counts(&self, k: NodeId) -> &[f64] {
        &self.counts[k.0]
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

fn normalize_rows(rows: &[Vec<f64>]) -> Weights {
    Weights::from_nested(
        rows.iter()
            .map(|r| {
                let total: f64 = r.iter().sum();
                r.iter().map(|x| x / total).collect()
            })
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub enum LearnerState {
    Adf(DirichletState),
    Bmm(DirichletState),
    Cccp(CccpState),
}

impl LearnerState {
    /// Fresh learner for `algorithm` starting from `prior`.
    ///
    /// ADF checks its `alpha > 1/2` precondition here.
    pub fn new(algorithm: Algorithm, prior: &DirichletPrior) -> Result<Self, LearnError> {
        Ok(match algorithm {
            Algorithm::Adf => {
                let state = DirichletState::from_prior(prior);
                state.check_adf_domain()?;
                LearnerState::Adf(state)
            }
            Algorithm::Bmm => LearnerState::Bmm(DirichletState::from_prior(prior)),
            Algorithm::Cccp => LearnerState::Cccp(CccpState::from_prior(prior)),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            LearnerState::Adf(_) => Algorithm::Adf,
            LearnerState::Bmm(_) => Algorithm::Bmm,
            LearnerState::Cccp(_) => Algorithm::Cccp,
        }
    }

    /// Weights used for prediction: Dirichlet means, or the CCCP estimate.
    pub fn predictive_weights(&self) -> Weights {
        match self {
            LearnerState::Adf(s) | LearnerState::Bmm(s) => s.mean_weights(),
            LearnerState::Cccp(s) => s.weights.clone(),
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            LearnerState::Adf(s) | LearnerState::Bmm(s) => s.steps,
            LearnerState::Cccp(s) => s.steps,
        }
    }

    /// Hyperparameters for ADF/BMM; `None` for CCCP.
    pub fn prior(&self) -> Option<DirichletPrior> {
        match self {
            LearnerState::Adf(s) | LearnerState::Bmm(s) => Some(s.alpha()),
            LearnerState::Cccp(_) => None,
        }
    }

    /// One online update; also returns `V_root(x)` under the pre-update
    /// predictive weights.
    pub fn step(&self, graph: &SpnGraph, instance: &Instance) -> Result<(LearnerState, LogValue), LearnError> {
        match self {
            LearnerState::Adf(s) => adf_update(s, graph, instance).map(|(s, v)| (LearnerState::Adf(s), v)),
            LearnerState::Bmm(s) => bmm_update(s, graph, instance).map(|(s, v)| (LearnerState::Bmm(s), v)),
            LearnerState::Cccp(s) => cccp_accumulate(s, graph, instance).map(|(s, v)| (LearnerState::Cccp(s), v)),
        }
    }
}

fn adf_update(
    state: &DirichletState,
    graph: &SpnGraph,
    instance: &Instance,
) -> Result<(DirichletState, LogValue), LearnError> {
    state.check_adf_domain()?;
    let lambdas = edge_lambdas(graph, &state.mean_weights(), instance)?;
    let mut next = state.clone();
    for k in graph.sum_nodes() {
        let total = state.concentration[k.0];
        let mean = &state.means[k.0];
        // approximate prior mean (a - 1/2)/(A - 1/2) and incremented mean
        // (a + 1/2)/(A + 1/2), combined geometrically
        let r: Vec<f64> = mean
            .iter()
            .zip(lambdas.node(k))
            .map(|(&m, &l)| {
                let a = m * total;
                let before = ((a - 0.5) / (total - 0.5)).ln();
                let after = ((a + 0.5) / (total + 0.5)).ln();
                ((1.0 - l) * before + l * after).exp()
            })
            .collect();
        // beta_j - 1/2 proportional to r_j, with sum_j beta_j = A + 1
        let grown = total + 1.0;
        let scale = (grown - 0.5 * r.len() as f64) / r.iter().sum::<f64>();
        next.means[k.0] = r.iter().map(|rj| (0.5 + scale * rj) / grown).collect();
        next.concentration[k.0] = grown;
    }
    next.steps += 1;
    Ok((next, lambdas.root_value()))
}

fn bmm_update(
    state: &DirichletState,
    graph: &SpnGraph,
    instance: &Instance,
) -> Result<(DirichletState, LogValue), LearnError> {
    let lambdas = edge_lambdas(graph, &state.mean_weights(), instance)?;
    let mut next = state.clone();
    for k in graph.sum_nodes() {
        let total = state.concentration[k.0];
        let mixed: Vec<f64> = state.means[k.0]
            .iter()
            .zip(lambdas.node(k))
            .map(|(&m, &l)| {
                let a = m * total;
                (1.0 - l) * (a / total) + l * ((a + 1.0) / (total + 1.0))
            })
            .collect();
        let norm: f64 = mixed.iter().sum();
        next.means[k.0] = mixed.iter().map(|x| x / norm).collect();
        next.concentration[k.0] = total + 1.0;
    }
    next.steps += 1;
    Ok((next, lambdas.root_value()))
}

fn cccp_accumulate(
    state: &CccpState,
    graph: &SpnGraph,
    instance: &Instance,
) -> Result<(CccpState, LogValue), LearnError> {
    let lambdas = edge_lambdas(graph, &state.weights, instance)?;
    let mut counts = state.counts.clone();
    for k in graph.sum_nodes() {
        for (c, l) in counts[k.0].iter_mut().zip(lambdas.node(k)) {
            *c += l;
        }
    }
    let weights = normalize_rows(&counts);
    Ok((
        CccpState {
            weights,
            counts,
            steps: state.steps + 1,
        },
        lambdas.root_value(),
    ))
}

/// ADF update of a Dirichlet state for one instance.
pub fn adf_step(state: &DirichletState, graph: &SpnGraph, instance: &Instance) -> Result<DirichletState, LearnError> {
    adf_update(state, graph, instance).map(|(s, _)| s)
}

/// BMM update of a Dirichlet state for one instance.
pub fn bmm_step(state: &DirichletState, graph: &SpnGraph, instance: &Instance) -> Result<DirichletState, LearnError> {
    bmm_update(state, graph, instance).map(|(s, _)| s)
}

/// CCCP update: each sum node's weights become its `lambda` vector
/// normalized to one. Nodes with no `lambda` mass keep their weights.
pub fn cccp_step(weights: &Weights, graph: &SpnGraph, instance: &Instance) -> Result<Weights, LearnError> {
    let lambdas = edge_lambdas(graph, weights, instance)?;
    let mut next = weights.clone();
    for k in graph.sum_nodes() {
        let l = lambdas.node(k);
        let mass: f64 = l.iter().sum();
        if mass > 0.0 {
            for (w, x) in next.node_mut(k).iter_mut().zip(l) {
                *w = x / mass;
            }
        }
    }
    Ok(next)
}

/// Streaming CCCP: accumulate `lambda` as expected edge counts.
pub fn online_cccp_step(state: &CccpState, graph: &SpnGraph, instance: &Instance) -> Result<CccpState, LearnError> {
    cccp_accumulate(state, graph, instance).map(|(s, _)| s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZeroEvidencePolicy {
    /// Log the instance with `-inf` and leave the state unchanged.
    #[default]
    Skip,
    Abort,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainEntry {
    /// 1-based position in the stream.
    pub step: usize,
    /// Predictive log-likelihood before the update.
    pub log_likelihood: LogValue,
    /// Mean of `log_likelihood` over the entries so far.
    pub running_avg: f64,
    pub skipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<TrainEntry>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mean predictive log-likelihood over `entries[range]`.
    pub fn mean_log_likelihood(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.entries[range];
        slice.iter().map(|e| e.log_likelihood.ln()).sum::<f64>() / slice.len() as f64
    }

    pub fn skipped(&self) -> usize {
        self.entries.iter().filter(|e| e.skipped).count()
    }

    /// `step,log_likelihood,running_avg`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,log_likelihood,running_avg\n");
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{}",
                e.step,
                format_real(e.log_likelihood.ln()),
                format_real(e.running_avg)
            )
            .unwrap();
        }
        out
    }
}

/// Apply `initial`'s update to every instance in stream order.
pub fn train<'a, I>(
    graph: &SpnGraph,
    initial: LearnerState,
    data: I,
    policy: ZeroEvidencePolicy,
) -> Result<(LearnerState, TrainLog), LearnError>
where
    I: IntoIterator<Item = &'a Instance>,
{
    let mut state = initial;
    let mut log = TrainLog::default();
    let mut total = 0.0;
    for (i, instance) in data.into_iter().enumerate() {
        let step = i + 1;
        let (log_likelihood, skipped) = match state.step(graph, instance) {
            Ok((next, evidence)) => {
                state = next;
                (evidence, false)
            }
            Err(LearnError::Moment(MomentError::ZeroEvidence)) => match policy {
                ZeroEvidencePolicy::Skip => (LogValue::ZERO, true),
                ZeroEvidencePolicy::Abort => return Err(LearnError::ZeroEvidence { step }),
            },
            Err(e) => return Err(e),
        };
        total += log_likelihood.ln();
        log.entries.push(TrainEntry {
            step,
            log_likelihood,
            running_avg: total / step as f64,
            skipped,
        });
    }
    Ok((state, log))
}
