//! Text formats: model files, prior files and CSV data.
//!
//! Model files are line based. `#` starts a comment and blank lines are
//! ignored. Statements:
//!
//! ```text
//! vars <n>                       optional, number of variables
//! node <id> sum | prod | leaf <var> <value>
//! edge <parent> <child> [weight] weight present iff parent is a sum node
//! ```
//!
//! Prior files hold `<sum-node-id>: a1 a2 ... ak` in child order; sum nodes
//! that are not listed get all-ones hyperparameters. Data files are CSV
//! without a header, one instance per row, `?` marking a marginalized cell.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{DirichletPrior, GraphError, Instance, NodeId, NodeKind, SpnBuilder, SpnGraph};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error("{0}")]
    Structure(GraphError),
    #[error("row {row}, column {column}: {message}")]
    Data { row: usize, column: usize, message: String },
    #[error("row {row}: expected {expected} columns, found {got}")]
    DataWidth { row: usize, expected: usize, got: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ParseError {
    /// The structural error behind a model that parsed but could not be built.
    pub fn structure(&self) -> Option<&GraphError> {
        match self {
            ParseError::Structure(e) => Some(e),
            _ => None,
        }
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn statements(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn parse_usize(line: usize, token: &str, what: &str) -> Result<usize, ParseError> {
    token
        .parse()
        .map_err(|_| syntax(line, format!("invalid {what} `{token}`")))
}

fn parse_real(line: usize, token: &str) -> Result<f64, ParseError> {
    match token.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(syntax(line, format!("invalid number `{token}`"))),
    }
}

pub fn parse_model(text: &str) -> Result<SpnGraph, ParseError> {
    let mut builder = SpnBuilder::new();
    let mut edges = Vec::new();
    for (line, tokens) in statements(text) {
        match tokens[0] {
            "vars" => {
                if tokens.len() != 2 {
                    return Err(syntax(line, "expected `vars <n>`"));
                }
                builder.declare_vars(parse_usize(line, tokens[1], "variable count")?);
            }
            "node" => {
                if tokens.len() < 3 {
                    return Err(syntax(line, "expected `node <id> <kind>`"));
                }
                let id = parse_usize(line, tokens[1], "node id")?;
                let kind = match (tokens[2], tokens.len()) {
                    ("sum", 3) => NodeKind::Sum,
                    ("prod", 3) => NodeKind::Product,
                    ("leaf", 5) => NodeKind::Leaf {
                        var: parse_usize(line, tokens[3], "variable index")?,
                        value: parse_usize(line, tokens[4], "category value")?,
                    },
                    ("leaf", _) => return Err(syntax(line, "expected `node <id> leaf <var> <value>`")),
                    (other, _) if matches!(other, "sum" | "prod") => {
                        return Err(syntax(line, format!("unexpected tokens after `{other}`")))
                    }
                    (other, _) => return Err(syntax(line, format!("unknown node kind `{other}`"))),
                };
                builder
                    .add_node(id, kind)
                    .map_err(|source| ParseError::Graph { line, source })?;
            }
            "edge" => {
                let weight = match tokens.len() {
                    3 => None,
                    4 => Some(parse_real(line, tokens[3])?),
                    _ => return Err(syntax(line, "expected `edge <parent> <child> [weight]`")),
                };
                let parent = parse_usize(line, tokens[1], "node id")?;
                let child = parse_usize(line, tokens[2], "node id")?;
                edges.push((line, parent, child, weight));
            }
            other => return Err(syntax(line, format!("unknown statement `{other}`"))),
        }
    }
    // Edges may reference nodes declared further down.
    for (line, parent, child, weight) in edges {
        builder
            .add_edge(parent, child, weight)
            .map_err(|source| ParseError::Graph { line, source })?;
    }
    builder.build().map_err(ParseError::Structure)
}

/// Canonical text form: header, nodes by id, edges by (parent, position).
pub fn serialize_model(graph: &SpnGraph) -> String {
    let mut out = String::new();
    writeln!(out, "vars {}", graph.num_vars()).unwrap();
    for k in graph.node_ids() {
        match graph.kind(k) {
            NodeKind::Sum => writeln!(out, "node {k} sum"),
            NodeKind::Product => writeln!(out, "node {k} prod"),
            NodeKind::Leaf { var, value } => writeln!(out, "node {k} leaf {var} {value}"),
        }
        .unwrap();
    }
    for k in graph.node_ids() {
        let weights = graph.weights().node(k);
        for (j, c) in graph.children(k).iter().enumerate() {
            match weights.get(j) {
                Some(w) => writeln!(out, "edge {k} {c} {w}"),
                None => writeln!(out, "edge {k} {c}"),
            }
            .unwrap();
        }
    }
    out
}

pub fn parse_prior(text: &str, graph: &SpnGraph) -> Result<DirichletPrior, ParseError> {
    let mut prior = DirichletPrior::uniform(graph);
    for (line, tokens) in statements(text) {
        let head = tokens[0];
        let (id_token, first_value) = match head.strip_suffix(':') {
            Some(id) => (id, 1),
            None if tokens.get(1) == Some(&":") => (head, 2),
            None => return Err(syntax(line, "expected `<node-id>: a1 ... ak`")),
        };
        let id = parse_usize(line, id_token, "node id")?;
        if id >= graph.num_nodes() {
            return Err(ParseError::Graph {
                line,
                source: GraphError::UnknownNode(id),
            });
        }
        let alpha = tokens[first_value..]
            .iter()
            .map(|t| parse_real(line, t))
            .collect::<Result<Vec<_>, _>>()?;
        prior
            .set_node(graph, NodeId(id), alpha)
            .map_err(|source| ParseError::Graph { line, source })?;
    }
    Ok(prior)
}

pub fn serialize_prior(prior: &DirichletPrior, graph: &SpnGraph) -> String {
    let mut out = String::new();
    for k in graph.sum_nodes() {
        let values: Vec<String> = prior.node(k).iter().map(|a| a.to_string()).collect();
        writeln!(out, "{k}: {}", values.join(" ")).unwrap();
    }
    out
}

fn parse_cell(cell: &str, var: usize, graph: &SpnGraph) -> Result<Option<usize>, String> {
    let cell = cell.trim();
    if cell == "?" {
        return Ok(None);
    }
    let value: usize = cell.parse().map_err(|_| format!("invalid category `{cell}`"))?;
    let arity = graph.arity(var);
    if value >= arity {
        return Err(format!("value {value} outside arity {arity} of variable {var}"));
    }
    Ok(Some(value))
}

/// Parse a single comma-separated row such as `0,?,1`.
pub fn parse_instance_row(row: &str, graph: &SpnGraph) -> Result<Instance, ParseError> {
    let cells: Vec<&str> = row.trim().split(',').collect();
    if cells.len() != graph.num_vars() {
        return Err(ParseError::DataWidth {
            row: 1,
            expected: graph.num_vars(),
            got: cells.len(),
        });
    }
    cells
        .iter()
        .enumerate()
        .map(|(var, cell)| {
            parse_cell(cell, var, graph).map_err(|message| ParseError::Data {
                row: 1,
                column: var + 1,
                message,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Instance::new)
}

/// Parse a headerless CSV data file; rows and columns are reported 1-based.
pub fn parse_data(text: &str, graph: &SpnGraph) -> Result<Vec<Instance>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut instances = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != graph.num_vars() {
            return Err(ParseError::DataWidth {
                row,
                expected: graph.num_vars(),
                got: record.len(),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(var, cell)| {
                parse_cell(cell, var, graph).map_err(|message| ParseError::Data {
                    row,
                    column: var + 1,
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        instances.push(Instance::new(values));
    }
    Ok(instances)
}

/// Print a real with 15 significant digits in the shortest of fixed or
/// exponent notation, like C's `%.15g`. Non-finite values print as
/// `-inf`, `inf` or `nan`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf".into() } else { "inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..15).contains(&exponent) {
        let decimals = (14 - exponent) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exponent.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Model fixtures used throughout the tests and documentation.
pub mod fixtures {
    /// Tree: a sum over two fully factorized products on two binary variables.
    pub const S1: &str = "\
node 0 sum
node 1 prod
node 2 prod
node 3 leaf 0 0
node 4 leaf 1 0
node 5 leaf 0 1
node 6 leaf 1 1
edge 0 1 0.4
edge 0 2 0.6
edge 1 3
edge 1 4
edge 2 5
edge 2 6
";

    /// DAG: sum node 3 is shared by both products under the root.
    pub const S2: &str = "\
node 0 sum
node 1 prod
node 2 prod
node 3 sum
node 4 sum
node 5 sum
node 6 leaf 0 0
node 7 leaf 0 1
node 8 leaf 1 0
node 9 leaf 1 1
edge 0 1 0.5
edge 0 2 0.5
edge 1 3
edge 1 4
edge 2 3
edge 2 5
edge 3 6 0.3
edge 3 7 0.7
edge 4 8 0.6
edge 4 9 0.4
edge 5 8 0.2
edge 5 9 0.8
";

    pub const SINGLE_LEAF: &str = "node 0 leaf 0 0\n";
}
