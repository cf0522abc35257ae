use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spn_core::format::{
    format_real, parse_data, parse_instance_row, parse_model, parse_prior, serialize_model, serialize_prior, ParseError,
};
use spn_core::graph::validate;
use spn_core::inference::{count_induced_trees, log_likelihood};
use spn_core::moments::{compute_moments, MomentError, MomentFunction};
use spn_core::online::{train, LearnError, ZeroEvidencePolicy};
use spn_core::oracle::{Oracle, OracleError, DEFAULT_TREE_CAP};
use spn_core::scaling::{run_sweep, SweepConfig};
use spn_core::{Algorithm, DirichletPrior, Instance, LearnerState, SpnGraph, ValidationReport};

/// Relative tolerance of `oracle-check`.
const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "spn",
    version,
    about = "Exact posterior moments and online learning for sum-product networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check structure, completeness, decomposability and normalization.
    Validate { model: PathBuf },
    /// Print the exact number of induced trees.
    CountTrees { model: PathBuf },
    /// Print the log-likelihood of every data row.
    Infer {
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Posterior moments of every sum-edge weight after one observation.
    Moments {
        model: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        /// Comma-separated row, `?` for a marginalized variable.
        #[arg(long, allow_hyphen_values = true)]
        instance: String,
        #[arg(long, default_value = "mean")]
        function: MomentFunction,
    },
    /// Stream a data file through an online learner.
    Train {
        model: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        /// Model with the learned point estimate as weights.
        #[arg(long)]
        out_model: Option<PathBuf>,
        /// Learned hyperparameters (adf and bmm only).
        #[arg(long)]
        out_prior: Option<PathBuf>,
        /// CSV log of the predictive log-likelihoods.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Stop at the first zero-probability row instead of skipping it.
        #[arg(long)]
        abort_on_zero: bool,
    },
    /// Time moment queries over random networks of growing size.
    Bench {
        #[arg(long, default_value_t = 1_000)]
        min_edges: usize,
        #[arg(long, default_value_t = 100_000)]
        max_edges: usize,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also time the quadratic per-edge recomputation.
        #[arg(long)]
        naive: bool,
    },
    /// Compare every moment against brute-force tree enumeration.
    OracleCheck {
        model: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

/// Exit 1 for domain and validation failures, 2 for I/O and format errors.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn domain(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl Fn(ParseError) -> Failure + '_ {
    move |e| Failure::input(format!("{}: {e}", path.display()))
}

/// Parse and validate; invalid models are rejected, never repaired.
fn load_model(path: &Path) -> Result<SpnGraph, Failure> {
    let graph = parse_model(&read(path)?).map_err(|e| match e.structure() {
        Some(err) => Failure::domain(format!("{}: {err}", path.display())),
        None => in_file(path)(e),
    })?;
    let report = validate(&graph);
    match report.violations().first() {
        None => Ok(graph),
        Some(v) => Err(Failure::domain(format!("{}: invalid model: {v}", path.display()))),
    }
}

fn load_prior(path: &Path, graph: &SpnGraph) -> Result<DirichletPrior, Failure> {
    parse_prior(&read(path)?, graph).map_err(in_file(path))
}

fn load_data(path: &Path, graph: &SpnGraph) -> Result<Vec<Instance>, Failure> {
    parse_data(&read(path)?, graph).map_err(in_file(path))
}

fn cmd_validate(model: &Path) -> Outcome {
    let report = match parse_model(&read(model)?) {
        Ok(graph) => validate(&graph),
        Err(e) => match e.structure().and_then(ValidationReport::from_structure_error) {
            Some(report) => report,
            None => return Err(in_file(model)(e)),
        },
    };
    print!("{report}");
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::domain(format!(
            "{}: {} violation(s)",
            model.display(),
            report.violations().len()
        )))
    }
}

fn cmd_count_trees(model: &Path) -> Outcome {
    println!("{}", count_induced_trees(&load_model(model)?));
    Ok(())
}

fn cmd_infer(model: &Path, data: &Path) -> Outcome {
    let graph = load_model(model)?;
    let rows = load_data(data, &graph)?;
    let mut out = String::new();
    for x in &rows {
        let ll = log_likelihood(&graph, graph.weights(), x).map_err(Failure::domain)?;
        writeln!(out, "{}", format_real(ll.ln())).unwrap();
    }
    print!("{out}");
    Ok(())
}

fn cmd_moments(model: &Path, prior: &Path, instance: &str, function: MomentFunction) -> Outcome {
    let graph = load_model(model)?;
    let prior = load_prior(prior, &graph)?;
    let x = parse_instance_row(instance, &graph).map_err(|e| Failure::input(format!("--instance: {e}")))?;
    let report = match compute_moments(&graph, &prior, &x, function) {
        Ok(r) => r,
        Err(MomentError::ZeroEvidence) => {
            return Err(Failure::domain(
                "instance has zero probability under prior-mean weights",
            ))
        }
        Err(e) => return Err(Failure::domain(e)),
    };
    let mut out = String::from("parent_id\tchild_id\tlambda\tprior_moment\tincremented_moment\tposterior_moment\n");
    for e in &report.edges {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.parent,
            e.child,
            format_real(e.lambda),
            format_real(e.prior),
            format_real(e.incremented),
            format_real(e.posterior)
        )
        .unwrap();
    }
    print!("{out}");
    Ok(())
}

struct TrainArgs<'a> {
    model: &'a Path,
    prior: &'a Path,
    data: &'a Path,
    algo: Algorithm,
    out_model: Option<&'a Path>,
    out_prior: Option<&'a Path>,
    log: Option<&'a Path>,
    abort_on_zero: bool,
}

fn cmd_train(args: TrainArgs) -> Outcome {
    let graph = load_model(args.model)?;
    let prior = load_prior(args.prior, &graph)?;
    let rows = load_data(args.data, &graph)?;
    let initial = LearnerState::new(args.algo, &prior).map_err(Failure::domain)?;
    let policy = if args.abort_on_zero {
        ZeroEvidencePolicy::Abort
    } else {
        ZeroEvidencePolicy::Skip
    };
    let (state, log) = train(&graph, initial, &rows, policy).map_err(|e| match e {
        LearnError::ZeroEvidence { step } => Failure::domain(format!("row {step} has zero probability")),
        other => Failure::domain(other),
    })?;

    if let Some(path) = args.out_model {
        let learned = graph
            .with_weights(state.predictive_weights())
            .map_err(Failure::domain)?;
        write(path, &serialize_model(&learned))?;
    }
    if let Some(path) = args.out_prior {
        match state.prior() {
            Some(alpha) => write(path, &serialize_prior(&alpha, &graph))?,
            None => eprintln!("warning: --out-prior is ignored for {}", args.algo),
        }
    }
    if let Some(path) = args.log {
        write(path, &log.to_csv())?;
    }
    let avg = log.entries.last().map_or(0.0, |e| e.running_avg);
    println!(
        "{} rows, {} skipped, mean predictive log-likelihood {}",
        log.len(),
        log.skipped(),
        format_real(avg)
    );
    Ok(())
}

fn cmd_bench(config: SweepConfig) -> Outcome {
    let report = run_sweep(&config).map_err(Failure::domain)?;
    let mut out = String::from("edges,nodes,seconds_per_query,seconds_per_edge,naive_seconds_per_query\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.edges,
            r.nodes,
            format_real(r.seconds_per_query),
            format_real(r.seconds_per_edge),
            r.naive_seconds_per_query.map(format_real).unwrap_or_default()
        )
        .unwrap();
    }
    if let Some(slope) = report.log_log_slope() {
        writeln!(out, "# log-log slope {slope:.3}").unwrap();
    }
    if !report.rows.is_empty() {
        writeln!(out, "# time-per-edge spread {:.3}", report.per_edge_spread()).unwrap();
    }
    if let Some(slope) = report.naive_log_log_slope() {
        writeln!(out, "# naive log-log slope {slope:.3}").unwrap();
    }
    print!("{out}");
    Ok(())
}

fn cmd_oracle_check(model: &Path, prior: &Path, data: &Path) -> Outcome {
    let graph = load_model(model)?;
    let prior = load_prior(prior, &graph)?;
    let rows = load_data(data, &graph)?;
    let oracle = Oracle::new(&graph, DEFAULT_TREE_CAP).map_err(Failure::domain)?;
    let (mut compared, mut skipped, mut mismatches) = (0usize, 0usize, 0usize);
    let mut worst = 0.0f64;
    for (i, x) in rows.iter().enumerate() {
        for f in MomentFunction::ALL {
            let report = match compute_moments(&graph, &prior, x, f) {
                Ok(r) => r,
                Err(MomentError::ZeroEvidence) => {
                    skipped += 1;
                    break;
                }
                Err(e) => return Err(Failure::domain(e)),
            };
            for e in &report.edges {
                let expected = match oracle.moment(&prior, x, e.parent, e.child, f) {
                    Ok(v) => v,
                    Err(OracleError::ZeroEvidence) => {
                        return Err(Failure::domain(format!("row {}: oracle sees zero evidence", i + 1)))
                    }
                    Err(err) => return Err(Failure::domain(err)),
                };
                let err = if e.posterior == expected {
                    0.0
                } else {
                    (e.posterior - expected).abs() / e.posterior.abs().max(expected.abs())
                };
                worst = worst.max(err);
                compared += 1;
                if err > ORACLE_TOLERANCE {
                    mismatches += 1;
                    println!(
                        "mismatch row {} edge {}->{} {f}: {} vs oracle {}",
                        i + 1,
                        e.parent,
                        e.child,
                        format_real(e.posterior),
                        format_real(expected)
                    );
                }
            }
        }
    }
    println!(
        "{} trees, {} rows ({skipped} zero-probability skipped), {compared} moments compared, max relative error {worst:.3e}",
        oracle.trees().len(),
        rows.len()
    );
    if mismatches == 0 {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure::domain(format!(
            "{mismatches} moment(s) differ from the oracle by more than {ORACLE_TOLERANCE:e}"
        )))
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::CountTrees { model } => cmd_count_trees(&model),
        Command::Infer { model, data } => cmd_infer(&model, &data),
        Command::Moments {
            model,
            prior,
            instance,
            function,
        } => cmd_moments(&model, &prior, &instance, function),
        Command::Train {
            model,
            prior,
            data,
            algo,
            out_model,
            out_prior,
            log,
            abort_on_zero,
        } => cmd_train(TrainArgs {
            model: &model,
            prior: &prior,
            data: &data,
            algo,
            out_model: out_model.as_deref(),
            out_prior: out_prior.as_deref(),
            log: log.as_deref(),
            abort_on_zero,
        }),
        Command::Bench {
            min_edges,
            max_edges,
            steps,
            seed,
            naive,
        } => cmd_bench(SweepConfig {
            min_edges,
            max_edges,
            steps,
            seed,
            naive,
            ..SweepConfig::default()
        }),
        Command::OracleCheck { model, prior, data } => cmd_oracle_check(&model, &prior, &data),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
