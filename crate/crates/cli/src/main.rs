mod commands;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use misslab::causal::CausalQuery;
use misslab::estimation::Dataset;
use misslab::graph::parse_mgraph;
use misslab::recovery::Query;
use misslab::simulator::parse_model;
use misslab::MGraph;

use commands::SuiteKind;
use report::{Input, RunReport};

/// Missing-data analysis on m-graphs.
#[derive(Debug, Parser)]
#[command(name = "misslab", version)]
struct Cli {
    /// Print a JSON run report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Family-wise significance level for `test`.
    #[arg(long, global = true, default_value_t = 0.05)]
    alpha: f64,
    /// Depth cap for causal derivations.
    #[arg(long, global = true, default_value_t = 12)]
    depth: usize,
    /// Marker for missing entries in CSV files.
    #[arg(long, global = true, default_value = "NA")]
    na_marker: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the missingness mechanism as MCAR, MAR or MNAR.
    Classify { graph: PathBuf },
    /// Decide whether x and y are d-separated given z.
    Dsep {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        z: Vec<String>,
    },
    /// Derive an estimand for P(Y) or P(Y|X), or show why none exists.
    Recover {
        graph: PathBuf,
        #[arg(long)]
        query: String,
        /// List every admissible ordered factorization.
        #[arg(long)]
        all_factorizations: bool,
    },
    /// Derive an estimand for a causal effect P(outcome | do(..)).
    RecoverCausal {
        graph: PathBuf,
        #[arg(long = "do", value_delimiter = ',', required = true)]
        do_vars: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        outcome: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Independence claims of the graph and whether the data can test them.
    Implications { graph: PathBuf },
    /// Tests implied by MAR for the graph's variables.
    MarTests { graph: PathBuf },
    /// Tests implied by MCAR for the graph's variables.
    McarTests { graph: PathBuf },
    /// Evaluate a recovered estimand on a CSV dataset.
    Estimate {
        graph: PathBuf,
        data: PathBuf,
        #[arg(long)]
        query: String,
    },
    /// Run a suite of independence tests on a CSV dataset.
    Test {
        graph: PathBuf,
        data: PathBuf,
        #[arg(long, value_enum, default_value = "mar")]
        suite: SuiteKind,
    },
    /// Sample a dataset from a model file.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Output CSV; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Dsep { .. } => "dsep",
            Command::Recover { .. } => "recover",
            Command::RecoverCausal { .. } => "recover-causal",
            Command::Implications { .. } => "implications",
            Command::MarTests { .. } => "mar-tests",
            Command::McarTests { .. } => "mcar-tests",
            Command::Estimate { .. } => "estimate",
            Command::Test { .. } => "test",
            Command::Simulate { .. } => "simulate",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

struct Inputs(Vec<Input>);

impl Inputs {
    fn read(&mut self, path: &PathBuf) -> Result<Vec<u8>, Failure> {
        let bytes =
            fs::read(path).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
        self.0.push(Input::new(&path.display().to_string(), &bytes));
        Ok(bytes)
    }

    fn text(&mut self, path: &PathBuf) -> Result<String, Failure> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| Failure::Domain(format!("{}: not UTF-8", path.display())))
    }

    fn graph(&mut self, path: &PathBuf) -> Result<MGraph, Failure> {
        parse_mgraph(&self.text(path)?)
            .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
    }

    fn data(&mut self, path: &PathBuf, na: &str) -> Result<Dataset, Failure> {
        Dataset::read_csv(self.read(path)?.as_slice(), na)
            .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
    }
}

fn query(text: &str) -> Result<Query, Failure> {
    Query::parse(text).map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: &Cli, inputs: &mut Inputs) -> Result<report::Output, Failure> {
    match &cli.command {
        Command::Classify { graph } => commands::classify(&inputs.graph(graph)?),
        Command::Dsep { graph, x, y, z } => commands::dsep(&inputs.graph(graph)?, x, y, z),
        Command::Recover {
            graph,
            query: q,
            all_factorizations,
        } => {
            let g = inputs.graph(graph)?;
            commands::recover_query(&g, &query(q)?, *all_factorizations)
        }
        Command::RecoverCausal {
            graph,
            do_vars,
            outcome,
            given,
        } => {
            let g = inputs.graph(graph)?;
            let mut q = CausalQuery::new(outcome, do_vars);
            q.context = given.clone();
            commands::recover_do(&g, &q, cli.depth)
        }
        Command::Implications { graph } => commands::list_implications(&inputs.graph(graph)?),
        Command::MarTests { graph } => commands::suite(&inputs.graph(graph)?, SuiteKind::Mar),
        Command::McarTests { graph } => commands::suite(&inputs.graph(graph)?, SuiteKind::Mcar),
        Command::Estimate {
            graph,
            data,
            query: q,
        } => {
            let q = query(q)?;
            let g = inputs.graph(graph)?;
            commands::estimate(&g, &inputs.data(data, &cli.na_marker)?, &q)
        }
        Command::Test { graph, data, suite } => {
            if !(cli.alpha > 0.0 && cli.alpha < 1.0) {
                return Err(Failure::Usage(format!(
                    "--alpha must lie in (0, 1), got {}",
                    cli.alpha
                )));
            }
            let g = inputs.graph(graph)?;
            commands::test(&g, &inputs.data(data, &cli.na_marker)?, *suite, cli.alpha)
        }
        Command::Simulate { model, n, out } => {
            let text = inputs.text(model)?;
            let m = parse_model(&text)
                .map_err(|e| Failure::Domain(format!("{}: {e}", model.display())))?;
            let (d, mut output) = commands::simulate(&m, *n, cli.seed, &cli.na_marker)?;
            let write_err =
                |e: misslab::estimation::EstimationError| Failure::Domain(e.to_string());
            match out {
                Some(path) => {
                    let f = fs::File::create(path)
                        .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
                    d.write_csv(io::BufWriter::new(f), &cli.na_marker)
                        .map_err(write_err)?;
                    output.text = format!("wrote {n} rows to {}\n", path.display());
                }
                None => {
                    let mut buf = Vec::new();
                    d.write_csv(&mut buf, &cli.na_marker).map_err(write_err)?;
                    output.text = String::from_utf8(buf).expect("csv output is UTF-8");
                }
            }
            Ok(output)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("MISSLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let start = Instant::now();
    let mut inputs = Inputs(Vec::new());
    match run(&cli, &mut inputs) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            let res = if cli.json {
                let report = RunReport::new(cli.command.name(), inputs.0, out, start.elapsed());
                writeln!(
                    stdout,
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                )
            } else {
                stdout.write_all(out.text.as_bytes())
            };
            if res.is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Domain(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
