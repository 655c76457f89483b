//! Command-line front end: `run`, `verify`, `stats`, `gen`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adaptim::graph::{graph_stats, load_edge_list, random_digraph, write_edge_list, write_node_features, LoadOptions};
use adaptim::harness::{aggregate, run_experiment, write_aggregate_csv, ExperimentConfig};
use adaptim::verify::{run_suite, Suite};
use adaptim::{rng, synth_node_features, Error};

#[derive(Parser)]
#[command(name = "adaptim", version, about = "Adaptive influence maximization with intermediary constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeding policies on a graph and write reward curves as CSV.
    Run(Box<RunArgs>),
    /// Run a verification suite on random tiny instances.
    Verify(VerifyArgs),
    /// Print graph statistics as JSON.
    Stats(StatsArgs),
    /// Generate a random graph with well-specified node features.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    rewards: Option<PathBuf>,
    /// Comma-separated subset of rdm,bgg_dgr,grd_kw,grd_lf,grd_lnf.
    #[arg(long)]
    policies: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Per-round CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-round mean and std CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long = "m-cap")]
    m_cap: Option<String>,
    /// Exploration weight of grd_lf, or `auto`.
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long = "prob-lo")]
    prob_lo: Option<String>,
    #[arg(long = "prob-hi")]
    prob_hi: Option<String>,
    /// `matrix` or `streaming`.
    #[arg(long = "draw-mode")]
    draw_mode: Option<String>,
    /// Run cells one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// theorem1, theorem3, lemmas, order, tail, or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long = "max-nodes")]
    max_nodes: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 600)]
    arcs: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long = "prob-lo", default_value_t = 0.01)]
    prob_lo: f64,
    #[arg(long = "prob-hi", default_value_t = 0.1)]
    prob_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list output (`u v p` lines).
    #[arg(long = "out-graph")]
    out_graph: PathBuf,
    /// Node feature output (`label f1 ... fd` lines).
    #[arg(long = "out-features")]
    out_features: PathBuf,
}

enum Failure {
    Invalid(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(*a),
        Command::Verify(a) => verify(a),
        Command::Stats(a) => stats(a),
        Command::Gen(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(2),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &a.config {
        let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        cfg.merge_kv(BufReader::new(file))?;
    }
    if let Some(p) = a.graph {
        cfg.graph = Some(p);
    }
    if let Some(p) = a.features {
        cfg.features = Some(p);
    }
    if let Some(p) = a.rewards {
        cfg.rewards = Some(p);
    }
    if let Some(p) = a.out {
        cfg.out = Some(p);
    }
    let flags = [
        ("policies", a.policies),
        ("rounds", a.rounds),
        ("reps", a.reps),
        ("seed", a.seed),
        ("alpha", a.alpha),
        ("beta", a.beta),
        ("m-cap", a.m_cap),
        ("c", a.c),
        ("dim", a.dim),
        ("prob-lo", a.prob_lo),
        ("prob-hi", a.prob_hi),
        ("draw-mode", a.draw_mode),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if a.serial {
        cfg.parallel = false;
    }
    if cfg.graph.is_none() {
        return Err(Error::Config("`run` needs --graph (or `graph` in --config)".into()).into());
    }
    let table = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => table.write_csv(create(path)?)?,
        None => table.write_csv(io::stdout().lock())?,
    }
    if let Some(path) = &a.summary {
        write_aggregate_csv(&aggregate(&table), create(path)?)?;
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let suites: Vec<Suite> = if a.suite == "all" { Suite::ALL.to_vec() } else { vec![a.suite.parse()?] };
    let mut reports = Vec::new();
    for suite in suites {
        let mut opts = suite.defaults();
        opts.seed = a.seed;
        if let Some(t) = a.trials {
            opts.trials = t;
        }
        if let Some(n) = a.max_nodes {
            opts.max_nodes = n;
        }
        let report = run_suite(suite, &opts)?;
        eprintln!("{}: {} ({} instances)", report.check, if report.passed { "passed" } else { "FAILED" }, report.instances);
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    let json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0]).map_err(Error::from)?
    } else {
        serde_json::to_string_pretty(&reports).map_err(Error::from)?
    };
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}").map_err(Error::from)?;
            w.flush().map_err(Error::from)?;
        }
        None => println!("{json}"),
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn stats(a: StatsArgs) -> Result<(), Failure> {
    let file = File::open(&a.graph).map_err(|e| Error::Config(format!("cannot open {}: {e}", a.graph.display())))?;
    let mut r = rng::stream(&[0]);
    let graph = load_edge_list(BufReader::new(file), &LoadOptions::default(), &mut r)?;
    println!("{}", serde_json::to_string_pretty(&graph_stats(&graph)).map_err(Error::from)?);
    Ok(())
}

fn generate(a: GenArgs) -> Result<(), Failure> {
    let mut r = rng::stream(&[a.seed, rng::label("gen")]);
    let graph = random_digraph(a.nodes, a.arcs, &mut r)?;
    let synth = synth_node_features(&graph, a.dim, (a.prob_lo, a.prob_hi), &mut r)?;
    let graph = graph.with_probabilities(synth.probabilities.clone())?;
    let mut g = create(&a.out_graph)?;
    write_edge_list(&graph, &mut g)?;
    g.flush().map_err(Error::from)?;
    let mut f = create(&a.out_features)?;
    write_node_features(&graph, &synth.node_features, &mut f)?;
    f.flush().map_err(Error::from)?;
    eprintln!("wrote {} nodes, {} arcs; parameter norm {}", graph.node_count(), graph.arc_count(), synth.theta_norm());
    Ok(())
}
