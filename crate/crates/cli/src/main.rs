use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod exit;

use config::{Layer, RunConfig};
use exit::CliError;

/// Texture retrieval on Gamma and Weibull manifolds of wavelet statistics.
#[derive(Debug, Parser)]
#[command(name = "statgeo", version)]
struct Cli {
    /// Plain-text `key = value` settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More diagnostics on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a signature database from a labeled image directory.
    Extract(ExtractArgs),
    /// Rank every image against the database and report retrieval rates.
    Evaluate(EvaluateArgs),
    /// Write a seeded synthetic texture dataset.
    Synth(SynthArgs),
    /// Divergences and distances between two points of one manifold.
    Geo(GeoArgs),
    /// All-pairs shortest paths of a matrix file.
    Fw(FwArgs),
    /// Report metric-axiom violations of a matrix file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// gamma or weibull.
    #[arg(long)]
    family: Option<String>,
    /// Wavelet decomposition levels, 1 to 5.
    #[arg(long)]
    levels: Option<usize>,
    /// skld, sqrt-two-skld or kld-directed.
    #[arg(long)]
    edge_weight: Option<String>,
    /// How subband distances combine: sum or l2.
    #[arg(long)]
    aggregation: Option<String>,
}

impl ModelArgs {
    fn apply(&self, layer: &mut Layer) {
        layer.set_opt("family", self.family.as_ref());
        layer.set_opt("levels", self.levels);
        layer.set_opt("edge_weight", self.edge_weight.as_ref());
        layer.set_opt("aggregation", self.aggregation.as_ref());
    }
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Dataset root. Without a manifest every subdirectory is a class.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Lines of `prefix class` labeling the files directly under the root.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl DatasetArgs {
    fn apply(&self, layer: &mut Layer) {
        layer.set_opt("dataset", self.dataset.as_ref().map(|p| p.display()));
        layer.set_opt("manifest", self.manifest.as_ref().map(|p| p.display()));
    }
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Output database file.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Leave out images that fail instead of aborting.
    #[arg(long)]
    skip_bad: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Signature database; repeat to compare several in one table.
    #[arg(long)]
    db: Vec<PathBuf>,
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated subset of KLD, SKLD, GDSKLD, GDFloyd.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Cut-offs; default is the class size.
    #[arg(short = 'k', long = "k", value_delimiter = ',')]
    ks: Vec<usize>,
    /// Rank only the other images; the query does not count as a hit.
    #[arg(long)]
    exclude_query: bool,
    /// Directory for ARR, precision-recall and JSON reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; one subdirectory per class.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    /// Image side length in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// 1 gives well separated classes, values near 0 overlapping ones.
    #[arg(long)]
    separation: Option<f64>,
    /// Per-image variation around the class spectrum.
    #[arg(long)]
    jitter: Option<f64>,
}

#[derive(Debug, Args)]
struct GeoArgs {
    /// gamma or weibull.
    #[arg(long)]
    family: Option<String>,
    /// First point as `scale,shape`.
    #[arg(long, value_name = "SCALE,SHAPE")]
    from: String,
    /// Second point as `scale,shape`.
    #[arg(long, value_name = "SCALE,SHAPE")]
    to: String,
    /// Integration steps of the geodesic solver.
    #[arg(long, default_value_t = 128)]
    steps: usize,
}

#[derive(Debug, Args)]
struct FwArgs {
    /// CSV (header row of labels) or DMAT matrix.
    input: PathBuf,
    /// Output file; `.dmat` writes binary, anything else CSV. Default: CSV on stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Keep only edges to each vertex's k nearest neighbours.
    #[arg(long)]
    knn: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// CSV (header row of labels) or DMAT matrix.
    input: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn settings(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(path) => Layer::load(path)?,
        None => Layer::default(),
    };
    let mut flags = Layer::default();
    flags.set_opt("workers", cli.workers);
    match &cli.command {
        Command::Extract(a) => {
            a.data.apply(&mut flags);
            a.model.apply(&mut flags);
            flags.set_opt("db", a.db.as_ref().map(|p| p.display()));
            if a.skip_bad {
                flags.set("skip_bad", true);
            }
        }
        Command::Evaluate(a) => {
            a.data.apply(&mut flags);
            a.model.apply(&mut flags);
            flags.set_list("db", &a.db.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
            flags.set_list("methods", &a.methods);
            flags.set_list("k", &a.ks);
            if a.exclude_query {
                flags.set("include_query", false);
            }
            flags.set_opt("out", a.out.as_ref().map(|p| p.display()));
        }
        Command::Synth(a) => {
            flags.set_opt("out", a.out.as_ref().map(|p| p.display()));
            flags.set_opt("classes", a.classes);
            flags.set_opt("per_class", a.per_class);
            flags.set_opt("size", a.size);
            flags.set_opt("seed", a.seed);
            flags.set_opt("separation", a.separation);
            flags.set_opt("jitter", a.jitter);
        }
        Command::Geo(a) => flags.set_opt("family", a.family.as_ref()),
        Command::Fw(_) | Command::Validate(_) => {}
    }
    RunConfig::resolve(&file.overlay(flags))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = settings(&cli)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    }
    match cli.command {
        Command::Extract(_) => commands::extract(&cfg),
        Command::Evaluate(_) => commands::evaluate(&cfg),
        Command::Synth(_) => commands::synth(&cfg),
        Command::Geo(a) => commands::geo(&cfg, &a.from, &a.to, a.steps),
        Command::Fw(a) => commands::fw(&a.input, a.output.as_deref(), a.knn),
        Command::Validate(a) => commands::validate(&a.input, a.json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { exit::CONFIG } else { exit::OK });
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) if e.code == exit::OK => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
