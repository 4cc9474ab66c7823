use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selfgain_cli::commands::{
    cmd_generate, cmd_ingest, cmd_report, cmd_similarity, cmd_sweep, CommandError,
};
use selfgain_cli::config::{Protocol, RunConfig};

#[derive(Parser)]
#[command(
    name = "selfgain",
    version,
    about = "Corpus similarity measures, self-training experiment sweeps, and gain prediction reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the corpus-handling subcommands. Precedence is defaults,
/// then the optional config file, then these flags.
#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding corpus files (one file per domain).
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    /// Comma-separated domain list; default discovers files in --corpus-dir.
    #[arg(long, value_delimiter = ',')]
    domains: Vec<String>,
    /// Documents per normalized domain.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Master seed for sampling, training and significance testing.
    #[arg(long)]
    seed: Option<u64>,
    /// Similarity measures (cosine|euclidean|kl|js|suwr), comma-separated.
    #[arg(long = "measure", value_delimiter = ',')]
    measures: Vec<String>,
    /// Sweep mode: domain, bulk or both.
    #[arg(long)]
    mode: Option<String>,
    /// Additive threshold of the unsupervised indicator.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Neighbor count for kNN gain prediction.
    #[arg(long)]
    k: Option<usize>,
    /// L2 regularization of the linear learner.
    #[arg(long)]
    regularization: Option<f64>,
    /// Training epochs of the linear learner.
    #[arg(long)]
    epochs: Option<u32>,
    /// Monte-Carlo iterations for significance testing (0 disables).
    #[arg(long)]
    sig_iterations: Option<u32>,
    /// Disable label-stratified sampling.
    #[arg(long)]
    no_stratify: bool,
    /// Corpus file format: canonical or blitzer.
    #[arg(long)]
    format: Option<String>,
    /// Sweep worker threads (0 = automatic).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn build(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(dir) = &self.corpus_dir {
            cfg.corpus_dir = dir.clone();
        }
        if !self.domains.is_empty() {
            cfg.domains = self.domains.clone();
        }
        if let Some(v) = self.sample_size {
            cfg.sample_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if !self.measures.is_empty() {
            cfg.apply_entry("measure", &self.measures.join(","))
                .map_err(CommandError::Config)?;
        }
        if let Some(mode) = &self.mode {
            cfg.apply_entry("mode", mode).map_err(CommandError::Config)?;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.regularization {
            cfg.regularization = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.sig_iterations {
            cfg.significance_iterations = v;
        }
        if self.no_stratify {
            cfg.stratify = false;
        }
        if let Some(format) = &self.format {
            cfg.apply_entry("format", format)
                .map_err(CommandError::Config)?;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(dir) = &self.out {
            cfg.out_dir = dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic labeled domains as CANONICAL corpus files.
    Generate {
        /// Output directory for the generated corpora.
        #[arg(long)]
        out: PathBuf,
        /// Number of domains.
        #[arg(long, default_value_t = 6)]
        n_domains: usize,
        /// Vocabulary size shared by all domains.
        #[arg(long, default_value_t = 1500)]
        vocab: usize,
        /// Documents per domain.
        #[arg(long, default_value_t = 2500)]
        docs: usize,
        /// Divergence knob in [0, 1]: 0 = identical domains, 1 = disjoint.
        #[arg(long, default_value_t = 0.6)]
        knob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Normalize raw domain corpora to fixed-size CANONICAL samples.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the self-training experiment sweep and write JSONL results.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print one similarity value (two domain args) or a pairwise CSV matrix.
    Similarity {
        #[command(flatten)]
        common: CommonArgs,
        /// Domain in the P (test) role.
        from: Option<String>,
        /// Domain in the Q (train) role.
        to: Option<String>,
    },
    /// Render report CSVs from sweep results.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Results file; defaults to <out>/results.jsonl.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Protocols: unsup|loo|tailored|tailored-tt-only|baselines|grid|all.
        #[arg(long = "protocol", value_delimiter = ',', default_value = "all")]
        protocols: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<u8, CommandError> {
    match cli.command {
        Command::Generate {
            out,
            n_domains,
            vocab,
            docs,
            knob,
            seed,
        } => {
            let ids = cmd_generate(&out, n_domains, vocab, docs, knob, seed)?;
            println!(
                "generated {} domains under {}: {}",
                ids.len(),
                out.display(),
                ids.join(", ")
            );
            Ok(0)
        }
        Command::Ingest { common } => {
            let cfg = common.build()?;
            let report = cmd_ingest(&cfg)?;
            for s in &report.ingested {
                println!(
                    "{}: {} docs ({} pos / {} neg), vocab {}, sha256 {}",
                    s.domain, s.documents, s.positive, s.negative, s.vocabulary, s.sha256
                );
            }
            println!(
                "ingested {} domains into {}; manifest at {}",
                report.ingested.len(),
                report.corpora_dir.display(),
                report.manifest.display()
            );
            if report.skipped.is_empty() {
                Ok(0)
            } else {
                for (domain, size) in &report.skipped {
                    eprintln!(
                        "warning: skipped `{domain}` ({size} docs < sample size {})",
                        cfg.sample_size
                    );
                }
                Ok(1)
            }
        }
        Command::Sweep { common } => {
            let cfg = common.build()?;
            let report = cmd_sweep(&cfg)?;
            println!(
                "{} setups ({} resumed), {} with gain; results at {}",
                report.total_setups,
                report.resumed,
                report.gain_count,
                report.results_path.display()
            );
            Ok(0)
        }
        Command::Similarity { common, from, to } => {
            let cfg = common.build()?;
            let output = cmd_similarity(&cfg, from.as_deref(), to.as_deref())?;
            print!("{output}");
            Ok(0)
        }
        Command::Report {
            common,
            results,
            protocols,
        } => {
            let cfg = common.build()?;
            let results_path = results.unwrap_or_else(|| cfg.out_dir.join("results.jsonl"));
            let protocols: Vec<Protocol> = protocols
                .iter()
                .map(|p| p.parse().map_err(CommandError::Input))
                .collect::<Result<_, _>>()?;
            let written = cmd_report(&cfg, &results_path, &protocols)?;
            for path in &written {
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
