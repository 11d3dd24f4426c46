use std::path::PathBuf;

use clap::{Parser, Subcommand};

use repdiv::clustering::Metric;
use repdiv::distill::CentersMode;
use repdiv::vectorstore::{Format, Space};
use repdiv_cli::{commands, config, pipeline, CliError};

/// Representation-diversity analysis and training-set distillation over
/// per-sample vector snapshots.
#[derive(Parser)]
#[command(name = "repdiv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a vector snapshot; optionally convert between formats
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// jsonl or binary; sniffed from the file when omitted
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        convert_to: Option<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep candidate cluster counts and pick one
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 20)]
        k_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "cosine")]
        metric: Metric,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a vector set at a fixed k
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(short, long)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        metric: Metric,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a vector set to 2D and export the cluster scatter
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        /// clusters_<space>.json from `cluster`
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map cluster labels between the embedding and encoder spaces
    Flow {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        emb_clusters: PathBuf,
        #[arg(long)]
        enc_clusters: PathBuf,
        /// How many top targets to print per source cluster
        #[arg(long, default_value_t = 3)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a budgeted, diversity-preserving subset
    Distill {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        clusters: PathBuf,
        /// Expected space of the input set (checked when given)
        #[arg(long)]
        space: Option<Space>,
        #[arg(long)]
        k_neighbors: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "medoid")]
        centers: CentersMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a uniform random baseline subset
    SampleRandom {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus statistics and ROUGE scoring
    Metrics {
        #[command(subcommand)]
        command: MetricsCommand,
    },
    /// Run the whole pipeline from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's out_dir
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Dataset statistics table for a corpus
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROUGE-1/2/L for candidate/reference pairs
    Rouge {
        /// JSONL with {"id", "candidate", "reference"} lines
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            input,
            format,
            convert_to,
            output,
        } => commands::ingest(&input, format, convert_to, output.as_deref()),
        Command::Sweep {
            input,
            format,
            k_min,
            k_max,
            seeds,
            metric,
            out,
        } => commands::sweep(&input, format, k_min, k_max, &seeds, metric, &out),
        Command::Cluster {
            input,
            format,
            k,
            metric,
            seed,
            out,
        } => commands::cluster(&input, format, k, metric, seed, &out),
        Command::Project {
            input,
            format,
            clusters,
            out,
        } => commands::project(&input, format, &clusters, &out),
        Command::Flow {
            embedding,
            encoder,
            emb_clusters,
            enc_clusters,
            top,
            out,
        } => commands::flow(&embedding, &encoder, &emb_clusters, &enc_clusters, top, &out),
        Command::Distill {
            input,
            format,
            clusters,
            space,
            k_neighbors,
            budget,
            seed,
            centers,
            out,
        } => commands::distill(
            &input,
            format,
            &clusters,
            space,
            k_neighbors,
            budget,
            seed,
            centers,
            &out,
        ),
        Command::SampleRandom {
            input,
            format,
            budget,
            seed,
            out,
        } => commands::sample_random(&input, format, budget, seed, &out),
        Command::Metrics { command } => match command {
            MetricsCommand::Stats { corpus, out } => commands::metrics_stats(&corpus, &out),
            MetricsCommand::Rouge { pairs, out } => commands::metrics_rouge(&pairs, &out),
        },
        Command::Run { config, out } => {
            let (mut run_config, echo) = config::load_config(&config)?;
            if let Some(out) = out {
                run_config.out_dir = out;
            }
            let record = pipeline::run_pipeline(&run_config, &echo)?;
            println!(
                "run complete: {} artifacts in {}",
                record.artifacts.len(),
                run_config.out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            std::process::exit(err.exit_code());
        }
    }
}
