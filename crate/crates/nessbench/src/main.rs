use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nessbench::cli::{
    cmd_analyze, cmd_compare, cmd_eval, cmd_split, cmd_synth, parse_block_list, parse_ratios,
    parse_seed_list, SplitSampler,
};
use nessbench::data::SbmParams;

/// Link-prediction benchmark toolkit: graph autoencoders over static
/// edge-disjoint subgraphs with test-time latent aggregation, plus
/// full-graph and dynamically sampled baselines.
#[derive(Parser)]
#[command(name = "nessbench", version, about)]
struct CliArgs {
    /// Master seed; every random stage derives a named substream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for compare sweeps (falls back to NESSBENCH_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic-block-model dataset as text files.
    Synth(SynthArgs),
    /// Split a dataset into train/val/test and K static subgraph views.
    Split(SplitArgs),
    /// Train a model from a config file on a stored split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the stored test split.
    Eval(EvalArgs),
    /// Run the subgraph analysis suite for a checkpoint.
    Analyze(AnalyzeArgs),
    /// Multi-seed sweep over a config matrix with summary statistics.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated block sizes, e.g. 100,100,100.
    #[arg(long, default_value = "100,100,100")]
    blocks: String,
    /// Within-block edge probability.
    #[arg(long, default_value_t = 0.05)]
    intra_p: f64,
    /// Between-block edge probability.
    #[arg(long, default_value_t = 0.002)]
    inter_p: f64,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    /// Uniform noise magnitude added to the one-hot block features.
    #[arg(long, default_value_t = 0.1)]
    feature_noise: f64,
    /// Output directory for features.txt / edges.txt / labels.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// train,val,test ratios.
    #[arg(long, default_value = "0.85,0.05,0.10")]
    ratios: String,
    /// Number of static subgraph views.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// View sampler: res (edge-disjoint partition), re, rwj, or rn.
    #[arg(long, default_value = "res")]
    sampler: String,
    /// Output split file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Split file produced by `split`.
    #[arg(long)]
    split: PathBuf,
    /// Output directory for checkpoint, metrics CSV, and manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Optional file to also write the metrics JSON to.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Comma-separated subset of fig3a,fig3b,fig3c,fig4a,fig5
    /// (default: every analysis applicable to the checkpoint).
    #[arg(long)]
    analyses: Option<String>,
    /// Output directory for analysis.json and analysis.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Text file listing one config path per line.
    #[arg(long)]
    matrix: PathBuf,
    /// Comma-separated seed list, e.g. 0,1,2,3.
    #[arg(long)]
    seeds: String,
    /// Output directory for runs.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

fn thread_count(cli: &CliArgs) -> usize {
    cli.threads
        .or_else(|| {
            std::env::var("NESSBENCH_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn run(cli: CliArgs) -> nessbench::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Synth(args) => {
            let params = SbmParams {
                block_sizes: parse_block_list(&args.blocks)?,
                intra_p: args.intra_p,
                inter_p: args.inter_p,
                feature_dim: args.feature_dim,
                feature_noise: args.feature_noise,
                seed,
            };
            let stats = cmd_synth(&params, &args.out)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Split(args) => {
            let dataset = nessbench::cli::DatasetPaths {
                features: args.features.clone(),
                edges: args.edges.clone(),
                labels: args.labels.clone(),
            };
            let ratios = parse_ratios(&args.ratios)?;
            let sampler: SplitSampler = args.sampler.parse()?;
            let (split, partition) =
                cmd_split(&dataset, ratios, args.k, sampler, seed, &args.out)?;
            println!(
                "wrote {}: {} train / {} val / {} test edges, {} views",
                args.out.display(),
                split.train.len(),
                split.val_pos.len(),
                split.test_pos.len(),
                partition.k()
            );
        }
        Command::Train(args) => {
            let artifacts =
                nessbench::cli::cmd_train(&args.config, &args.split, &args.out, cli.seed)?;
            println!(
                "trained: best epoch {} of {}, checkpoint {}",
                artifacts.result.best_epoch,
                artifacts.result.epochs_run(),
                artifacts.checkpoint.display()
            );
        }
        Command::Eval(args) => {
            let report = cmd_eval(&args.checkpoint, &args.split)?;
            let json = serde_json::to_string_pretty(&report)?;
            if let Some(out) = &args.out {
                std::fs::write(out, &json)
                    .map_err(|e| nessbench::Error::io(out.display().to_string(), e))?;
            }
            println!("{json}");
        }
        Command::Analyze(args) => {
            let list: Option<Vec<String>> = args
                .analyses
                .as_ref()
                .map(|s| s.split(',').map(|p| p.trim().to_string()).collect());
            cmd_analyze(&args.checkpoint, &args.split, list.as_deref(), &args.out)?;
            println!("wrote {}", args.out.join("analysis.json").display());
        }
        Command::Compare(args) => {
            let seeds = parse_seed_list(&args.seeds)?;
            let threads = thread_count(&cli);
            let summaries = cmd_compare(&args.matrix, &seeds, &args.out, threads)?;
            for s in &summaries {
                println!(
                    "{}: AUC {:.4} +- {:.4}, AP {:.4} +- {:.4} ({} seeds)",
                    s.config, s.auc_mean, s.auc_std, s.ap_mean, s.ap_std, s.n_seeds
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = CliArgs::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
