//! `rankweave` — watermark-aware learning-to-rank pipeline.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation or usage failure.
//! Errors go to stderr; data goes to files; progress lines go to stdout.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rankweave",
    version,
    about = "Watermark-aware learning-to-rank pipeline"
)]
struct Cli {
    /// Cap worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the known-watermark domain list from labeled documents.
    BuildDomains {
        /// Documents TSV with wm labels and domains.
        #[arg(long)]
        docs: PathBuf,
        /// A domain must host strictly more than this many labeled images.
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        /// A domain's watermark rate must strictly exceed this.
        #[arg(long, default_value_t = 0.90)]
        min_rate: f64,
        /// Output domain list file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite the wm_prob column by fusing the domain list with the
    /// content-classifier probability.
    Fuse {
        #[arg(long)]
        docs: PathBuf,
        /// Domain list produced by build-domains.
        #[arg(long)]
        domains: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn hybrid-metric parameters from side-by-side verdicts.
    FitMetric {
        /// Pairs TSV with verdict counts.
        #[arg(long)]
        pairs: PathBuf,
        /// Documents TSV the pairs reference.
        #[arg(long)]
        docs: PathBuf,
        /// Output metric parameter file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Starting gradient-descent step.
        #[arg(long, default_value_t = 1.0)]
        init_step: f64,
        /// Halvings tried per iteration before giving up.
        #[arg(long, default_value_t = 40)]
        step_halvings: usize,
        /// Stop once the gradient norm falls below this.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Append a hybrid-rating column to a documents file.
    Rate {
        #[arg(long)]
        docs: PathBuf,
        /// Metric parameter file.
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a LambdaMART ranker against hybrid-rating NDCG.
    Train {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        /// Comma-separated input columns (fN or wm_prob); all features by default.
        #[arg(long)]
        features: Option<String>,
        #[arg(long, default_value_t = 200)]
        n_trees: usize,
        #[arg(long, default_value_t = 0.1)]
        shrinkage: f64,
        #[arg(long, default_value_t = 16)]
        max_leaves: usize,
        #[arg(long, default_value_t = 5)]
        min_docs_per_leaf: usize,
        /// Sharpness of the pairwise logistic force.
        #[arg(long, default_value_t = 1.0)]
        lambda_sigma: f64,
        /// NDCG cutoff during training: "full" or a positive integer.
        #[arg(long, default_value = "full")]
        ndcg_truncation: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a trained model: NDCG@k and watermark rate@k.
    Eval {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        /// Comma-separated cutoffs.
        #[arg(long, default_value = "5,10,25")]
        k: String,
        #[arg(long)]
        out_report: PathBuf,
    },
    /// Generate a synthetic corpus with planted ground truth.
    Synth {
        #[arg(long, default_value_t = 200)]
        n_queries: usize,
        #[arg(long, default_value_t = 30)]
        docs_per_query: usize,
        #[arg(long, default_value_t = 6)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0.25)]
        noise_level: f64,
        #[arg(long, default_value_t = 0.15)]
        watermark_base_rate: f64,
        #[arg(long, default_value_t = 25)]
        domain_count: usize,
        #[arg(long, default_value_t = 8.0)]
        domain_skew: f64,
        /// Defaults to docs_per_query / 2.
        #[arg(long)]
        pairs_per_query: Option<usize>,
        #[arg(long, default_value_t = 5)]
        judgments_per_pair: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_docs: PathBuf,
        #[arg(long)]
        out_pairs: PathBuf,
    },
    /// Compare two evaluation reports over the same dataset.
    Compare {
        /// Control report.
        #[arg(long)]
        a: PathBuf,
        /// Experiment report.
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        // ignore the error if a pool already exists; results are unaffected
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_io() { 1 } else { 2 })
        }
    }
}
