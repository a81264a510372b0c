use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gkd::experiment::{
    cmd_build_graph, cmd_evaluate, cmd_sweep_missing, cmd_synth, cmd_train, DatasetSource, ExperimentConfig,
};
use gkd::{Method, SyntheticParams};

/// Graph knowledge distillation experiments.
///
/// Most commands read a TOML experiment config; flags override its fields.
#[derive(Parser)]
#[command(name = "gkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as features.csv, labels.csv and graph_features.csv.
    Synth(SynthArgs),
    /// Build the training-node graph described by the config and write it as an edge list.
    BuildGraph {
        #[command(flatten)]
        common: CommonArgs,
        /// Edge-list file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Select hyperparameters on validation, evaluate every seed on test, write the run directory.
    Train(CommonArgs),
    /// Train every method at every missing rate of the graph features.
    SweepMissing {
        #[command(flatten)]
        common: CommonArgs,
        /// Missing rates in [0, 1).
        #[arg(long, value_delimiter = ',', default_value = "0,0.3,0.6,0.9")]
        rates: Vec<f64>,
        /// Methods to compare.
        #[arg(long, value_delimiter = ',', default_value = "gkd,dnn,dnn-jfc,gcn")]
        methods: Vec<Method>,
    },
    /// Score a saved model on the config's test split. Needs no graph.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Start from the `[dataset]` section of this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    node_dim: Option<usize>,
    #[arg(long)]
    graph_dim: Option<usize>,
    #[arg(long)]
    informative: Option<usize>,
    #[arg(long)]
    class_sep: Option<f64>,
    #[arg(long)]
    p_missing: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML). Without it, defaults apply and --method is required.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    /// Comma-separated trial seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Extra fraction of graph-feature entries to hide.
    #[arg(long)]
    missing_rate: Option<f64>,
    /// Fix the remembrance weight instead of searching the grid.
    #[arg(long)]
    alpha: Option<f64>,
    /// Training epochs for every network.
    #[arg(long)]
    epochs: Option<usize>,
    /// Fraction of training rows with visible labels.
    #[arg(long)]
    labeled: Option<f64>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.method) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(m)) => ExperimentConfig::new(m),
            (None, None) => bail!("pass --config or --method"),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(p) = self.missing_rate {
            cfg.missing_rate = p;
        }
        if let Some(a) = self.alpha {
            cfg.grid.alphas = vec![a];
        }
        if let Some(e) = self.epochs {
            cfg.grid.epochs = e;
        }
        if let Some(l) = self.labeled {
            cfg.split.labeled = l;
        }
        Ok(cfg)
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut p = match &args.config {
        Some(path) => match ExperimentConfig::load(path)?.dataset {
            DatasetSource::Synthetic(p) => p,
            DatasetSource::Csv(_) => bail!("{} describes a CSV dataset, not a synthetic one", path.display()),
        },
        None => SyntheticParams::default(),
    };
    p.n = args.n.unwrap_or(p.n);
    p.node_dim = args.node_dim.unwrap_or(p.node_dim);
    p.graph_dim = args.graph_dim.unwrap_or(p.graph_dim);
    p.informative = args.informative.unwrap_or(p.informative);
    p.class_sep = args.class_sep.unwrap_or(p.class_sep);
    p.p_missing = args.p_missing.unwrap_or(p.p_missing);
    p.seed = args.seed.unwrap_or(p.seed);
    let paths = cmd_synth(&p, &args.out)?;
    println!("{}", paths.features.display());
    println!("{}", paths.labels.display());
    println!("{}", paths.graph_features.display());
    Ok(())
}

/// `Ok(false)` when some trial failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth(args) => synth(&args).map(|_| true),
        Command::BuildGraph { common, out } => {
            let cfg = common.resolve()?;
            let g = cmd_build_graph(&cfg, &out)?;
            println!("{} nodes, {} edges -> {}", g.n(), g.num_edges(), out.display());
            Ok(true)
        }
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let report = cmd_train(&cfg)?;
            let a = &report.aggregate;
            println!(
                "{} accuracy {:.4} ± {:.4}  macro_f1 {:.4} ± {:.4}  auc {:.4} ± {:.4}  ({} of {} seeds)",
                report.method,
                a.accuracy.mean,
                a.accuracy.std,
                a.macro_f1.mean,
                a.macro_f1.std,
                a.auc.mean,
                a.auc.std,
                a.completed,
                report.per_seed.len()
            );
            println!("wrote {}", cfg.output_dir.display());
            Ok(report.all_completed())
        }
        Command::SweepMissing {
            common,
            rates,
            methods,
        } => {
            let cfg = common.resolve()?;
            let sweep = cmd_sweep_missing(&cfg, &rates, &methods)?;
            print!("{}", sweep.to_csv());
            Ok(sweep.all_completed())
        }
        Command::Evaluate { common, model } => {
            let cfg = common.resolve()?;
            let m = cmd_evaluate(&cfg, &model).with_context(|| format!("evaluating {}", model.display()))?;
            println!("{}", serde_json::to_string(&m)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("some trials failed; see the per-seed logs");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
