//! Command-line front end: experiment configuration, the data pipeline and
//! one function per subcommand.

pub mod commands;
pub mod config;
pub mod pipeline;

use std::io::Write;
use std::path::PathBuf;

use causalrec::{Error, Result};
use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "causalrec", version, about = "Visually-aware recommenders with counterfactual debiasing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print user, item and interaction counts after filtering.
    Stats,
    /// Write a synthetic planted-bias corpus into the --out directory.
    Synth,
    /// Train --model and write a checkpoint plus its loss history.
    Train,
    /// Score a checkpoint on its test split and print a JSON report.
    Evaluate,
    /// Train once and evaluate the debiased scorer over the lambda2 grid.
    #[command(name = "sweep-lambda2")]
    SweepLambda2,
    /// Compare models with and without their debiased scorers.
    #[command(name = "compare-ci")]
    CompareCi,
}

#[derive(Debug, Default, Args)]
pub struct GlobalOpts {
    /// key = value experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Use the debiased scorer.
    #[arg(long, global = true)]
    pub ci: bool,
    #[arg(long, global = true)]
    pub lambda2: Option<f64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub features: Option<PathBuf>,
    #[arg(long, global = true)]
    pub interactions: Option<PathBuf>,
    #[arg(long, global = true)]
    pub categories: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Dimension of a TSV feature file.
    #[arg(long = "feature-dim", global = true)]
    pub feature_dim: Option<usize>,
    /// Rank test items against the user's training positives too.
    #[arg(long = "include-train-positives", global = true)]
    pub include_train_positives: bool,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

impl GlobalOpts {
    /// The config file (or defaults) with `--set` pairs and then the
    /// dedicated flags applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{pair}'")))?;
            c.set(key.trim(), value.trim())?;
        }
        if let Some(m) = &self.model {
            c.set("model", m)?;
        }
        if self.ci {
            c.ci = true;
        }
        if let Some(v) = self.lambda2 {
            c.train.lambda2 = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.seed {
            c.set("seed", &v.to_string())?;
        }
        let paths = [
            (&self.out, &mut c.out),
            (&self.features, &mut c.features),
            (&self.interactions, &mut c.interactions),
            (&self.categories, &mut c.categories),
            (&self.checkpoint, &mut c.checkpoint),
        ];
        for (flag, slot) in paths {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if self.feature_dim.is_some() {
            c.feature_dim = self.feature_dim;
        }
        if self.include_train_positives {
            c.train.exclude_train_positives = false;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs a parsed command line, writing command output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let config = cli.opts.resolve()?;
    match cli.command {
        Command::Stats => commands::cmd_stats(&config, out),
        Command::Synth => commands::cmd_synth(&config, out),
        Command::Train => commands::cmd_train(&config, out),
        Command::Evaluate => commands::cmd_evaluate(&config, out),
        Command::SweepLambda2 => commands::cmd_sweep_lambda2(&config, out),
        Command::CompareCi => commands::cmd_compare_ci(&config, out),
    }
}

/// Process exit code for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        "config" => 2,
        "parse" => 3,
        "data" => 4,
        "protocol" => 5,
        "numerical" => 6,
        _ => 1,
    }
}
