//! One function per subcommand. Each writes its human or machine output to
//! `out` and any files to the configured paths.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use causalrec::causal::reference_values;
use causalrec::data::{
    dataset_stats, generate_synthetic, kcore_filter, write_features_binary, write_ground_truth,
    write_interactions, DatasetStats,
};
use causalrec::eval::{evaluate, Debias, EvalReport, Metrics, ModelScorer};
use causalrec::training::{load_checkpoint, save_checkpoint};
use causalrec::{
    train, Error, Fusion, ItemFeatures, ItemSide, ModelKind, ParamSet, Result, SplitDataset,
    TrainConfig, TrainHistory,
};
use log::{info, warn};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::pipeline::{load_corpus, prepare, sibling};

fn stdout_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<output>"),
        source: e,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("{what} is required (use --{what})")))
}

pub fn format_stats(stats: &DatasetStats) -> String {
    format!(
        "{:>10} {:>10} {:>14} {:>9}\n{:>10} {:>10} {:>14} {:>8.2}%\n",
        "#Users",
        "#Items",
        "#Interactions",
        "Sparsity",
        stats.n_users,
        stats.n_items,
        stats.n_interactions,
        stats.sparsity * 100.0
    )
}

pub fn cmd_stats(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(config)?;
    out.write_all(format_stats(&dataset_stats(&corpus.dataset)).as_bytes())
        .map_err(stdout_err)
}

pub const SYNTH_INTERACTIONS: &str = "interactions.tsv";
pub const SYNTH_FEATURES: &str = "features.vft";
pub const SYNTH_GROUND_TRUTH: &str = "ground_truth.tsv";
pub const SYNTH_MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a causalrec::data::SyntheticSpec,
    visual_share: f64,
    min_count: usize,
    filter_mode: causalrec::data::FilterMode,
    /// `None` when nothing survives the filter.
    post_filter: Option<DatasetStats>,
    files: [&'static str; 3],
}

/// Writes the synthetic corpus into the `out` directory.
pub fn cmd_synth(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dir = required(&config.out, "out")?;
    let corpus = generate_synthetic(&config.synth)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_interactions(dir.join(SYNTH_INTERACTIONS), &corpus.raw)?;
    write_features_binary(dir.join(SYNTH_FEATURES), &corpus.store)?;
    write_ground_truth(
        dir.join(SYNTH_GROUND_TRUTH),
        &corpus.user_tokens,
        &corpus.item_tokens,
        &corpus.ground_truth,
    )?;
    let post_filter = match kcore_filter(&corpus.raw, &corpus.store, config.min_count, config.filter_mode) {
        Ok(d) => Some(dataset_stats(&d)),
        Err(e) => {
            warn!("{e}");
            None
        }
    };
    let manifest = Manifest {
        spec: &config.synth,
        visual_share: config.synth.visual_share,
        min_count: config.min_count,
        filter_mode: config.filter_mode,
        post_filter,
        files: [SYNTH_INTERACTIONS, SYNTH_FEATURES, SYNTH_GROUND_TRUTH],
    };
    let path = dir.join(SYNTH_MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    writeln!(out, "wrote synthetic corpus to {}", dir.display()).map_err(stdout_err)
}

fn run_training(
    kind: ModelKind,
    split: &SplitDataset,
    features: &ItemFeatures,
    config: &TrainConfig,
) -> Result<(ParamSet, TrainHistory)> {
    let start = Instant::now();
    let (params, history) = train(kind, split, features, config)?;
    info!(
        "trained {kind} for {} epochs in {:.1}s (final loss {:?})",
        history.epochs(),
        start.elapsed().as_secs_f64(),
        history.epoch_loss.last()
    );
    Ok((params, history))
}

/// `epoch,loss,validation_mrr` rows. Timings are logged, not written, so the
/// file is reproducible.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut s = String::from("epoch,loss,validation_mrr\n");
    for (e, loss) in history.epoch_loss.iter().enumerate() {
        let v = history
            .validation_mrr
            .get(e)
            .map_or(String::new(), |m| m.to_string());
        s.push_str(&format!("{},{loss},{v}\n", e + 1));
    }
    s
}

/// Trains `config.model` and writes the checkpoint to `checkpoint` (or
/// `out`) plus `<checkpoint>.history.csv`.
pub fn cmd_train(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let path = required(
        if config.checkpoint.is_some() {
            &config.checkpoint
        } else {
            &config.out
        },
        "checkpoint",
    )?;
    let prepared = prepare(config)?;
    let (params, history) =
        run_training(config.model, &prepared.split, &prepared.features, &prepared.train)?;
    save_checkpoint(path, &params, &prepared.train)?;
    let hist = sibling(path, ".history.csv");
    fs::write(&hist, history_csv(&history)).map_err(io_err(&hist))?;
    writeln!(
        out,
        "wrote {} checkpoint to {} ({} epochs)",
        config.model,
        path.display(),
        history.epochs()
    )
    .map_err(stdout_err)
}

/// Ranks the test split with the biased scorer, or with the model's
/// debiased scorer when `ci` is set.
pub fn score_split(
    params: &ParamSet,
    split: &SplitDataset,
    features: &ItemFeatures,
    train: &TrainConfig,
    ci: bool,
    lambda2: f64,
    k: usize,
) -> Result<Metrics> {
    let items = ItemSide::new(features, &split.train);
    let scorer = if ci {
        let refs = reference_values(params, features, train.reference_mode)?;
        ModelScorer::debiased(params, &items, Debias { refs, lambda2 })?
    } else {
        ModelScorer::biased(params, &items)?
    };
    evaluate(&scorer, split, k, train.exclude_train_positives)
}

fn report(
    kind: ModelKind,
    ci: bool,
    lambda2: f64,
    m: Metrics,
    config: &ExperimentConfig,
    train: &TrainConfig,
    elapsed: f64,
) -> EvalReport {
    EvalReport {
        model: kind.name().to_string(),
        ci,
        lambda2,
        mrr: m.mrr,
        ndcg_at_k: m.ndcg_at_k,
        hr_at_k: m.hr_at_k,
        k: m.k,
        n_users_evaluated: m.n_users_evaluated,
        exclude_train_positives: train.exclude_train_positives,
        seed: train.seed,
        elapsed_seconds: elapsed,
        config: config.echo(),
    }
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    writeln!(f, "{line}").map_err(io_err(path))
}

/// Loads a checkpoint and evaluates it on the split it was trained on.
/// Training settings come from the checkpoint; inference settings (`ci`,
/// `lambda2`, `k`, train-positive exclusion) from `config`.
pub fn evaluate_checkpoint(config: &ExperimentConfig) -> Result<EvalReport> {
    let start = Instant::now();
    let path = required(&config.checkpoint, "checkpoint")?;
    let (params, saved) = load_checkpoint(path)?;
    let mut effective = config.clone();
    effective.model = params.kind;
    effective.train = TrainConfig {
        lambda2: config.train.lambda2,
        exclude_train_positives: config.train.exclude_train_positives,
        ..saved
    };
    effective.visual_dim_set = true;
    let prepared = prepare(&effective)?;
    let data = &prepared.split.train;
    if params.shape.n_users != data.n_users || params.shape.n_items != data.n_items {
        return Err(Error::Data(format!(
            "checkpoint is for {} users and {} items but the data has {} and {}",
            params.shape.n_users, params.shape.n_items, data.n_users, data.n_items
        )));
    }
    let lambda2 = effective.train.lambda2;
    let m = score_split(
        &params,
        &prepared.split,
        &prepared.features,
        &prepared.train,
        config.ci,
        lambda2,
        config.k,
    )?;
    Ok(report(
        params.kind,
        config.ci,
        lambda2,
        m,
        &effective,
        &prepared.train,
        start.elapsed().as_secs_f64(),
    ))
}

pub fn cmd_evaluate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let line = evaluate_checkpoint(config)?.to_json_line();
    if let Some(path) = &config.out {
        append_line(path, &line)?;
    }
    writeln!(out, "{line}").map_err(stdout_err)
}

/// One row of a lambda2 sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda2: f64,
    pub mrr: f64,
    pub ndcg_at_k: f64,
    pub hr_at_k: f64,
}

/// Evaluates one trained model with its debiased scorer at every grid value.
pub fn sweep(
    params: &ParamSet,
    split: &SplitDataset,
    features: &ItemFeatures,
    train: &TrainConfig,
    grid: &[f64],
    k: usize,
) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&lambda2| {
            let m = score_split(params, split, features, train, true, lambda2, k)?;
            Ok(SweepRow {
                lambda2,
                mrr: m.mrr,
                ndcg_at_k: m.ndcg_at_k,
                hr_at_k: m.hr_at_k,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda2,mrr,ndcg_at_k,hr_at_k\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.lambda2, r.mrr, r.ndcg_at_k, r.hr_at_k));
    }
    s
}

/// Trains once (or loads `checkpoint`) and writes the sweep CSV to `out`,
/// or to the output stream when `out` is unset.
pub fn cmd_sweep_lambda2(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let (params, prepared) = match &config.checkpoint {
        Some(path) => {
            let (params, saved) = load_checkpoint(path)?;
            let mut effective = config.clone();
            effective.train = TrainConfig {
                exclude_train_positives: config.train.exclude_train_positives,
                ..saved
            };
            effective.visual_dim_set = true;
            (params, prepare(&effective)?)
        }
        None => {
            let prepared = prepare(config)?;
            if !config.model.has_debiased_scorer() {
                return Err(Error::Protocol(format!("{} has no debiased scorer", config.model)));
            }
            let (params, _) =
                run_training(config.model, &prepared.split, &prepared.features, &prepared.train)?;
            (params, prepared)
        }
    };
    let rows = sweep(
        &params,
        &prepared.split,
        &prepared.features,
        &prepared.train,
        &config.lambda2_grid,
        config.k,
    )?;
    let csv = sweep_csv(&rows);
    match &config.out {
        Some(path) => fs::write(path, csv).map_err(io_err(path)),
        None => out.write_all(csv.as_bytes()).map_err(stdout_err),
    }
}

/// One row of the debiasing comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub without_ci: Metrics,
    pub with_ci: Metrics,
}

/// CausalRec fusion and multitask variants, named by fusion (Addition or
/// Multiplication) with an `L` suffix for the multitask loss.
pub const CAUSALREC_VARIANTS: [(&str, Fusion, bool); 4] = [
    ("A", Fusion::Sum, false),
    ("M", Fusion::Product, false),
    ("AML", Fusion::Sum, true),
    ("MML", Fusion::Product, true),
];

/// Trains every model in `config.models` on one split and scores each with
/// and without its debiased scorer. CausalRec adds its four variants.
pub fn compare_ci(config: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    if let Some(kind) = config.models.iter().find(|k| !k.has_debiased_scorer()) {
        return Err(Error::Protocol(format!("{kind} has no debiased scorer")));
    }
    let prepared = prepare(config)?;
    let mut runs: Vec<(String, ModelKind, TrainConfig)> = Vec::new();
    for &kind in &config.models {
        runs.push((kind.name().to_string(), kind, prepared.train.clone()));
        if kind == ModelKind::CausalRec {
            for (suffix, fusion, multitask) in CAUSALREC_VARIANTS {
                let train = TrainConfig {
                    fusion,
                    multitask,
                    ..prepared.train.clone()
                };
                runs.push((format!("CausalRec-{suffix}"), kind, train));
            }
        }
    }
    let lambda2 = config.train.lambda2;
    runs.into_iter()
        .map(|(name, kind, train)| {
            let (params, _) = run_training(kind, &prepared.split, &prepared.features, &train)?;
            let score = |ci| {
                score_split(&params, &prepared.split, &prepared.features, &train, ci, lambda2, config.k)
            };
            Ok(CompareRow {
                name,
                without_ci: score(false)?,
                with_ci: score(true)?,
            })
        })
        .collect()
}

pub fn format_compare(rows: &[CompareRow], k: usize) -> String {
    let mut s = format!(
        "{:<14} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "model",
        "MRR",
        "MRR w/CI",
        format!("NDCG@{k}"),
        "NDCG w/CI",
        format!("HR@{k}"),
        "HR w/CI"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<14} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}\n",
            r.name,
            r.without_ci.mrr,
            r.with_ci.mrr,
            r.without_ci.ndcg_at_k,
            r.with_ci.ndcg_at_k,
            r.without_ci.hr_at_k,
            r.with_ci.hr_at_k
        ));
    }
    s
}

/// Prints the comparison table; with `out` set, also writes it as JSON lines.
pub fn cmd_compare_ci(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let rows = compare_ci(config)?;
    if let Some(path) = &config.out {
        let mut text = String::new();
        for r in &rows {
            text.push_str(&serde_json::to_string(r).expect("row serializes"));
            text.push('\n');
        }
        fs::write(path, text).map_err(io_err(path))?;
    }
    out.write_all(format_compare(&rows, config.k).as_bytes())
        .map_err(stdout_err)
}
