mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gesturenet::bench::{run_bench, BenchConfig};
use gesturenet::binarize::{binarize_model, save_binarized_model};
use gesturenet::dataset::{load_manifest, make_folds, synth_generate, SynthConfig};
use gesturenet::eval::{
    evaluate, prepare_dataset, prepare_views, run_cross_validation, summary_stats, vote_classify,
    ConfusionMatrix, CrossValidationReport, PreparedSample, SummaryStats,
};
use gesturenet::nn::io::load_float_model;
use gesturenet::segmentation::pnm::{load_depth, save_mask};
use gesturenet::segmentation::{segment_full_resolution, segment_hand};
use gesturenet::train::{train, Mode, TrainLog, TrainedModel};
use log::info;
use serde::Serialize;

use crate::config::RunConfig;

const VARIANCE_NOTE: &str = "variance is the population variance of the per-class accuracies, in percent squared";

#[derive(Parser)]
#[command(name = "gesturenet", version, about = "Hand gesture recognition from depth frames")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Dataset manifest (CSV).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f32>,
    /// Per-epoch learning-rate multiplier.
    #[arg(long, global = true)]
    lr_decay: Option<f32>,
    #[arg(long, global = true)]
    momentum: Option<f32>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    depth_alpha: Option<u16>,
    /// float | binarized
    #[arg(long, global = true)]
    mode: Option<String>,
    /// straight-through | scale-aware
    #[arg(long, global = true)]
    gradient_rule: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on every sample of a dataset and write a model file.
    Train {
        /// Training log (JSON); defaults to the model path plus `.log.json`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Cross-validate by person, or evaluate a trained model.
    Eval {
        /// Evaluate this model on the whole dataset instead of cross-validating.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Cross-validate in both float and binarized mode and report the gap.
        #[arg(long)]
        compare: bool,
    },
    /// Convert a float model to binary weights.
    Binarize { model: PathBuf },
    /// Classify one depth frame by rotation voting.
    Infer {
        #[arg(long)]
        model: PathBuf,
        depth: PathBuf,
    },
    /// Segment one depth frame into a hand mask.
    Segment {
        depth: PathBuf,
        /// Write the mask at the frame's resolution instead of 50x50.
        #[arg(long)]
        full: bool,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 14)]
        persons: u32,
        #[arg(long, default_value_t = 10)]
        repetitions: u32,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        width: usize,
        #[arg(long, default_value_t = 100)]
        height: usize,
    },
    /// Time float against binarized convolution.
    Bench {
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        config.merge_file(path)?;
    }
    let mut set = |key: &str, value: Option<String>| -> Result<()> {
        match value {
            Some(v) => config.set(key, &v),
            None => Ok(()),
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    set("dataset", path(&common.dataset))?;
    set("seed", common.seed.map(|v| v.to_string()))?;
    set("epochs", common.epochs.map(|v| v.to_string()))?;
    set("lr", common.lr.map(|v| v.to_string()))?;
    set("lr_decay", common.lr_decay.map(|v| v.to_string()))?;
    set("momentum", common.momentum.map(|v| v.to_string()))?;
    set("batch_size", common.batch_size.map(|v| v.to_string()))?;
    set("depth_alpha", common.depth_alpha.map(|v| v.to_string()))?;
    set("mode", common.mode.clone())?;
    set("gradient_rule", common.gradient_rule.clone())?;
    set("threads", common.threads.map(|v| v.to_string()))?;
    set("out", path(&common.out))?;
    Ok(config)
}

fn require_out(config: &RunConfig) -> Result<&Path> {
    config.out.as_deref().ok_or_else(|| anyhow!("--out is required"))
}

fn load_dataset(config: &RunConfig) -> Result<Vec<PreparedSample>> {
    let manifest = config
        .dataset
        .as_ref()
        .ok_or_else(|| anyhow!("--dataset is required"))?;
    let samples = load_manifest(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    if samples.is_empty() {
        bail!("dataset {} is empty", manifest.display());
    }
    info!("segmenting {} frames", samples.len());
    Ok(prepare_dataset(&samples, &config.segmentation())?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_stats(label: &str, stats: &Option<SummaryStats>) {
    match stats {
        Some(s) => println!(
            "{label}: mean accuracy {:.2}%, min {:.2}%, variance {:.2}",
            s.mean_accuracy, s.min_accuracy, s.variance
        ),
        None => println!("{label}: no statistics (a class has no test samples)"),
    }
}

fn cmd_train(config: &RunConfig, log_path: Option<PathBuf>) -> Result<()> {
    let out = require_out(config)?;
    let train_config = config.train_config()?;
    let data = load_dataset(config)?;
    let examples: Vec<_> = data.iter().flat_map(|p| &p.views).collect();
    info!("training on {} views", examples.len());
    let (model, log) = train(&examples, &train_config).context("training")?;
    model.save(out).with_context(|| format!("writing {}", out.display()))?;
    let log_path = log_path.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".log.json");
        p.into()
    });
    write_json(&log_path, &log)?;
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} epochs: loss {:.4}, training accuracy {:.2}%",
            last.epoch,
            last.mean_loss,
            100.0 * last.accuracy
        );
    }
    println!("model written to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct MatrixReport {
    counts: Vec<Vec<u64>>,
    percent: Vec<Vec<u32>>,
}

impl From<&ConfusionMatrix> for MatrixReport {
    fn from(cm: &ConfusionMatrix) -> Self {
        MatrixReport {
            counts: cm.counts().to_vec(),
            percent: cm.row_percentages(),
        }
    }
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    test_persons: Vec<u32>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<SummaryStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_log: Option<TrainLog>,
}

#[derive(Serialize)]
struct ModeReport {
    mode: Mode,
    folds: Vec<FoldSummary>,
    merged: MatrixReport,
    stats: Option<SummaryStats>,
}

#[derive(Serialize)]
struct EvalReport {
    seed: u64,
    epochs: usize,
    lr: f32,
    lr_decay: f32,
    momentum: f32,
    batch_size: usize,
    depth_alpha: u16,
    fold_persons: Vec<Vec<u32>>,
    runs: Vec<ModeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    float_minus_binarized: Option<f64>,
    variance_note: &'static str,
}

fn mode_report(mode: Mode, cv: CrossValidationReport) -> ModeReport {
    use gesturenet::eval::FoldResult;
    let folds = cv
        .folds
        .into_iter()
        .map(|f| {
            let mut s = FoldSummary {
                fold: f.fold,
                test_persons: f.test_persons,
                status: "ok",
                reason: None,
                matrix: None,
                stats: None,
                train_log: None,
            };
            match f.result {
                FoldResult::Ok {
                    matrix,
                    stats,
                    train_log,
                } => {
                    s.matrix = Some((&matrix).into());
                    s.stats = stats;
                    s.train_log = train_log;
                }
                FoldResult::Failed { reason } => {
                    s.status = "failed";
                    s.reason = Some(reason);
                }
            }
            s
        })
        .collect();
    ModeReport {
        mode,
        folds,
        merged: (&cv.merged).into(),
        stats: cv.stats,
    }
}

fn cmd_eval(config: &RunConfig, model: Option<PathBuf>, compare: bool) -> Result<()> {
    let data = load_dataset(config)?;
    if let Some(model_path) = model {
        let model = TrainedModel::load(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
        let all: Vec<&PreparedSample> = data.iter().collect();
        let cm = evaluate(&model, &all)?;
        let stats = summary_stats(&cm).ok();
        println!("{}", cm.render_table());
        print_stats("held-out", &stats);
        if let Some(out) = &config.out {
            #[derive(Serialize)]
            struct HeldOut {
                model: String,
                matrix: MatrixReport,
                stats: Option<SummaryStats>,
                variance_note: &'static str,
            }
            write_json(
                out,
                &HeldOut {
                    model: model_path.display().to_string(),
                    matrix: (&cm).into(),
                    stats,
                    variance_note: VARIANCE_NOTE,
                },
            )?;
        }
        return Ok(());
    }

    let base = config.train_config()?;
    let persons: Vec<u32> = data.iter().map(|p| p.sample.person).collect();
    let plan = make_folds(&persons, base.seed)?;
    let modes = if compare {
        vec![Mode::Float, Mode::Binarized]
    } else {
        vec![base.mode]
    };
    let mut runs = Vec::new();
    for mode in modes {
        info!("cross-validating in {mode} mode");
        let cv = run_cross_validation(&data, &plan, &gesturenet::train::TrainConfig { mode, ..base })?;
        println!("[{mode}] merged confusion matrix (row percent)");
        println!("{}", cv.merged.render_table());
        for f in cv.failed_folds() {
            println!("[{mode}] fold {f} failed");
        }
        print_stats(&format!("[{mode}]"), &cv.stats);
        runs.push(mode_report(mode, cv));
    }
    let gap = match (runs.first(), runs.get(1)) {
        (Some(a), Some(b)) => a.stats.zip(b.stats).map(|(a, b)| a.mean_accuracy - b.mean_accuracy),
        _ => None,
    };
    if let Some(g) = gap {
        println!("float minus binarized mean accuracy: {g:.2} points");
    }
    println!("note: {VARIANCE_NOTE}");
    if let Some(out) = &config.out {
        write_json(
            out,
            &EvalReport {
                seed: base.seed,
                epochs: base.epochs,
                lr: base.lr,
                lr_decay: base.lr_decay,
                momentum: base.momentum,
                batch_size: base.batch_size,
                depth_alpha: config.depth_alpha,
                fold_persons: plan.groups().to_vec(),
                runs,
                float_minus_binarized: gap,
                variance_note: VARIANCE_NOTE,
            },
        )?;
    }
    Ok(())
}

fn cmd_binarize(config: &RunConfig, model: &Path) -> Result<()> {
    let out = require_out(config)?;
    let net = load_float_model(model).with_context(|| format!("loading {}", model.display()))?;
    let binary = binarize_model(&net);
    save_binarized_model(&binary, out).with_context(|| format!("writing {}", out.display()))?;
    let s = binary.storage();
    println!(
        "float weights {} B -> sign bits {} B + scales {} B: {:.2}x smaller ({:.0}x at the bit level)",
        s.float_weight_bytes,
        s.sign_bytes,
        s.scale_bytes,
        s.ratio(),
        s.bit_ratio()
    );
    Ok(())
}

fn cmd_infer(config: &RunConfig, model: &Path, depth: &Path) -> Result<()> {
    let model = TrainedModel::load(model).with_context(|| format!("loading {}", model.display()))?;
    let frame = load_depth(depth).with_context(|| format!("reading {}", depth.display()))?;
    let views = prepare_views(&frame, &config.segmentation())?;
    let vote = vote_classify(&model, &views)?;
    println!("class {}", vote.class);
    let probs: Vec<String> = vote.mean_probabilities.iter().map(|p| format!("{p:.6}")).collect();
    println!("probabilities {}", probs.join(" "));
    if let Some(out) = &config.out {
        write_json(out, &vote)?;
    }
    Ok(())
}

fn cmd_segment(config: &RunConfig, depth: &Path, full: bool) -> Result<()> {
    let out = require_out(config)?;
    let frame = load_depth(depth).with_context(|| format!("reading {}", depth.display()))?;
    let params = config.segmentation();
    let mask = if full {
        segment_full_resolution(&frame, &params)?.mask
    } else {
        segment_hand(&frame, &params)?
    };
    save_mask(&mask, out).with_context(|| format!("writing {}", out.display()))?;
    println!("{} foreground pixels of {}x{}", mask.count(), mask.width(), mask.height());
    Ok(())
}

fn cmd_synth(config: &RunConfig, synth: SynthConfig) -> Result<()> {
    let out = require_out(config)?;
    let samples = synth_generate(out, &synth, config.seed()?)?;
    println!("{} frames written under {}", samples.len(), out.display());
    Ok(())
}

fn cmd_bench(config: &RunConfig, reps: usize) -> Result<()> {
    let report = run_bench(&BenchConfig {
        repetitions: reps,
        seed: config.seed.unwrap_or(0),
    })?;
    for l in &report.layers {
        println!(
            "{}: float {:.1} us ({:.2} GMAC/s), binarized {:.1} us ({:.2} Gop/s), speedup {:.2}x, max diff {:.1e}",
            l.layer,
            l.float_median_us,
            l.float_macs_per_sec / 1e9,
            l.binarized_median_us,
            l.binarized_ops_per_sec / 1e9,
            l.speedup,
            l.max_abs_diff
        );
    }
    println!("model weight memory ratio {:.2}x", report.memory_ratio);
    if let Some(out) = &config.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve(&cli.common)?;
    if cli.common.print_config {
        print!("{}", config.render());
        return Ok(());
    }
    if let Some(n) = config.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Train { log } => cmd_train(&config, log),
        Command::Eval { model, compare } => cmd_eval(&config, model, compare),
        Command::Binarize { model } => cmd_binarize(&config, &model),
        Command::Infer { model, depth } => cmd_infer(&config, &model, &depth),
        Command::Segment { depth, full } => cmd_segment(&config, &depth, full),
        Command::Synth {
            persons,
            repetitions,
            classes,
            width,
            height,
        } => cmd_synth(
            &config,
            SynthConfig {
                classes,
                persons,
                repetitions,
                width,
                height,
                ..SynthConfig::default()
            },
        ),
        Command::Bench { reps } => cmd_bench(&config, reps),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
