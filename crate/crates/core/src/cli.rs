//! Command-line interface: `ingest`, `train`, `generate`, `evaluate`,
//! `experiment` and `plot`.
//!
//! A training run directory holds
//!
//! ```text
//! config.json            config, seed and config hash
//! run.json               run summary (seed, config hash, data, template)
//! losses.csv             epoch,generator_loss,discriminator_loss
//! curve.csv              per-epoch Method-2 scores and losses
//! snapshots/epoch_NNN.csv
//! checkpoints/epoch_NNN.ckpt
//! final.ckpt
//! ```

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::augmentation::{run_experiment_with_checkpoint, ClassifierConfig, ExperimentSpec};
use crate::dataset::{
    self, filter_class, load_beats_any_length, load_cache, normalize_set, resample_beat, sample_subset, save_beats_csv,
    save_cache, BeatSet, ClassLabel, DatasetManifest, NormalizeMode, Source,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    compute_threshold, epoch_curves, manual_threshold, method1_sampled, method1_score_with, method2_score,
    method3_best, method4_productivity, scaled_threshold, template_scores, EpochCurve, EvaluationReport, Threshold,
};
use crate::metrics::{DistanceKind, DistanceOptions, ParallelOptions};
use crate::models::{generate, load_checkpoint, save_checkpoint, train_with_progress, Checkpoint, GanConfig, ModelKind};
use crate::plot;
use crate::templates::{load_template, random_template, sab_template, Template};

pub const RUN_ROOT_ENV: &str = "BEATGEN_RUN_ROOT";
const CACHE_FILE: &str = "beats.bin";
const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Parser)]
#[command(name = "beatgen", version, about = "Train beat generators and score synthetic ECG beats")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, resample and normalize a beat CSV into a binary cache.
    Ingest(IngestArgs),
    /// Train a generator and write a run directory.
    Train(TrainArgs),
    /// Sample beats from a checkpoint into a beat CSV.
    Generate(GenerateArgs),
    /// Score generated beats with Methods 1-4.
    Evaluate(EvaluateArgs),
    /// Balanced / imbalanced / rebalanced classifier comparison.
    Experiment(ExperimentArgs),
    /// Write SVG figures and their CSV data.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Beat CSV, one `label,v1,...,vL` row per beat.
    #[arg(long)]
    pub input: PathBuf,
    /// Keep only this class (all classes when omitted).
    #[arg(long = "class")]
    pub class: Option<ClassLabel>,
    #[arg(long, default_value_t = 256)]
    pub resample: usize,
    /// off, per-beat or global.
    #[arg(long, default_value_t = NormalizeMode::PerBeat)]
    pub normalize: NormalizeMode,
    /// Recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the cache and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// classic, vaegan or wgan-fc.
    #[arg(long, default_value_t = ModelKind::Classic)]
    pub model: ModelKind,
    /// Ingested directory, binary cache or beat CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run directory; defaults to `<run-root>/<model>-seed<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = RUN_ROOT_ENV, default_value = "runs")]
    pub run_root: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 9)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.0002)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Latent width; 100, or 10 for vaegan, when omitted.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub snapshots_per_epoch: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_adv: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lambda_l1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_kl: f64,
    /// Critic weight clip (wgan-fc).
    #[arg(long, default_value_t = 0.01)]
    pub clip: f64,
    /// Critic steps per generator step (wgan-fc).
    #[arg(long, default_value_t = 5)]
    pub n_critic: usize,
    /// Train on a random subset of this many beats.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Write a checkpoint every this many epochs.
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: usize,
    /// Replace a non-empty run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output beat CSV (label G).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// 1: cross mean, 2: mean to template, 3: best beat, 4: productivity.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub method: u8,
    /// dtw, frechet or euclid.
    #[arg(long, default_value_t = DistanceKind::Dtw)]
    pub metric: DistanceKind,
    /// Generated beats: beat CSV, directory of CSVs, or checkpoint.
    #[arg(long)]
    pub gen: PathBuf,
    /// Beats to sample when `--gen` is a checkpoint.
    #[arg(long, default_value_t = 300)]
    pub n_gen: usize,
    /// Real beats (ingested directory, cache or CSV).
    #[arg(long)]
    pub real: Option<PathBuf>,
    /// Method 1 sample size per side.
    #[arg(long, default_value_t = 300)]
    pub sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// random, sab or file:PATH.
    #[arg(long, default_value = "random")]
    pub template: String,
    /// Method 4 threshold; derived from the scored set when omitted.
    #[arg(long, conflicts_with_all = ["threshold_scale", "calibration"])]
    pub threshold: Option<f64>,
    /// Method 4 threshold `a * s3`.
    #[arg(long, conflicts_with = "calibration")]
    pub threshold_scale: Option<f64>,
    /// Take the Method 4 threshold from an earlier Method 4 report.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Worker threads for distance grids.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Directory for the JSON and text reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Two-class real beats (ingested directory, cache or CSV).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = ClassLabel::L)]
    pub majority: ClassLabel,
    #[arg(long, default_value_t = ClassLabel::N)]
    pub minority: ClassLabel,
    /// Per-class training count of the balanced scenario.
    #[arg(long, default_value_t = 6455)]
    pub balanced_count: usize,
    /// Minority training count of the imbalanced scenario.
    #[arg(long, default_value_t = 500)]
    pub minority_count: usize,
    /// Held-out test beats per class.
    #[arg(long, default_value_t = 1608)]
    pub test_count: usize,
    /// Generator trained on the minority class.
    #[arg(long)]
    pub gen_ckpt: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub clf_epochs: usize,
    #[arg(long, default_value_t = 0.0003)]
    pub clf_lr: f64,
    #[arg(long, default_value_t = 32)]
    pub clf_batch_size: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub figure: PlotCommand,
}

#[derive(Debug, Subcommand)]
pub enum PlotCommand {
    /// One figure per beat, optionally annotated with template distances.
    Beats {
        #[arg(long)]
        input: PathBuf,
        /// Plot the first this many beats.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Beat CSV whose first row is the template.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity and loss curves from a run's curve.csv.
    Curve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best generated beat under each metric.
    Best {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long, default_value_t = 300)]
        n_gen: usize,
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long, default_value = "random")]
        template: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Generate(a) => cmd_generate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

/// Loads beats from an ingested directory, a binary cache or a beat CSV.
pub fn load_data(path: &Path) -> Result<BeatSet> {
    if path.is_dir() {
        return load_cache(path.join(CACHE_FILE));
    }
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => load_cache(path),
        _ => load_beats_any_length(path),
    }
}

/// Generated beats from a checkpoint, a beat CSV, or every `*.csv` in a
/// directory (name order).
fn load_generated(path: &Path, n: usize, seed: u64) -> Result<BeatSet> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        let mut all = BeatSet::empty(Source::Generated);
        for f in files {
            all = all.concat(&load_beats_any_length(&f)?)?;
        }
        if all.is_empty() {
            return Err(Error::EmptySet);
        }
        return Ok(all);
    }
    if path.extension().is_some_and(|e| e == "ckpt") {
        return generate(&load_checkpoint(path)?, n, seed);
    }
    load_data(path)
}

fn resolve_template(spec: &str, real: Option<&Path>, seed: u64) -> Result<Template> {
    if let Some(path) = spec.strip_prefix("file:") {
        return load_template(path);
    }
    let real = real.ok_or_else(|| Error::Usage(format!("--template {spec} needs --real")))?;
    let data = load_data(real)?;
    match spec {
        "random" => random_template(&data, seed),
        "sab" => sab_template(&data),
        other => Err(Error::Usage(format!(
            "unknown template {other:?}; expected random, sab or file:PATH"
        ))),
    }
}

fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        if !force {
            return Err(Error::RunDirNotEmpty(dir.to_path_buf()));
        }
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<DatasetManifest> {
    let raw = load_beats_any_length(&a.input)?;
    let filtered = match a.class {
        Some(c) => filter_class(&raw, c),
        None => raw,
    };
    if filtered.is_empty() {
        return Err(Error::EmptySet);
    }
    let resampled = filtered.try_map(|b| resample_beat(b, a.resample))?;
    let (set, constant_beats) = normalize_set(&resampled, a.normalize)?;
    fs::create_dir_all(&a.out)?;
    let cache = a.out.join(CACHE_FILE);
    save_cache(&cache, &set)?;
    let manifest = DatasetManifest {
        path: cache,
        beat_length: a.resample,
        classes_present: set.class_counts(),
        seed: a.seed,
        normalization: a.normalize,
        constant_beats,
    };
    fs::write(a.out.join(MANIFEST_FILE), manifest.to_text())?;
    print!("{}", manifest.to_text());
    Ok(manifest)
}

impl TrainArgs {
    pub fn config(&self) -> GanConfig {
        let mut c = GanConfig::new(self.model);
        if let Some(z) = self.latent_dim {
            c.latent_dim = z;
        }
        c.epochs = self.epochs;
        c.batch_size = self.batch_size;
        c.lr = self.lr;
        c.beta1 = self.beta1;
        c.beta2 = self.beta2;
        c.seed = self.seed;
        c.snapshot_per_epoch = self.snapshots_per_epoch;
        c.lambda_adv = self.lambda_adv;
        c.lambda_l1 = self.lambda_l1;
        c.lambda_kl = self.lambda_kl;
        c.clip = self.clip;
        c.n_critic = self.n_critic;
        c
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.run_root.join(format!("{}-seed{}", self.model, self.seed)))
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<PathBuf> {
    let mut data = load_data(&a.data)?;
    if let Some(n) = a.subset {
        data = sample_subset(&data, n, a.seed)?;
    }
    let mut config = a.config();
    config.beat_length = data.beat_length().ok_or(Error::EmptySet)?;
    config.validate()?;
    if data
        .beats()
        .iter()
        .any(|b| b.min() < -1.0 || b.max() > 1.0)
    {
        log::warn!("training data leaves [-1, 1]; the tanh generator cannot match it");
    }
    let dir = a.run_dir();
    prepare_out_dir(&dir, a.force)?;
    let hash = config.hash();
    let config_doc = json!({ "config_hash": hash, "seed": config.seed, "config": config });
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config_doc)? + "\n")?;

    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let every = a.checkpoint_every.max(1);
    let run = train_with_progress(&config, &data, |epoch, model, loss| {
        info!(
            "epoch {epoch}: generator {:.4}, discriminator {:.4}",
            loss.generator, loss.discriminator
        );
        if epoch % every == 0 {
            let ckpt = Checkpoint::new(config.clone(), epoch, model.clone());
            save_checkpoint(&ckpt, ckpt_dir.join(format!("epoch_{epoch:03}.ckpt")))?;
        }
        Ok(())
    })?;

    let mut losses = String::from("epoch,generator_loss,discriminator_loss\n");
    for l in &run.losses {
        losses.push_str(&format!("{},{},{}\n", l.epoch, l.generator, l.discriminator));
    }
    fs::write(dir.join("losses.csv"), losses)?;

    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    for (epoch, beats) in &run.snapshots {
        save_beats_csv(snap_dir.join(format!("epoch_{epoch:03}.csv")), beats)?;
    }
    let template = random_template(&data, config.seed)?;
    let curve = epoch_curves(&run.snapshots, &template, &run.losses)?;
    curve.save(dir.join("curve.csv"))?;
    save_checkpoint(&run.checkpoint, dir.join("final.ckpt"))?;

    let summary = json!({
        "config_hash": hash,
        "seed": config.seed,
        "model": config.model_kind,
        "data": a.data,
        "n_beats": data.len(),
        "epochs": config.epochs,
        "curve_template": template.origin.to_string(),
        "final_checkpoint": "final.ckpt",
        "final_losses": run.losses.last(),
        "reconstruction_l1": run.reconstruction,
    });
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("run written to {}", dir.display());
    Ok(dir)
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let set = generate(&ckpt, a.n, a.seed)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_beats_csv(&a.out, &set)?;
    println!("{} beats written to {}", set.len(), a.out.display());
    Ok(())
}

fn method4_threshold(a: &EvaluateArgs, gen: &BeatSet, template: &Template) -> Result<Threshold> {
    if let Some(v) = a.threshold {
        return manual_threshold(v, a.metric);
    }
    if let Some(path) = &a.calibration {
        let text = fs::read_to_string(path).map_err(|_| Error::FileNotFound(path.clone()))?;
        let report = EvaluationReport::from_json(&text)?;
        let t = report
            .threshold
            .ok_or_else(|| Error::InvalidInputs("calibration report has no threshold".into()))?;
        if t.kind != a.metric {
            return Err(Error::InvalidInputs(format!(
                "calibration threshold is for {}, not {}",
                t.kind, a.metric
            )));
        }
        return Ok(t);
    }
    let scores = template_scores(gen, template, a.metric, None)?;
    match a.threshold_scale {
        Some(s) => scaled_threshold(scores.s3.score, s, a.metric),
        None => compute_threshold(scores.s2.score, scores.s3.score, a.metric),
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<EvaluationReport> {
    let gen = load_generated(&a.gen, a.n_gen, a.seed)?;
    let report = match a.method {
        1 => {
            let real_path = a
                .real
                .as_ref()
                .ok_or_else(|| Error::Usage("method 1 needs --real".into()))?;
            let real = load_data(real_path)?;
            if a.threads.is_some() {
                let real = dataset::sample_subset(&real, a.sample, a.seed)?;
                let gen = dataset::sample_subset(&gen, a.sample, a.seed.wrapping_add(1))?;
                let par = ParallelOptions {
                    threads: a.threads,
                    ..Default::default()
                };
                let mut r = method1_score_with(&real, &gen, a.metric, &DistanceOptions::default(), &par)?;
                r.seed = Some(a.seed);
                r
            } else {
                method1_sampled(&real, &gen, a.sample, a.sample, a.seed, a.metric)?
            }
        }
        m => {
            let template = resolve_template(&a.template, a.real.as_deref(), a.seed)?;
            let mut r = match m {
                2 => method2_score(&gen, &template, a.metric)?,
                3 => method3_best(&gen, &template, a.metric)?.1,
                _ => {
                    let eta = method4_threshold(a, &gen, &template)?;
                    method4_productivity(&gen, &template, a.metric, &eta)?
                }
            };
            r.seed = Some(a.seed);
            r
        }
    };
    let text = report.to_text();
    print!("{text}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let stem = format!("method{}_{}", a.method, a.metric.name());
        fs::write(dir.join(format!("{stem}.json")), report.to_json()?)?;
        fs::write(dir.join(format!("{stem}.txt")), &text)?;
    }
    Ok(report)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let real = load_data(&a.data)?;
    let ckpt = load_checkpoint(&a.gen_ckpt)?;
    let spec = ExperimentSpec {
        majority: a.majority,
        minority: a.minority,
        balanced_count: a.balanced_count,
        minority_count_imbalanced: a.minority_count,
        test_count: a.test_count,
        classifier: ClassifierConfig {
            hidden: a.hidden,
            epochs: a.clf_epochs,
            lr: a.clf_lr,
            batch_size: a.clf_batch_size,
        },
        seed: a.seed,
    };
    let summary = run_experiment_with_checkpoint(&real, &ckpt, &spec)?;
    let text = summary.to_text();
    print!("{text}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), summary.to_json()? + "\n")?;
        fs::write(dir.join("summary.txt"), &text)?;
    }
    Ok(())
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    match &a.figure {
        PlotCommand::Beats {
            input,
            count,
            template,
            out,
        } => {
            let set = load_data(input)?;
            let template = template.as_ref().map(load_template).transpose()?;
            for (i, beat) in set.beats().iter().take(*count).enumerate() {
                let ann = match &template {
                    Some(t) => plot::distance_annotations(beat, t)?,
                    None => Vec::new(),
                };
                let title = format!("beat {i} ({})", set.labels()[i]);
                plot::write_beat_figure(out, &format!("beat_{i:04}"), beat, &title, &ann)?;
            }
        }
        PlotCommand::Curve { input, out } => {
            let text = fs::read_to_string(input).map_err(|_| Error::FileNotFound(input.clone()))?;
            plot::write_curve_figure(out, "curve", &EpochCurve::from_csv(&text)?)?;
        }
        PlotCommand::Best {
            gen,
            n_gen,
            real,
            template,
            seed,
            out,
        } => {
            let set = load_generated(gen, *n_gen, *seed)?;
            let t = resolve_template(template, real.as_deref(), *seed)?;
            plot::best_beat_figures(&set, &t, out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn train_defaults_follow_hyperparameters() {
        let cli = Cli::try_parse_from(["beatgen", "train", "--data", "d"]).unwrap();
        let Command::Train(a) = cli.command else {
            panic!("not train")
        };
        let c = a.config();
        assert_eq!((c.epochs, c.batch_size, c.latent_dim), (30, 9, 100));
        assert_eq!((c.lr, c.beta1, c.beta2), (0.0002, 0.5, 0.999));
        let cli = Cli::try_parse_from(["beatgen", "train", "--data", "d", "--model", "vaegan"]).unwrap();
        let Command::Train(a) = cli.command else {
            panic!("not train")
        };
        assert_eq!(a.config().latent_dim, 10);
    }

    #[test]
    fn bad_method_is_usage_error() {
        let err = run_from(["beatgen", "evaluate", "--method", "5", "--gen", "x"]).unwrap_err();
        assert_eq!(err.code(), "USAGE");
    }
}
