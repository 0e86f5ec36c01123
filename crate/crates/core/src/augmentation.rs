//! Three-scenario augmentation experiment.
//!
//! A shared real test set is held out first. Classifiers are then trained on
//! (i) a balanced real set, (ii) the same set with the minority class cut
//! down, and (iii) set (ii) topped back up with generated minority beats,
//! and all three are scored on the shared test set.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{BeatSet, ClassLabel, Source};
use crate::error::{Error, Result};
use crate::models::{generate, Checkpoint};
use crate::nn::{softmax_ce_loss, AdamState, LayerSpec, Matrix, Mode, Network};
use crate::rng::{Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 3,
            lr: 0.0003,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub majority: ClassLabel,
    pub minority: ClassLabel,
    /// Per-class training count in the balanced scenario.
    pub balanced_count: usize,
    /// Minority training count in the imbalanced scenario.
    pub minority_count_imbalanced: usize,
    /// Held-out test beats per class.
    pub test_count: usize,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Desk-scale layout: 600/600, 600/50 and 600/600 with 550 generated,
    /// tested on 200 beats per class.
    pub fn desk(majority: ClassLabel, minority: ClassLabel, seed: u64) -> Self {
        Self {
            majority,
            minority,
            balanced_count: 600,
            minority_count_imbalanced: 50,
            test_count: 200,
            classifier: ClassifierConfig::default(),
            seed,
        }
    }

    /// Generated beats needed to rebalance scenario (ii).
    pub fn generated_needed(&self) -> usize {
        self.balanced_count.saturating_sub(self.minority_count_imbalanced)
    }

    pub fn validate(&self) -> Result<()> {
        if self.majority == self.minority {
            return Err(Error::InsufficientData(
                "majority and minority classes must differ".into(),
            ));
        }
        if self.minority_count_imbalanced == 0
            || self.minority_count_imbalanced >= self.balanced_count
        {
            return Err(Error::InsufficientData(format!(
                "imbalanced minority count {} must lie in 1..{}",
                self.minority_count_imbalanced, self.balanced_count
            )));
        }
        if self.test_count == 0 {
            return Err(Error::InsufficientData("test count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Scenarios {
    pub test: BeatSet,
    pub balanced: BeatSet,
    pub imbalanced: BeatSet,
    pub augmented: BeatSet,
}

impl Scenarios {
    pub fn training_sets(&self) -> [(&'static str, &BeatSet); 3] {
        [
            ("balanced", &self.balanced),
            ("imbalanced", &self.imbalanced),
            ("augmented", &self.augmented),
        ]
    }
}

/// Splits `real` into the shared test set and the three training sets.
/// `generated` supplies the minority top-up for scenario (iii); its labels
/// are replaced with the minority label.
pub fn build_scenarios(real: &BeatSet, generated: &BeatSet, spec: &ExperimentSpec) -> Result<Scenarios> {
    spec.validate()?;
    let mut rng = Rng::with_stream(spec.seed, Stream::Sampling);
    let mut pools = Vec::with_capacity(2);
    let mut test_idx = Vec::new();
    for class in [spec.majority, spec.minority] {
        let mut idx: Vec<usize> = (0..real.len()).filter(|&i| real.labels()[i] == class).collect();
        let need = spec.test_count + spec.balanced_count;
        if idx.len() < need {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} beats, {need} needed",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        test_idx.extend_from_slice(&idx[..spec.test_count]);
        pools.push(idx[spec.test_count..need].to_vec());
    }
    let needed = spec.generated_needed();
    if generated.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{} generated beats, {needed} needed",
            generated.len()
        )));
    }
    if generated.beat_length() != real.beat_length() {
        return Err(Error::LengthMismatch {
            expected: real.beat_length().unwrap_or(0),
            found: generated.beat_length().unwrap_or(0),
        });
    }

    let (major, minor) = (&pools[0], &pools[1]);
    let balanced_idx: Vec<usize> = major.iter().chain(minor).copied().collect();
    let imbalanced_idx: Vec<usize> = major
        .iter()
        .chain(&minor[..spec.minority_count_imbalanced])
        .copied()
        .collect();
    let imbalanced = real.select(&imbalanced_idx);
    let topup = generated
        .select(&(0..needed).collect::<Vec<_>>())
        .relabel(spec.minority)
        .with_source(Source::Generated);
    Ok(Scenarios {
        test: real.select(&test_idx),
        balanced: real.select(&balanced_idx),
        augmented: imbalanced.concat(&topup)?,
        imbalanced,
    })
}

/// `input → hidden → ReLU → classes` classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub classes: Vec<ClassLabel>,
    pub net: Network,
}

impl Classifier {
    pub fn predict(&self, set: &BeatSet) -> Result<Vec<ClassLabel>> {
        if set.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.net.infer(&Matrix::from_rows(set.beats())?)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let best = row
                    .iter()
                    .enumerate()
                    .fold(0, |b, (k, v)| if *v > row[b] { k } else { b });
                self.classes[best]
            })
            .collect())
    }
}

pub fn train_classifier(train: &BeatSet, config: &ClassifierConfig, seed: u64) -> Result<Classifier> {
    let classes: Vec<ClassLabel> = train.labels().iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClassTrainSet);
    }
    if classes.len() > 2 {
        return Err(Error::InvalidInputs(format!(
            "binary classifier given {} classes",
            classes.len()
        )));
    }
    if config.hidden == 0 || config.batch_size == 0 {
        return Err(Error::BadConfig("classifier hidden width and batch size must be positive".into()));
    }
    let len = train.beat_length().unwrap_or(0);
    let mut rng = Rng::with_stream(seed, Stream::Classifier);
    let mut net = Network::new(
        &[
            LayerSpec::fc(len, config.hidden),
            LayerSpec::Relu,
            LayerSpec::fc(config.hidden, classes.len()),
        ],
        &mut rng,
    )?;
    let x = Matrix::from_rows(train.beats())?;
    let y: Vec<usize> = train
        .labels()
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap_or(0))
        .collect();
    let mut opt = AdamState::new(config.lr, 0.9, 0.999);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for idx in order.chunks(config.batch_size) {
            let labels: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            net.zero_grad();
            let (logits, cache) = net.forward(&x.select_rows(idx), Mode::Train)?;
            let (_, grad) = softmax_ce_loss(&logits, &labels)?;
            net.backward(&cache, &grad)?;
            opt.step(&mut net.params_mut())?;
        }
    }
    Ok(Classifier { classes, net })
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<ClassLabel>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<ClassLabel>, counts: Vec<Vec<usize>>) -> Result<Self> {
        if counts.len() != labels.len() || counts.iter().any(|r| r.len() != labels.len()) {
            return Err(Error::ShapeMismatch(format!(
                "confusion matrix for {} labels",
                labels.len()
            )));
        }
        Ok(Self { labels, counts })
    }

    pub fn from_predictions(labels: &[ClassLabel], truth: &[ClassLabel], predicted: &[ClassLabel]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} true labels, {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let pos = |l: &ClassLabel| {
            labels
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::InvalidInputs(format!("label {l} outside {labels:?}")))
        };
        let k = labels.len();
        let mut counts = vec![vec![0; k]; k];
        for (t, p) in truth.iter().zip(predicted) {
            counts[pos(t)?][pos(p)?] += 1;
        }
        Ok(Self {
            labels: labels.to_vec(),
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn report(&self) -> Result<ClassificationReport> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyTestSet);
        }
        let k = self.labels.len();
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = self.counts[c][c];
                let support: usize = self.counts[c].iter().sum();
                let predicted: usize = (0..k).map(|r| self.counts[r][c]).sum();
                let (precision, p_undef) = ratio(tp, predicted);
                let (recall, r_undef) = ratio(tp, support);
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    label: self.labels[c],
                    precision,
                    recall,
                    f1,
                    support,
                    undefined: p_undef || r_undef,
                }
            })
            .collect();
        let trace: usize = (0..k).map(|c| self.counts[c][c]).sum();
        let macro_avg = Averages {
            precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k as f64,
            recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k as f64,
            f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64,
            support: total,
        };
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64
        };
        let weighted_avg = Averages {
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
            support: total,
        };
        Ok(ClassificationReport {
            per_class,
            accuracy: trace as f64 / total as f64,
            macro_avg,
            weighted_avg,
            confusion: self.clone(),
        })
    }
}

/// `num / den`, or `0` with the undefined flag set when `den` is zero.
fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// A precision or recall denominator was zero and reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub confusion: ConfusionMatrix,
}

impl ClassificationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>12} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support");
        for m in &self.per_class {
            let flag = if m.undefined { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:>12} {:>9.2} {:>9.2} {:>9.2} {:>9}{flag}",
                m.label.to_string(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>12} {:>9} {:>9} {:>9.2} {:>9}",
            "accuracy", "", "", self.accuracy, self.macro_avg.support
        );
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                s,
                "{name:>12} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                a.precision, a.recall, a.f1, a.support
            );
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:>12}", "true\\pred");
        for l in &self.confusion.labels {
            let _ = write!(s, " {:>9}", l.to_string());
        }
        let _ = writeln!(s);
        for (l, row) in self.confusion.labels.iter().zip(&self.confusion.counts) {
            let _ = write!(s, "{:>12}", l.to_string());
            for c in row {
                let _ = write!(s, " {c:>9}");
            }
            let _ = writeln!(s);
        }
        if self.per_class.iter().any(|m| m.undefined) {
            let _ = writeln!(s, "* zero denominator, reported as 0");
        }
        s
    }
}

pub fn evaluate_classifier(model: &Classifier, test: &BeatSet) -> Result<ClassificationReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let predicted = model.predict(test)?;
    ConfusionMatrix::from_predictions(&model.classes, test.labels(), &predicted)?.report()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub train_counts: Vec<(ClassLabel, usize)>,
    pub generated_in_train: usize,
    pub report: ClassificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    pub test_counts: Vec<(ClassLabel, usize)>,
    pub scenarios: Vec<ScenarioResult>,
    /// macro F1 (i) − (ii)
    pub macro_f1_drop_imbalanced: f64,
    /// macro F1 (iii) − (ii)
    pub macro_f1_gain_augmented: f64,
}

impl ExperimentSummary {
    pub fn macro_f1(&self, scenario: &str) -> Option<f64> {
        self.scenarios
            .iter()
            .find(|s| s.name == scenario)
            .map(|s| s.report.macro_avg.f1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let counts = |c: &[(ClassLabel, usize)]| {
            c.iter()
                .map(|(l, n)| format!("{l}: {n}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(s, "test set ({})", counts(&self.test_counts));
        for (i, r) in self.scenarios.iter().enumerate() {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "({}) {} training set ({}; {} generated)",
                ["i", "ii", "iii"].get(i).unwrap_or(&"?"),
                r.name,
                counts(&r.train_counts),
                r.generated_in_train
            );
            s.push_str(&r.report.to_text());
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>9} {:>9}", "scenario", "macro F1", "accuracy");
        for r in &self.scenarios {
            let _ = writeln!(
                s,
                "{:<12} {:>9.3} {:>9.3}",
                r.name, r.report.macro_avg.f1, r.report.accuracy
            );
        }
        let _ = writeln!(s, "macro F1 drop (i) - (ii): {:+.3}", self.macro_f1_drop_imbalanced);
        let _ = writeln!(s, "macro F1 gain (iii) - (ii): {:+.3}", self.macro_f1_gain_augmented);
        s
    }
}

fn counts_of(set: &BeatSet) -> Vec<(ClassLabel, usize)> {
    set.class_counts().into_iter().collect()
}

/// Runs all three scenarios sequentially against the shared test set.
pub fn run_experiment(real: &BeatSet, generated: &BeatSet, spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    let sc = build_scenarios(real, generated, spec)?;
    let mut scenarios = Vec::with_capacity(3);
    for (name, train) in sc.training_sets() {
        let model = train_classifier(train, &spec.classifier, spec.seed)?;
        let report = evaluate_classifier(&model, &sc.test)?;
        let generated_in_train = train
            .ids()
            .iter()
            .filter(|id| matches!(id, crate::dataset::BeatId::Generated(_)))
            .count();
        scenarios.push(ScenarioResult {
            name: name.to_string(),
            train_counts: counts_of(train),
            generated_in_train,
            report,
        });
    }
    let f1 = |i: usize| scenarios[i].report.macro_avg.f1;
    Ok(ExperimentSummary {
        spec: spec.clone(),
        test_counts: counts_of(&sc.test),
        macro_f1_drop_imbalanced: f1(0) - f1(1),
        macro_f1_gain_augmented: f1(2) - f1(1),
        scenarios,
    })
}

/// [`run_experiment`] drawing the top-up beats from a generator checkpoint.
pub fn run_experiment_with_checkpoint(
    real: &BeatSet,
    ckpt: &Checkpoint,
    spec: &ExperimentSpec,
) -> Result<ExperimentSummary> {
    spec.validate()?;
    let generated = generate(ckpt, spec.generated_needed(), spec.seed)?;
    run_experiment(real, &generated, spec)
}
