//! Scoring generated beats against real data.
//!
//! * Method 1: mean cross distance between a real and a generated sample.
//! * Method 2: mean distance of the generated beats to a template.
//! * Method 3: the single generated beat closest to the template.
//! * Method 4: share of generated beats within a threshold of the template
//!   (the productivity rate, in percent).
//!
//! Methods 2–4 share one distance vector per (set, template, metric), so the
//! minimum, the mean and the acceptance test see identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Beat, BeatSet};
use crate::error::{Error, Result};
use crate::metrics::{self, DistanceKind, DistanceOptions, KahanSum, ParallelOptions};
use crate::templates::Template;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdDerivation {
    MeanOfMinAndAvg,
    ScaledMin,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(rename = "threshold")]
    pub value: f64,
    #[serde(rename = "threshold_kind")]
    pub kind: DistanceKind,
    #[serde(rename = "threshold_derivation")]
    pub derivation: ThresholdDerivation,
    /// The factor `a` of a scaled-min threshold.
    #[serde(rename = "threshold_scale", default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// Midpoint of the best-beat distance `s3` and the average distance `s2`.
pub fn compute_threshold(s2: f64, s3: f64, kind: DistanceKind) -> Result<Threshold> {
    if !(s2.is_finite() && s3.is_finite()) || s2 < 0.0 || s3 < 0.0 || s3 > s2 {
        return Err(Error::InvalidInputs(format!(
            "threshold needs 0 <= s3 <= s2, got s3={s3}, s2={s2}"
        )));
    }
    Ok(Threshold {
        value: (s3 + s2) / 2.0,
        kind,
        derivation: ThresholdDerivation::MeanOfMinAndAvg,
        scale: None,
    })
}

/// `a * s3`, for a caller-chosen factor `a`.
pub fn scaled_threshold(s3: f64, a: f64, kind: DistanceKind) -> Result<Threshold> {
    if !(s3.is_finite() && a.is_finite()) || s3 < 0.0 || a < 0.0 {
        return Err(Error::InvalidInputs(format!(
            "scaled threshold needs s3 >= 0 and a >= 0, got s3={s3}, a={a}"
        )));
    }
    Ok(Threshold {
        value: a * s3,
        kind,
        derivation: ThresholdDerivation::ScaledMin,
        scale: Some(a),
    })
}

pub fn manual_threshold(value: f64, kind: DistanceKind) -> Result<Threshold> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidInputs(format!("threshold {value} must be >= 0")));
    }
    Ok(Threshold {
        value,
        kind,
        derivation: ThresholdDerivation::Manual,
        scale: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: DistanceKind,
    pub method: u8,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_real: Option<usize>,
    pub n_gen: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_origin: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptable_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptable_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EvaluationReport {
    fn new(kind: DistanceKind, method: u8, score: f64, n_gen: usize) -> Self {
        Self {
            kind,
            method,
            score,
            n_real: None,
            n_gen,
            template_origin: None,
            threshold: None,
            acceptable_count: None,
            acceptable_indices: None,
            best_index: None,
            seed: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Aligned key/value text for people.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(&str, String)> = vec![
            ("method", self.method.to_string()),
            ("metric", self.kind.to_string()),
            ("score", format!("{:.6}", self.score)),
            ("n_gen", self.n_gen.to_string()),
        ];
        if let Some(n) = self.n_real {
            rows.push(("n_real", n.to_string()));
        }
        if let Some(t) = &self.template_origin {
            rows.push(("template", t.clone()));
        }
        if let Some(t) = &self.threshold {
            rows.push(("threshold", format!("{:.6}", t.value)));
        }
        if let Some(c) = self.acceptable_count {
            rows.push(("acceptable", c.to_string()));
        }
        if let Some(b) = self.best_index {
            rows.push(("best_index", b.to_string()));
        }
        if let Some(s) = self.seed {
            rows.push(("seed", s.to_string()));
        }
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<12} {v}");
        }
        out
    }
}

/// Mean of non-negative values, computed as `min + mean(v - min)` so the
/// result can never round below the minimum or above the maximum.
fn shifted_mean(values: &[f64]) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let excess: KahanSum = values.iter().map(|v| v - min).collect();
    min + excess.total() / values.len() as f64
}

/// Lowest-index minimum.
fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

fn check_template(gen: &BeatSet, template: &Template) -> Result<()> {
    if gen.is_empty() {
        return Err(Error::EmptySet);
    }
    let len = gen.beat_length().unwrap_or(0);
    if len != template.beat.len() {
        return Err(Error::LengthMismatch {
            expected: template.beat.len(),
            found: len,
        });
    }
    Ok(())
}

/// Distances of every generated beat to the template, in set order.
pub fn template_distances(gen: &BeatSet, template: &Template, kind: DistanceKind) -> Result<Vec<f64>> {
    check_template(gen, template)?;
    metrics::distances_to(gen, template.beat.as_slice(), kind, &DistanceOptions::default())
}

pub fn method1_score(real: &BeatSet, gen: &BeatSet, kind: DistanceKind) -> Result<EvaluationReport> {
    method1_score_with(real, gen, kind, &DistanceOptions::default(), &ParallelOptions::default())
}

pub fn method1_score_with(
    real: &BeatSet,
    gen: &BeatSet,
    kind: DistanceKind,
    opts: &DistanceOptions,
    par: &ParallelOptions,
) -> Result<EvaluationReport> {
    let score = metrics::cross_mean_distance_with(real, gen, kind, opts, par)?;
    let mut r = EvaluationReport::new(kind, 1, score, gen.len());
    r.n_real = Some(real.len());
    Ok(r)
}

/// Draws `n_real` and `n_gen` beats with `seed`, then scores them.
pub fn method1_sampled(
    real: &BeatSet,
    gen: &BeatSet,
    n_real: usize,
    n_gen: usize,
    seed: u64,
    kind: DistanceKind,
) -> Result<EvaluationReport> {
    let real_sub = dataset::sample_subset(real, n_real, seed)?;
    // the generated draw uses the next seed so the two draws are independent
    let gen_sub = dataset::sample_subset(gen, n_gen, seed.wrapping_add(1))?;
    let mut r = method1_score(&real_sub, &gen_sub, kind)?;
    r.seed = Some(seed);
    Ok(r)
}

pub fn method2_score(gen: &BeatSet, template: &Template, kind: DistanceKind) -> Result<EvaluationReport> {
    let d = template_distances(gen, template, kind)?;
    Ok(method2_from_distances(&d, template, kind))
}

fn method2_from_distances(d: &[f64], template: &Template, kind: DistanceKind) -> EvaluationReport {
    let mut r = EvaluationReport::new(kind, 2, shifted_mean(d), d.len());
    r.template_origin = Some(template.origin.to_string());
    r
}

pub fn method3_best(
    gen: &BeatSet,
    template: &Template,
    kind: DistanceKind,
) -> Result<(Beat, EvaluationReport)> {
    let d = template_distances(gen, template, kind)?;
    let (idx, r) = method3_from_distances(&d, template, kind);
    Ok((gen.beats()[idx].clone(), r))
}

fn method3_from_distances(d: &[f64], template: &Template, kind: DistanceKind) -> (usize, EvaluationReport) {
    let (idx, best) = argmin(d);
    let mut r = EvaluationReport::new(kind, 3, best, d.len());
    r.template_origin = Some(template.origin.to_string());
    r.best_index = Some(idx);
    (idx, r)
}

pub fn method4_productivity(
    gen: &BeatSet,
    template: &Template,
    kind: DistanceKind,
    threshold: &Threshold,
) -> Result<EvaluationReport> {
    let d = template_distances(gen, template, kind)?;
    Ok(method4_from_distances(&d, template, kind, threshold))
}

/// Productivity percent and the indices of acceptable beats.
pub fn productivity(distances: &[f64], threshold: f64) -> (f64, Vec<usize>) {
    let accepted: Vec<usize> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= threshold)
        .map(|(i, _)| i)
        .collect();
    let pct = if distances.is_empty() {
        0.0
    } else {
        100.0 * accepted.len() as f64 / distances.len() as f64
    };
    (pct, accepted)
}

fn method4_from_distances(
    d: &[f64],
    template: &Template,
    kind: DistanceKind,
    threshold: &Threshold,
) -> EvaluationReport {
    let (pct, accepted) = productivity(d, threshold.value);
    let mut r = EvaluationReport::new(kind, 4, pct, d.len());
    r.template_origin = Some(template.origin.to_string());
    r.threshold = Some(*threshold);
    r.acceptable_count = Some(accepted.len());
    r.acceptable_indices = Some(accepted);
    r
}

/// Methods 2, 3 and 4 over one distance vector. The threshold is the
/// default midpoint unless `threshold` is given.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateScores {
    pub s2: EvaluationReport,
    pub s3: EvaluationReport,
    pub s4: EvaluationReport,
    pub best_beat: Beat,
}

pub fn template_scores(
    gen: &BeatSet,
    template: &Template,
    kind: DistanceKind,
    threshold: Option<Threshold>,
) -> Result<TemplateScores> {
    let d = template_distances(gen, template, kind)?;
    let s2 = method2_from_distances(&d, template, kind);
    let (idx, s3) = method3_from_distances(&d, template, kind);
    let eta = match threshold {
        Some(t) => t,
        None => compute_threshold(s2.score, s3.score, kind)?,
    };
    let s4 = method4_from_distances(&d, template, kind, &eta);
    Ok(TemplateScores {
        s2,
        s3,
        s4,
        best_beat: gen.beats()[idx].clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub generator: f64,
    pub discriminator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub s2_dtw: f64,
    pub s2_frechet: f64,
    pub s2_euclid: f64,
    pub generator_loss: f64,
    pub discriminator_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochCurve {
    pub points: Vec<CurvePoint>,
}

const CURVE_HEADER: &str = "epoch,s2_dtw,s2_frechet,s2_euclid,generator_loss,discriminator_loss";

impl EpochCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.epoch, p.s2_dtw, p.s2_frechet, p.s2_euclid, p.generator_loss, p.discriminator_loss
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (row, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |reason: String| Error::MalformedRow { row, reason };
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", f.len())));
            }
            let num = |k: usize| -> Result<f64> {
                f[k].trim()
                    .parse()
                    .map_err(|_| bad(format!("field {k} is not a number")))
            };
            points.push(CurvePoint {
                epoch: f[0]
                    .trim()
                    .parse()
                    .map_err(|_| bad("epoch is not an integer".into()))?,
                s2_dtw: num(1)?,
                s2_frechet: num(2)?,
                s2_euclid: num(3)?,
                generator_loss: num(4)?,
                discriminator_loss: num(5)?,
            });
        }
        Ok(Self { points })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Per-epoch Method-2 scores under all three distances, joined with the
/// recorded losses. `snapshots` holds `(epoch, beats)` pairs.
pub fn epoch_curves(
    snapshots: &[(usize, BeatSet)],
    template: &Template,
    losses: &[EpochLoss],
) -> Result<EpochCurve> {
    if snapshots.len() != losses.len() {
        return Err(Error::EpochMismatch(format!(
            "{} snapshot epochs vs {} loss epochs",
            snapshots.len(),
            losses.len()
        )));
    }
    let mut points = Vec::with_capacity(snapshots.len());
    let mut last_epoch = None;
    for ((epoch, beats), loss) in snapshots.iter().zip(losses) {
        if *epoch != loss.epoch {
            return Err(Error::EpochMismatch(format!(
                "snapshot epoch {epoch} paired with loss epoch {}",
                loss.epoch
            )));
        }
        if last_epoch.is_some_and(|e| e >= *epoch) {
            return Err(Error::EpochMismatch(format!("epochs not increasing at {epoch}")));
        }
        last_epoch = Some(*epoch);
        let s2 = |k| method2_score(beats, template, k).map(|r| r.score);
        points.push(CurvePoint {
            epoch: *epoch,
            s2_dtw: s2(DistanceKind::Dtw)?,
            s2_frechet: s2(DistanceKind::Frechet)?,
            s2_euclid: s2(DistanceKind::Euclidean)?,
            generator_loss: loss.generator,
            discriminator_loss: loss.discriminator,
        });
    }
    Ok(EpochCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassLabel, Source};
    use crate::templates::TemplateOrigin;

    fn set(rows: &[&[f64]]) -> BeatSet {
        BeatSet::uniform(
            rows.iter().map(|r| Beat::new(r.to_vec()).unwrap()).collect(),
            ClassLabel::G,
            Source::Generated,
        )
        .unwrap()
    }

    fn tmpl(v: &[f64]) -> Template {
        Template {
            beat: Beat::new(v.to_vec()).unwrap(),
            origin: TemplateOrigin::Sab,
        }
    }

    #[test]
    fn method1_examples() {
        let a = set(&[&[0.2, 0.4]]);
        assert_eq!(method1_score(&a, &a, DistanceKind::Dtw).unwrap().score, 0.0);
        let r = method1_score(&set(&[&[0.0, 0.0]]), &set(&[&[1.0, 1.0]]), DistanceKind::Euclidean).unwrap();
        assert!((r.score - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((r.n_real, r.n_gen), (Some(1), 1));
    }

    #[test]
    fn method2_examples() {
        let t = tmpl(&[0.0, 0.0]);
        assert_eq!(method2_score(&set(&[&[0.0, 0.0]]), &t, DistanceKind::Euclidean).unwrap().score, 0.0);
        // Euclidean distances 1 and 3 from the origin
        let g = set(&[&[1.0, 0.0], &[0.0, 3.0]]);
        assert_eq!(method2_score(&g, &t, DistanceKind::Euclidean).unwrap().score, 2.0);
        let wrong = tmpl(&[0.0, 0.0, 0.0]);
        assert!(matches!(
            method2_score(&g, &wrong, DistanceKind::Dtw),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            method2_score(&BeatSet::empty(Source::Generated), &t, DistanceKind::Dtw),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn method3_examples() {
        let t = tmpl(&[0.0, 0.0]);
        let g = set(&[&[2.0, 0.0], &[0.0, 5.0], &[1.0, 0.0]]);
        let (best, r) = method3_best(&g, &t, DistanceKind::Euclidean).unwrap();
        assert_eq!(r.score, 1.0);
        assert_eq!(r.best_index, Some(2));
        assert_eq!(best.as_slice(), &[1.0, 0.0]);
        let with_t = set(&[&[2.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(method3_best(&with_t, &t, DistanceKind::Dtw).unwrap().1.score, 0.0);
        // ties go to the lowest index
        let tie = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(method3_best(&tie, &t, DistanceKind::Euclidean).unwrap().1.best_index, Some(0));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(compute_threshold(2.0, 0.0, DistanceKind::Dtw).unwrap().value, 1.0);
        let eta = compute_threshold(4.13, 0.510, DistanceKind::Dtw).unwrap();
        assert!((eta.value - 2.32).abs() < 1e-12);
        assert_eq!(compute_threshold(0.7, 0.7, DistanceKind::Dtw).unwrap().value, 0.7);
        assert!(matches!(
            compute_threshold(1.0, 2.0, DistanceKind::Dtw),
            Err(Error::InvalidInputs(_))
        ));
        assert!(compute_threshold(-1.0, -2.0, DistanceKind::Dtw).is_err());
        let s = scaled_threshold(0.5, 3.0, DistanceKind::Frechet).unwrap();
        assert_eq!((s.value, s.scale), (1.5, Some(3.0)));
    }

    #[test]
    fn method4_examples() {
        let (pct, idx) = productivity(&[0.5, 1.5, 2.5], 1.0);
        assert!((pct - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(idx, vec![0]);
        let t = tmpl(&[0.1, 0.2]);
        let g = set(&[&[0.1, 0.2], &[0.1, 0.2]]);
        let eta = manual_threshold(0.0, DistanceKind::Dtw).unwrap();
        let r = method4_productivity(&g, &t, DistanceKind::Dtw, &eta).unwrap();
        assert_eq!(r.score, 100.0);
        assert_eq!(r.acceptable_count, Some(2));
    }

    #[test]
    fn report_json_round_trip_is_flat() {
        let t = tmpl(&[0.0, 0.0]);
        let g = set(&[&[1.0, 0.0], &[0.0, 3.0]]);
        let s = template_scores(&g, &t, DistanceKind::Euclidean, None).unwrap();
        let json = s.s4.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["threshold"], 1.5);
        assert_eq!(v["threshold_derivation"], "mean-of-min-and-avg");
        assert_eq!(v["kind"], "euclid");
        assert_eq!(EvaluationReport::from_json(&json).unwrap(), s.s4);
    }

    #[test]
    fn epoch_curve_examples() {
        let t = tmpl(&[0.3, -0.3]);
        let snaps = vec![(1, set(&[&[0.3, -0.3]]))];
        let losses = vec![EpochLoss {
            epoch: 1,
            generator: 0.7,
            discriminator: 1.3,
        }];
        let c = epoch_curves(&snaps, &t, &losses).unwrap();
        assert_eq!(c.points.len(), 1);
        let p = c.points[0];
        assert_eq!((p.s2_dtw, p.s2_frechet, p.s2_euclid), (0.0, 0.0, 0.0));
        assert_eq!(EpochCurve::from_csv(&c.to_csv()).unwrap(), c);

        let snaps30: Vec<_> = (1..=30)
            .map(|e| (e, set(&[&[0.1, 0.2][..]; 10])))
            .collect();
        let losses30: Vec<_> = (1..=30)
            .map(|e| EpochLoss {
                epoch: e,
                generator: 1.0,
                discriminator: 1.0,
            })
            .collect();
        assert_eq!(epoch_curves(&snaps30, &t, &losses30).unwrap().points.len(), 30);
        assert!(matches!(
            epoch_curves(&snaps30, &t, &losses30[..29]),
            Err(Error::EpochMismatch(_))
        ));
    }

    #[test]
    fn shifted_mean_bounds() {
        let v = [0.1; 7];
        assert_eq!(shifted_mean(&v), 0.1);
        let v = [3.0, 1.0, 2.0];
        assert_eq!(shifted_mean(&v), 2.0);
    }
}
