//! Synthetic single-lead heartbeats built from Gaussian P, Q, R, S and T
//! waves with per-beat jitter, baseline wander and white noise.
//!
//! Used wherever a real annotated recording is not at hand: tests, the
//! runnable examples and desk-scale experiments. Only `N` (normal sinus) and
//! `L` (left bundle branch block: wide notched QRS, inverted T) have
//! dedicated morphologies; other labels fall back to `N`.

use serde::{Deserialize, Serialize};

use crate::dataset::{Beat, BeatId, BeatSet, ClassLabel, Source};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub length: usize,
    /// White-noise standard deviation, in units of the R-wave height.
    pub noise: f64,
    /// Relative jitter of wave positions, widths and amplitudes.
    pub jitter: f64,
    /// Peak amplitude of the baseline wander.
    pub wander: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            length: 256,
            noise: 0.015,
            jitter: 0.08,
            wander: 0.04,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    center: f64,
    amp: f64,
    width: f64,
}

const fn w(center: f64, amp: f64, width: f64) -> Wave {
    Wave { center, amp, width }
}

fn morphology(label: ClassLabel) -> &'static [Wave] {
    const NORMAL: [Wave; 5] = [
        w(0.24, 0.12, 0.025),
        w(0.365, -0.10, 0.008),
        w(0.40, 1.00, 0.011),
        w(0.435, -0.22, 0.010),
        w(0.68, 0.28, 0.045),
    ];
    const LBBB: [Wave; 5] = [
        w(0.24, 0.10, 0.025),
        w(0.39, 0.75, 0.028),
        w(0.46, 0.85, 0.026),
        w(0.52, -0.10, 0.020),
        w(0.72, -0.35, 0.055),
    ];
    match label {
        ClassLabel::L => &LBBB,
        _ => &NORMAL,
    }
}

/// One raw (unnormalized) beat.
pub fn synth_beat(label: ClassLabel, config: &SynthConfig, rng: &mut Rng) -> Result<Beat> {
    if config.length < 2 {
        return Err(Error::InvalidTargetLength(config.length));
    }
    let j = config.jitter;
    // common timing offset, as left by imperfect R-peak alignment
    let shift = 0.01 * j * rng.normal();
    let waves: Vec<Wave> = morphology(label)
        .iter()
        .map(|wv| Wave {
            center: wv.center + shift + 0.2 * j * wv.width * rng.normal(),
            amp: wv.amp * (1.0 + j * rng.normal()),
            width: wv.width * (1.0 + j * rng.normal()).max(0.3),
        })
        .collect();
    let slope = config.wander * rng.normal();
    let phase = rng.uniform_range(0.0, std::f64::consts::TAU);
    let n = config.length;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let signal: f64 = waves
                .iter()
                .map(|wv| {
                    let d = (t - wv.center) / wv.width;
                    wv.amp * (-0.5 * d * d).exp()
                })
                .sum();
            let baseline = slope * (t - 0.5) + config.wander * (std::f64::consts::TAU * t + phase).sin();
            signal + baseline + config.noise * rng.normal()
        })
        .collect();
    Beat::new(samples)
}

/// `n` beats of class `label`, reproducible from `seed`.
pub fn synth_beats(label: ClassLabel, n: usize, config: &SynthConfig, seed: u64) -> Result<BeatSet> {
    let mut rng = Rng::with_stream_id(seed, 0x5359_4e00 | label.as_char() as u64);
    let beats = (0..n)
        .map(|_| synth_beat(label, config, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    BeatSet::uniform(beats, label, Source::Real)
}

/// `majority.1` beats of class `majority.0` followed by `minority.1` of
/// `minority.0`, with ids numbered by position.
pub fn synth_two_class(
    majority: (ClassLabel, usize),
    minority: (ClassLabel, usize),
    config: &SynthConfig,
    seed: u64,
) -> Result<BeatSet> {
    let a = synth_beats(majority.0, majority.1, config, seed)?;
    let b = synth_beats(minority.0, minority.1, config, seed)?;
    let both = a.concat(&b)?;
    let ids = (0..both.len()).map(BeatId::Real).collect();
    BeatSet::new(both.beats().to_vec(), both.labels().to_vec(), ids, Source::Real)
}
