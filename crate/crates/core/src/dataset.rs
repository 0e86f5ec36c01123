//! Segmented heartbeat data: parsing, filtering, resampling, normalization
//! and every randomized subset operation.
//!
//! The on-disk text format is one beat per line, `label,v1,...,vL`, with no
//! header. A compact binary cache plus a key-value manifest is written by the
//! ingest step so later commands skip the text parse.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};

/// Beat-class tag. `G` marks generated beats and `T` a template when they are
/// written to the beat CSV format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    N,
    V,
    F,
    S,
    Q,
    L,
    G,
    T,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 8] = [
        ClassLabel::N,
        ClassLabel::V,
        ClassLabel::F,
        ClassLabel::S,
        ClassLabel::Q,
        ClassLabel::L,
        ClassLabel::G,
        ClassLabel::T,
    ];

    pub fn as_char(self) -> char {
        match self {
            ClassLabel::N => 'N',
            ClassLabel::V => 'V',
            ClassLabel::F => 'F',
            ClassLabel::S => 'S',
            ClassLabel::Q => 'Q',
            ClassLabel::L => 'L',
            ClassLabel::G => 'G',
            ClassLabel::T => 'T',
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        ClassLabel::ALL
            .iter()
            .copied()
            .find(|l| s.len() == 1 && s.starts_with(l.as_char()))
            .ok_or_else(|| format!("unknown class label {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Generated,
    Augmented,
}

/// Provenance of a single beat inside a set: the row it was read from, or
/// its position in the generated stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BeatId {
    Real(usize),
    Generated(usize),
}

/// One segmented cardiac cycle. Always at least two finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Beat(Vec<f64>);

impl Beat {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidBeat(format!(
                "length {} < 2",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidBeat(format!("non-finite sample at {i}")));
        }
        Ok(Self(samples))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl AsRef<[f64]> for Beat {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A labeled collection of equal-length beats.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSet {
    beats: Vec<Beat>,
    labels: Vec<ClassLabel>,
    ids: Vec<BeatId>,
    source: Source,
}

impl BeatSet {
    pub fn new(
        beats: Vec<Beat>,
        labels: Vec<ClassLabel>,
        ids: Vec<BeatId>,
        source: Source,
    ) -> Result<Self> {
        if beats.len() != labels.len() || beats.len() != ids.len() {
            return Err(Error::InvalidInputs(format!(
                "{} beats, {} labels, {} ids",
                beats.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(first) = beats.first() {
            let expected = first.len();
            if let Some(b) = beats.iter().find(|b| b.len() != expected) {
                return Err(Error::LengthMismatch {
                    expected,
                    found: b.len(),
                });
            }
        }
        Ok(Self {
            beats,
            labels,
            ids,
            source,
        })
    }

    /// All beats share `label`; ids are positional.
    pub fn uniform(beats: Vec<Beat>, label: ClassLabel, source: Source) -> Result<Self> {
        let n = beats.len();
        let ids = (0..n)
            .map(|i| match source {
                Source::Generated => BeatId::Generated(i),
                _ => BeatId::Real(i),
            })
            .collect();
        Self::new(beats, vec![label; n], ids, source)
    }

    pub fn empty(source: Source) -> Self {
        Self {
            beats: Vec::new(),
            labels: Vec::new(),
            ids: Vec::new(),
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    pub fn beats(&self) -> &[Beat] {
        &self.beats
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn ids(&self) -> &[BeatId] {
        &self.ids
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn beat_length(&self) -> Option<usize> {
        self.beats.first().map(Beat::len)
    }

    /// The shared class label, if every member carries the same one.
    pub fn class_label(&self) -> Option<ClassLabel> {
        let first = *self.labels.first()?;
        self.labels.iter().all(|&l| l == first).then_some(first)
    }

    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> BeatSet {
        BeatSet {
            beats: indices.iter().map(|&i| self.beats[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            source: self.source,
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn relabel(mut self, label: ClassLabel) -> Self {
        self.labels.iter_mut().for_each(|l| *l = label);
        self
    }

    /// Appends `other`. Mixed provenance yields an `Augmented` set.
    pub fn concat(&self, other: &BeatSet) -> Result<BeatSet> {
        let source = match (self.is_empty(), other.is_empty()) {
            (true, _) => other.source,
            (_, true) => self.source,
            _ if self.source == other.source => self.source,
            _ => Source::Augmented,
        };
        let mut beats = self.beats.clone();
        beats.extend(other.beats.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        BeatSet::new(beats, labels, ids, source)
    }

    pub fn try_map<F>(&self, mut f: F) -> Result<BeatSet>
    where
        F: FnMut(&Beat) -> Result<Beat>,
    {
        let beats = self.beats.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        BeatSet::new(beats, self.labels.clone(), self.ids.clone(), self.source)
    }

    /// Row-major copy of all samples, `len() * beat_length()` values.
    pub fn to_flat(&self) -> Vec<f64> {
        self.beats
            .iter()
            .flat_map(|b| b.as_slice().iter().copied())
            .collect()
    }
}

/// Description of an ingested dataset, written next to the binary cache.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub beat_length: usize,
    pub classes_present: BTreeMap<ClassLabel, usize>,
    pub seed: u64,
    pub normalization: NormalizeMode,
    pub constant_beats: usize,
}

impl DatasetManifest {
    pub fn total(&self) -> usize {
        self.classes_present.values().sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("path = {}\n", self.path.display()));
        s.push_str(&format!("beat_length = {}\n", self.beat_length));
        s.push_str(&format!("total = {}\n", self.total()));
        for (label, count) in &self.classes_present {
            s.push_str(&format!("class.{label} = {count}\n"));
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("normalization = {}\n", self.normalization));
        s.push_str(&format!("constant_beats = {}\n", self.constant_beats));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInputs(format!("manifest line {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .cloned()
                .ok_or_else(|| Error::InvalidInputs(format!("manifest missing {k}")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::InvalidInputs(format!("manifest field {k} is not an integer")))
        };
        let mut classes_present = BTreeMap::new();
        for (k, v) in &kv {
            if let Some(label) = k.strip_prefix("class.") {
                let label: ClassLabel = label.parse().map_err(Error::InvalidInputs)?;
                let count = v
                    .parse()
                    .map_err(|_| Error::InvalidInputs(format!("bad count for {k}")))?;
                classes_present.insert(label, count);
            }
        }
        Ok(Self {
            path: PathBuf::from(get("path")?),
            beat_length: num("beat_length")? as usize,
            classes_present,
            seed: num("seed")?,
            normalization: get("normalization")?.parse().map_err(Error::InvalidInputs)?,
            constant_beats: num("constant_beats")? as usize,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeMode {
    Off,
    #[default]
    PerBeat,
    Global,
}

impl fmt::Display for NormalizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizeMode::Off => "off",
            NormalizeMode::PerBeat => "per-beat",
            NormalizeMode::Global => "global",
        })
    }
}

impl FromStr for NormalizeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "off" => Ok(NormalizeMode::Off),
            "per-beat" => Ok(NormalizeMode::PerBeat),
            "global" => Ok(NormalizeMode::Global),
            other => Err(format!("unknown normalization {other:?}")),
        }
    }
}

pub fn load_beats(path: impl AsRef<Path>, expected_length: usize) -> Result<BeatSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_beats(BufReader::new(file), expected_length)
}

/// Parses the beat CSV format from any reader. Blank lines are skipped; row
/// indices in errors count data rows from zero.
pub fn parse_beats<R: BufRead>(reader: R, expected_length: usize) -> Result<BeatSet> {
    let mut beats = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut row = 0usize;
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label: ClassLabel = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|reason| Error::MalformedRow { row, reason })?;
        let samples = fields
            .enumerate()
            .map(|(k, f)| {
                let v: f64 = f.trim().parse().map_err(|_| Error::MalformedRow {
                    row,
                    reason: format!("sample {k} is not a number: {f:?}"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::MalformedRow {
                        row,
                        reason: format!("sample {k} is not finite"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if samples.len() != expected_length {
            return Err(Error::LengthMismatch {
                expected: expected_length,
                found: samples.len(),
            });
        }
        beats.push(Beat::new(samples).map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?);
        labels.push(label);
        ids.push(BeatId::Real(row));
        row += 1;
    }
    BeatSet::new(beats, labels, ids, Source::Real)
}

/// Writes beats in the CSV format using each beat's own label.
pub fn write_beats<W: Write>(mut out: W, set: &BeatSet) -> Result<()> {
    for (beat, label) in set.beats().iter().zip(set.labels()) {
        write_beat_line(&mut out, *label, beat)?;
    }
    Ok(())
}

pub fn write_beat_line<W: Write>(out: &mut W, label: ClassLabel, beat: &Beat) -> Result<()> {
    let mut line = String::with_capacity(beat.len() * 12);
    line.push(label.as_char());
    for v in beat.as_slice() {
        line.push(',');
        line.push_str(&v.to_string());
    }
    line.push('\n');
    out.write_all(line.as_bytes())?;
    Ok(())
}

pub fn save_beats_csv(path: impl AsRef<Path>, set: &BeatSet) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_beats(&mut w, set)?;
    w.flush()?;
    Ok(())
}

/// Reads a beat CSV whose length is taken from its first row.
pub fn load_beats_any_length(path: impl AsRef<Path>) -> Result<BeatSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let len = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').count().saturating_sub(1))
        .unwrap_or(0);
    parse_beats(text.as_bytes(), len)
}

pub fn filter_class(set: &BeatSet, label: ClassLabel) -> BeatSet {
    let idx: Vec<usize> = (0..set.len())
        .filter(|&i| set.labels[i] == label)
        .collect();
    set.select(&idx)
}

/// Fourier-domain resampling to `target_length` samples.
///
/// The spectrum is truncated or zero-padded symmetrically and the even-length
/// Nyquist bin is folded or split so a real input stays real. The first
/// sample is subtracted before the transform and added back after; this is an
/// exact no-op for the linear map but keeps constant inputs exactly constant.
pub fn resample_beat(beat: &Beat, target_length: usize) -> Result<Beat> {
    if target_length < 2 {
        return Err(Error::InvalidTargetLength(target_length));
    }
    let src = beat.as_slice();
    let nx = src.len();
    if nx == target_length {
        return Ok(beat.clone());
    }
    let offset = src[0];
    let mut planner = FftPlanner::<f64>::new();
    let mut spectrum: Vec<Complex64> = src
        .iter()
        .map(|&v| Complex64::new(v - offset, 0.0))
        .collect();
    planner.plan_fft_forward(nx).process(&mut spectrum);

    let num = target_length;
    let n = nx.min(num);
    let nyq = n / 2 + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); num];
    out[..nyq].copy_from_slice(&spectrum[..nyq]);
    if n > 2 {
        let k = n - nyq;
        out[num - k..].copy_from_slice(&spectrum[nx - k..]);
    }
    if n.is_multiple_of(2) {
        if num < nx {
            out[num - n / 2] += spectrum[nx - n / 2];
        } else {
            out[n / 2] *= 0.5;
            out[num - n / 2] = out[n / 2];
        }
    }
    planner.plan_fft_inverse(num).process(&mut out);
    // rustfft is unnormalized: 1/num from the inverse, num/nx amplitude scale.
    let scale = 1.0 / nx as f64;
    Beat::new(out.iter().map(|c| c.re * scale + offset).collect())
}

/// Per-beat min–max map onto `[-1, 1]`.
pub fn normalize_beat(beat: &Beat) -> Result<Beat> {
    let (lo, hi) = (beat.min(), beat.max());
    if hi <= lo {
        return Err(Error::ConstantBeat);
    }
    Beat::new(min_max(beat.as_slice(), lo, hi))
}

/// Like [`normalize_beat`] but maps a constant beat to zeros and reports it.
pub fn normalize_beat_lenient(beat: &Beat) -> (Beat, bool) {
    match normalize_beat(beat) {
        Ok(b) => (b, false),
        Err(_) => (Beat(vec![0.0; beat.len()]), true),
    }
}

fn min_max(samples: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    samples
        .iter()
        .map(|&v| (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0))
        .collect()
}

/// Applies a normalization mode to a whole set; returns the number of
/// constant beats that were mapped to zeros.
pub fn normalize_set(set: &BeatSet, mode: NormalizeMode) -> Result<(BeatSet, usize)> {
    match mode {
        NormalizeMode::Off => Ok((set.clone(), 0)),
        NormalizeMode::PerBeat => {
            let mut constant = 0;
            let out = set.try_map(|b| {
                let (nb, flagged) = normalize_beat_lenient(b);
                if flagged {
                    log::warn!("constant beat mapped to zeros");
                    constant += 1;
                }
                Ok(nb)
            })?;
            Ok((out, constant))
        }
        NormalizeMode::Global => {
            let lo = set.beats().iter().map(Beat::min).fold(f64::INFINITY, f64::min);
            let hi = set
                .beats()
                .iter()
                .map(Beat::max)
                .fold(f64::NEG_INFINITY, f64::max);
            if set.is_empty() {
                return Ok((set.clone(), 0));
            }
            if hi <= lo {
                let out = set.try_map(|b| Beat::new(vec![0.0; b.len()]))?;
                return Ok((out, set.len()));
            }
            Ok((set.try_map(|b| Beat::new(min_max(b.as_slice(), lo, hi)))?, 0))
        }
    }
}

/// Uniform sample of `n` beats without replacement, in draw order.
pub fn sample_subset(set: &BeatSet, n: usize, seed: u64) -> Result<BeatSet> {
    if n == 0 {
        return Err(Error::InvalidInputs("sample size must be >= 1".into()));
    }
    if n > set.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: set.len(),
        });
    }
    let mut rng = Rng::with_stream(seed, Stream::Sampling);
    Ok(set.select(&rng.sample_indices(set.len(), n)))
}

/// Disjoint train/test split with `round(test_fraction * len)` test beats.
/// Both halves keep the original order.
pub fn split(set: &BeatSet, test_fraction: f64, seed: u64) -> Result<(BeatSet, BeatSet)> {
    let (train, test) = split_indices(set.len(), test_fraction, seed)?;
    Ok((set.select(&train), set.select(&test)))
}

pub fn split_indices(len: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInputs(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = (test_fraction * len as f64).round() as usize;
    if len < 2 || n_test == 0 || n_test >= len {
        return Err(Error::DegenerateSplit {
            train: len.saturating_sub(n_test),
            test: n_test,
        });
    }
    let mut rng = Rng::with_stream(seed, Stream::Sampling);
    let mut idx: Vec<usize> = (0..len).collect();
    rng.shuffle(&mut idx);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

const CACHE_MAGIC: &[u8; 8] = b"BGBEATS1";

/// Binary cache: magic, beat length (u32), count (u64), then per beat a
/// label byte, an id tag byte, the id (u64) and the samples as little-endian
/// f64.
pub fn save_cache(path: impl AsRef<Path>, set: &BeatSet) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(set.beat_length().unwrap_or(0) as u32).to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&[source_tag(set.source)])?;
    for i in 0..set.len() {
        w.write_all(&[set.labels[i].as_char() as u8])?;
        let (tag, id) = match set.ids[i] {
            BeatId::Real(k) => (0u8, k),
            BeatId::Generated(k) => (1u8, k),
        };
        w.write_all(&[tag])?;
        w.write_all(&(id as u64).to_le_bytes())?;
        for v in set.beats[i].as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<BeatSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?
        .read_to_end(&mut bytes)?;
    let corrupt = |m: &str| Error::InvalidInputs(format!("beat cache {}: {m}", path.display()));
    if bytes.len() < 21 || &bytes[..8] != CACHE_MAGIC {
        return Err(corrupt("bad header"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let source = match bytes[20] {
        0 => Source::Real,
        1 => Source::Generated,
        2 => Source::Augmented,
        _ => return Err(corrupt("bad source tag")),
    };
    let record = 10 + 8 * len;
    if bytes.len() != 21 + count * record {
        return Err(corrupt("truncated"));
    }
    let mut beats = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut ids = Vec::with_capacity(count);
    for chunk in bytes[21..].chunks_exact(record) {
        let label: ClassLabel = (chunk[0] as char)
            .to_string()
            .parse()
            .map_err(|_| corrupt("bad label"))?;
        let id = u64::from_le_bytes(chunk[2..10].try_into().unwrap()) as usize;
        let id = match chunk[1] {
            0 => BeatId::Real(id),
            1 => BeatId::Generated(id),
            _ => return Err(corrupt("bad id tag")),
        };
        let samples = chunk[10..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        beats.push(Beat::new(samples)?);
        labels.push(label);
        ids.push(id);
    }
    BeatSet::new(beats, labels, ids, source)
}

fn source_tag(source: Source) -> u8 {
    match source {
        Source::Real => 0,
        Source::Generated => 1,
        Source::Augmented => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beat(v: &[f64]) -> Beat {
        Beat::new(v.to_vec()).unwrap()
    }

    fn set_of(labels: &[ClassLabel], len: usize) -> BeatSet {
        let beats = labels
            .iter()
            .enumerate()
            .map(|(i, _)| Beat::new((0..len).map(|k| (i * len + k) as f64).collect()).unwrap())
            .collect();
        let ids = (0..labels.len()).map(BeatId::Real).collect();
        BeatSet::new(beats, labels.to_vec(), ids, Source::Real).unwrap()
    }

    #[test]
    fn parses_valid_rows() {
        let mut text = String::new();
        for r in 0..3 {
            text.push('N');
            for k in 0..280 {
                text.push_str(&format!(",{}", (r * k) as f64 * 0.01));
            }
            text.push('\n');
        }
        let set = parse_beats(text.as_bytes(), 280).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.beat_length(), Some(280));
        assert_eq!(set.source(), Source::Real);
    }

    #[test]
    fn nan_row_is_malformed() {
        let text = "N,0.1,0.2,0.3\nV,0.1,NaN,0.3\n";
        match parse_beats(text.as_bytes(), 3) {
            Err(Error::MalformedRow { row: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_length_row() {
        let text = "N,0.1,0.2\n";
        assert!(matches!(
            parse_beats(text.as_bytes(), 3),
            Err(Error::LengthMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_beats("/nonexistent/beats.csv", 3),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn filter_counts() {
        use ClassLabel::*;
        let set = set_of(&[N, N, V], 4);
        assert_eq!(filter_class(&set, N).len(), 2);
        let vv = set_of(&[V, V], 4);
        assert_eq!(filter_class(&vv, N).len(), 0);
        let mixed = set_of(&[N, V, L, N, S, Q, F, L], 3);
        let total: usize = [N, V, F, S, Q, L]
            .iter()
            .map(|&l| filter_class(&mixed, l).len())
            .sum();
        assert_eq!(total, mixed.len());
        // order preserved
        let n = filter_class(&mixed, N);
        assert_eq!(n.ids(), &[BeatId::Real(0), BeatId::Real(3)]);
    }

    #[test]
    fn resample_constant_is_exact() {
        let b = beat(&[0.5; 280]);
        let r = resample_beat(&b, 256).unwrap();
        assert_eq!(r.len(), 256);
        assert!(r.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn resample_upsample_sinusoid() {
        let src: Vec<f64> = (0..64)
            .map(|n| (2.0 * std::f64::consts::PI * 3.0 * n as f64 / 64.0).cos())
            .collect();
        let r = resample_beat(&beat(&src), 100).unwrap();
        for (m, v) in r.as_slice().iter().enumerate() {
            let want = (2.0 * std::f64::consts::PI * 3.0 * m as f64 / 100.0).cos();
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_rejects_short_target() {
        assert!(matches!(
            resample_beat(&beat(&[1.0, 2.0, 3.0]), 1),
            Err(Error::InvalidTargetLength(1))
        ));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_beat(&beat(&[-5.0, 0.0, 5.0])).unwrap().as_slice(),
            &[-1.0, 0.0, 1.0]
        );
        assert_eq!(
            normalize_beat(&beat(&[0.0, 10.0])).unwrap().as_slice(),
            &[-1.0, 1.0]
        );
        assert_eq!(
            normalize_beat(&beat(&[-1.0, 1.0])).unwrap().as_slice(),
            &[-1.0, 1.0]
        );
        assert!(matches!(
            normalize_beat(&beat(&[2.0, 2.0])),
            Err(Error::ConstantBeat)
        ));
        let (z, flagged) = normalize_beat_lenient(&beat(&[2.0, 2.0, 2.0]));
        assert!(flagged);
        assert_eq!(z.as_slice(), &[0.0; 3]);
    }

    #[test]
    fn global_normalization_uses_set_extremes() {
        let set = BeatSet::uniform(
            vec![beat(&[0.0, 1.0]), beat(&[2.0, 4.0])],
            ClassLabel::N,
            Source::Real,
        )
        .unwrap();
        let (n, c) = normalize_set(&set, NormalizeMode::Global).unwrap();
        assert_eq!(c, 0);
        assert_eq!(n.beats()[0].as_slice(), &[-1.0, -0.5]);
        assert_eq!(n.beats()[1].as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn subset_sampling() {
        let set = set_of(&[ClassLabel::N; 20], 3);
        let all = sample_subset(&set, 20, 5).unwrap();
        let mut ids = all.ids().to_vec();
        ids.sort();
        assert_eq!(ids, set.ids());
        assert_eq!(
            sample_subset(&set, 7, 11).unwrap(),
            sample_subset(&set, 7, 11).unwrap()
        );
        assert!(matches!(
            sample_subset(&set, 21, 0),
            Err(Error::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let set = set_of(&[ClassLabel::N; 10], 3);
        let (train, test) = split(&set, 0.2, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        for id in test.ids() {
            assert!(!train.ids().contains(id));
        }
        assert_eq!(split(&set, 0.2, 1).unwrap(), (train, test));
        let tiny = set_of(&[ClassLabel::N; 2], 3);
        assert!(matches!(
            split(&tiny, 0.1, 0),
            Err(Error::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = set_of(&[ClassLabel::N, ClassLabel::L], 5);
        let p = dir.path().join("c.bin");
        save_cache(&p, &set).unwrap();
        assert_eq!(load_cache(&p).unwrap(), set);
    }

    #[test]
    fn manifest_round_trip() {
        let mut classes = BTreeMap::new();
        classes.insert(ClassLabel::N, 90);
        classes.insert(ClassLabel::L, 10);
        let m = DatasetManifest {
            path: "beats.csv".into(),
            beat_length: 256,
            classes_present: classes,
            seed: 7,
            normalization: NormalizeMode::PerBeat,
            constant_beats: 1,
        };
        assert_eq!(m.total(), 100);
        assert_eq!(DatasetManifest::parse(&m.to_text()).unwrap(), m);
    }
}
