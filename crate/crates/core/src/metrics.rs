//! Distance functions between beats and the parallel set-to-set kernel.
//!
//! All three distances are symmetric bit-for-bit: the local costs are
//! symmetric in IEEE arithmetic and the dynamic programs perform the same
//! additions and comparisons on the transposed grid.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::BeatSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Dtw,
    Frechet,
    #[serde(rename = "euclid")]
    Euclidean,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [
        DistanceKind::Dtw,
        DistanceKind::Frechet,
        DistanceKind::Euclidean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Dtw => "dtw",
            DistanceKind::Frechet => "frechet",
            DistanceKind::Euclidean => "euclid",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dtw" => Ok(DistanceKind::Dtw),
            "frechet" | "fréchet" => Ok(DistanceKind::Frechet),
            "euclid" | "euclidean" => Ok(DistanceKind::Euclidean),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalCost {
    #[default]
    Absolute,
    Squared,
}

impl LocalCost {
    #[inline]
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            LocalCost::Absolute => (a - b).abs(),
            LocalCost::Squared => (a - b) * (a - b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DtwOptions {
    pub local_cost: LocalCost,
    /// Sakoe–Chiba half-width; `None` is unconstrained.
    pub band_radius: Option<usize>,
}

/// Every distance selectable at run time, with its DTW options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DistanceOptions {
    pub dtw: DtwOptions,
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Dynamic time warping cost `D[M][N]` with `D[0][0] = f(x0, y0)` and the
/// first row/column accumulated along their single admissible predecessor.
/// Uses two rolling rows over the shorter series.
pub fn dtw(x: &[f64], y: &[f64], opts: &DtwOptions) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::LengthZero);
    }
    if let Some(r) = opts.band_radius {
        if x.len().abs_diff(y.len()) > r {
            return Err(Error::BandTooNarrow {
                radius: r,
                left: x.len(),
                right: y.len(),
            });
        }
    }
    // Rows run over the longer series, columns over the shorter one.
    let (outer, inner) = if y.len() <= x.len() { (x, y) } else { (y, x) };
    let cost = opts.local_cost;
    let band = opts.band_radius.unwrap_or(usize::MAX);
    let n = inner.len();
    let mut prev = vec![f64::INFINITY; n];
    let mut cur = vec![f64::INFINITY; n];

    for (i, &a) in outer.iter().enumerate() {
        let lo = i.saturating_sub(band);
        let hi = i.saturating_add(band).min(n - 1);
        cur.iter_mut().for_each(|c| *c = f64::INFINITY);
        for j in lo..=hi {
            let c = cost.eval(a, inner[j]);
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(cur[j - 1]).min(prev[j - 1]),
            };
            cur[j] = c + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n - 1])
}

/// Discrete Fréchet distance with absolute difference as the link length.
pub fn frechet(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::LengthZero);
    }
    let (outer, inner) = if y.len() <= x.len() { (x, y) } else { (y, x) };
    let n = inner.len();
    let mut prev = vec![f64::INFINITY; n];
    let mut cur = vec![f64::INFINITY; n];
    for (i, &a) in outer.iter().enumerate() {
        for j in 0..n {
            let d = (a - inner[j]).abs();
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => d.max(cur[j - 1]),
                (_, 0) => d.max(prev[0]),
                _ => d.max(prev[j].min(cur[j - 1]).min(prev[j - 1])),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n - 1])
}

pub fn distance(kind: DistanceKind, x: &[f64], y: &[f64]) -> Result<f64> {
    distance_with(kind, &DistanceOptions::default(), x, y)
}

pub fn distance_with(
    kind: DistanceKind,
    opts: &DistanceOptions,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    match kind {
        DistanceKind::Dtw => dtw(x, y, &opts.dtw),
        DistanceKind::Frechet => frechet(x, y),
        DistanceKind::Euclidean => euclidean(x, y),
    }
}

/// Compensated summation in the order given.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        iter.into_iter().for_each(|v| k.add(v));
        k
    }
}

/// Execution knobs for the pair-grid kernels. None of them affects the
/// result: each row of the grid is reduced serially and the row totals are
/// combined in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParallelOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Rows of the grid handed to a worker at a time.
    pub chunk_rows: usize,
}

impl Default for ParallelOptions {
    fn default() -> Self {
        Self {
            threads: None,
            chunk_rows: 4,
        }
    }
}

/// Mean of `DF(a_i, b_j)` over every pair.
pub fn cross_mean_distance(a: &BeatSet, b: &BeatSet, kind: DistanceKind) -> Result<f64> {
    cross_mean_distance_with(
        a,
        b,
        kind,
        &DistanceOptions::default(),
        &ParallelOptions::default(),
    )
}

pub fn cross_mean_distance_with(
    a: &BeatSet,
    b: &BeatSet,
    kind: DistanceKind,
    opts: &DistanceOptions,
    par: &ParallelOptions,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.beat_length() != b.beat_length() {
        return Err(Error::LengthMismatch {
            expected: a.beat_length().unwrap_or(0),
            found: b.beat_length().unwrap_or(0),
        });
    }
    let rows = row_sums(a, b, kind, opts, par)?;
    let total: KahanSum = rows.into_iter().collect();
    Ok(total.total() / (a.len() as f64 * b.len() as f64))
}

fn row_sums(
    a: &BeatSet,
    b: &BeatSet,
    kind: DistanceKind,
    opts: &DistanceOptions,
    par: &ParallelOptions,
) -> Result<Vec<f64>> {
    let chunk = par.chunk_rows.max(1);
    let work = || -> Result<Vec<f64>> {
        let chunks: Vec<Result<Vec<f64>>> = a
            .beats()
            .par_chunks(chunk)
            .map(|rows| {
                rows.iter()
                    .map(|x| {
                        let mut acc = KahanSum::default();
                        for y in b.beats() {
                            acc.add(distance_with(kind, opts, x.as_slice(), y.as_slice())?);
                        }
                        Ok(acc.total())
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(a.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    };
    match par.threads {
        None => work(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInputs(format!("thread pool: {e}")))?
            .install(work),
    }
}

/// Distance from every beat of `set` to one reference beat, in set order.
pub fn distances_to(
    set: &BeatSet,
    reference: &[f64],
    kind: DistanceKind,
    opts: &DistanceOptions,
) -> Result<Vec<f64>> {
    set.beats()
        .par_iter()
        .map(|b| distance_with(kind, opts, b.as_slice(), reference))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Beat, ClassLabel, Source};
    use crate::rng::Rng;

    const ABS: DtwOptions = DtwOptions {
        local_cost: LocalCost::Absolute,
        band_radius: None,
    };

    /// Minimum over all monotone paths of the summed (or max) link cost.
    fn brute(x: &[f64], y: &[f64], fold: &dyn Fn(f64, f64) -> f64, init: f64) -> f64 {
        fn go(
            x: &[f64],
            y: &[f64],
            i: usize,
            j: usize,
            acc: f64,
            fold: &dyn Fn(f64, f64) -> f64,
        ) -> f64 {
            let acc = fold(acc, (x[i] - y[j]).abs());
            if i == x.len() - 1 && j == y.len() - 1 {
                return acc;
            }
            let mut best = f64::INFINITY;
            if i + 1 < x.len() {
                best = best.min(go(x, y, i + 1, j, acc, fold));
            }
            if j + 1 < y.len() {
                best = best.min(go(x, y, i, j + 1, acc, fold));
            }
            if i + 1 < x.len() && j + 1 < y.len() {
                best = best.min(go(x, y, i + 1, j + 1, acc, fold));
            }
            best
        }
        go(x, y, 0, 0, init, fold)
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((euclidean(&[0.0; 3], &[1.0; 3]).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(euclidean(&[1.0, 2.0], &[4.0, 6.0]).unwrap(), 5.0);
        assert!(matches!(
            euclidean(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dtw_examples_match_enumeration() {
        let sum = |a: f64, b: f64| a + b;
        let x = [1.0, 3.0, 4.0];
        let y = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(brute(&[0.0, 0.0], &[1.0, 1.0], &sum, 0.0), 2.0);
        assert_eq!(brute(&x, &y, &sum, 0.0), 2.0);
        assert_eq!(dtw(&[0.0, 0.0], &[1.0, 1.0], &ABS).unwrap(), 2.0);
        assert_eq!(dtw(&x, &y, &ABS).unwrap(), 2.0);
        assert_eq!(dtw(&x, &x, &ABS).unwrap(), 0.0);
    }

    #[test]
    fn frechet_examples_match_enumeration() {
        let max = |a: f64, b: f64| a.max(b);
        let x = [1.0, 3.0, 4.0];
        let y = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(brute(&x, &y, &max, 0.0), 1.0);
        assert_eq!(frechet(&x, &y).unwrap(), 1.0);
        assert_eq!(frechet(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(frechet(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(dtw(&[], &[1.0], &ABS), Err(Error::LengthZero)));
        assert!(matches!(frechet(&[1.0], &[]), Err(Error::LengthZero)));
    }

    #[test]
    fn band_behaviour() {
        let banded = DtwOptions {
            band_radius: Some(0),
            ..ABS
        };
        assert!(matches!(
            dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0], &banded),
            Err(Error::BandTooNarrow { .. })
        ));
        // radius 0 on equal lengths is the diagonal path
        let x: [f64; 4] = [0.0, 2.0, 1.0, 5.0];
        let y: [f64; 4] = [1.0, 1.0, 3.0, 2.0];
        let diag: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        assert_eq!(dtw(&x, &y, &banded).unwrap(), diag);
        // a wide band equals the unconstrained result
        let wide = DtwOptions {
            band_radius: Some(10),
            ..ABS
        };
        assert_eq!(dtw(&x, &y, &wide).unwrap(), dtw(&x, &y, &ABS).unwrap());
    }

    #[test]
    fn squared_cost() {
        let sq = DtwOptions {
            local_cost: LocalCost::Squared,
            band_radius: None,
        };
        assert_eq!(dtw(&[0.0, 0.0], &[2.0, 2.0], &sq).unwrap(), 8.0);
    }

    fn set(rows: &[&[f64]]) -> BeatSet {
        BeatSet::uniform(
            rows.iter().map(|r| Beat::new(r.to_vec()).unwrap()).collect(),
            ClassLabel::N,
            Source::Real,
        )
        .unwrap()
    }

    #[test]
    fn cross_mean_examples() {
        let a = set(&[&[0.3, 0.1]]);
        assert_eq!(cross_mean_distance(&a, &a, DistanceKind::Dtw).unwrap(), 0.0);
        let a = set(&[&[0.0, 0.0]]);
        let b = set(&[&[1.0, 1.0], &[3.0, 3.0]]);
        let got = cross_mean_distance(&a, &b, DistanceKind::Euclidean).unwrap();
        assert!((got - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let empty = BeatSet::empty(Source::Real);
        assert!(matches!(
            cross_mean_distance(&empty, &b, DistanceKind::Dtw),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn cross_mean_schedule_invariant() {
        let mut rng = Rng::new(4);
        let rows: Vec<Vec<f64>> = (0..23).map(|_| rng.normal_vec(16, 0.0, 1.0)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = set(&refs);
        let base = cross_mean_distance_with(
            &s,
            &s,
            DistanceKind::Frechet,
            &DistanceOptions::default(),
            &ParallelOptions {
                threads: Some(1),
                chunk_rows: 1,
            },
        )
        .unwrap();
        for (t, c) in [(2, 3), (4, 7), (3, 100)] {
            let v = cross_mean_distance_with(
                &s,
                &s,
                DistanceKind::Frechet,
                &DistanceOptions::default(),
                &ParallelOptions {
                    threads: Some(t),
                    chunk_rows: c,
                },
            )
            .unwrap();
            assert_eq!(v.to_bits(), base.to_bits());
        }
    }

    #[test]
    fn kahan_beats_naive_on_small_terms() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 10_000));
        let k: KahanSum = v.iter().copied().collect();
        assert!((k.total() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn parses_metric_names() {
        assert_eq!("dtw".parse::<DistanceKind>().unwrap(), DistanceKind::Dtw);
        assert_eq!(
            "euclid".parse::<DistanceKind>().unwrap(),
            DistanceKind::Euclidean
        );
        assert!("cosine".parse::<DistanceKind>().is_err());
    }
}
