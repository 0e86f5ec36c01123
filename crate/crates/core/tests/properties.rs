//! Cross-module invariants as property tests.

use beatgen::augmentation::ConfusionMatrix;
use beatgen::dataset::{
    normalize_beat, parse_beats, resample_beat, sample_subset, split, write_beats, Beat, BeatSet, ClassLabel, Source,
};
use beatgen::evaluation::{manual_threshold, method4_productivity, productivity, template_scores};
use beatgen::metrics::{
    cross_mean_distance_with, dtw, euclidean, frechet, DistanceKind, DistanceOptions, DtwOptions, ParallelOptions,
};
use beatgen::models::{Checkpoint, GanConfig, ModelKind};
use beatgen::templates::{Template, TemplateOrigin};
use proptest::prelude::*;

fn series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 2..=max_len)
}

fn equal_series(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    let s = || prop::collection::vec(-2.0f64..2.0, len);
    (s(), s(), s())
}

fn gen_set(len: usize, max_n: usize) -> impl Strategy<Value = BeatSet> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, len), 1..=max_n).prop_map(|rows| {
        BeatSet::uniform(
            rows.into_iter().map(|r| Beat::new(r).unwrap()).collect(),
            ClassLabel::G,
            Source::Generated,
        )
        .unwrap()
    })
}

fn template(len: usize) -> impl Strategy<Value = Template> {
    prop::collection::vec(-1.0f64..1.0, len).prop_map(|v| Template {
        beat: Beat::new(v).unwrap(),
        origin: TemplateOrigin::Sab,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn diagonal_path_bounds(x in series(24), y in series(24)) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        let linf = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(dtw(x, y, &DtwOptions::default()).unwrap() <= l1);
        prop_assert!(frechet(x, y).unwrap() <= linf);
    }

    #[test]
    fn triangle_inequalities((x, y, z) in equal_series(16)) {
        for f in [euclidean, frechet] {
            let (xy, yz, xz) = (f(&x, &y).unwrap(), f(&y, &z).unwrap(), f(&x, &z).unwrap());
            prop_assert!(xz <= xy + yz + 1e-9);
        }
    }

    #[test]
    fn band_only_raises_dtw(x in series(20), y in series(20), r in 0usize..6) {
        let free = dtw(&x, &y, &DtwOptions::default()).unwrap();
        let banded = dtw(&x, &y, &DtwOptions { band_radius: Some(r), ..Default::default() });
        if let Ok(b) = banded {
            prop_assert!(b >= free - 1e-12);
        }
    }

    #[test]
    fn cross_mean_ignores_thread_count(a in gen_set(12, 10), b in gen_set(12, 10), t in 1usize..6, c in 1usize..5) {
        let o = DistanceOptions::default();
        let one = ParallelOptions { threads: Some(1), chunk_rows: 1 };
        let many = ParallelOptions { threads: Some(t), chunk_rows: c };
        for kind in DistanceKind::ALL {
            prop_assert_eq!(
                cross_mean_distance_with(&a, &b, kind, &o, &one).unwrap().to_bits(),
                cross_mean_distance_with(&a, &b, kind, &o, &many).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn threshold_sits_between_best_and_mean(gen in gen_set(16, 20), t in template(16), k in 0usize..3) {
        let kind = DistanceKind::ALL[k];
        let s = template_scores(&gen, &t, kind, None).unwrap();
        let eta = s.s4.threshold.unwrap().value;
        prop_assert!(s.s3.score <= eta && eta <= s.s2.score);
        prop_assert!(s.s4.score > 0.0);
        prop_assert!(s.s4.acceptable_indices.as_ref().unwrap().contains(&s.s3.best_index.unwrap()));
    }

    #[test]
    fn productivity_monotone_in_threshold(gen in gen_set(10, 20), t in template(10), lo in 0.0f64..5.0, step in 0.0f64..5.0) {
        let kind = DistanceKind::Euclidean;
        let a = method4_productivity(&gen, &t, kind, &manual_threshold(lo, kind).unwrap()).unwrap().score;
        let b = method4_productivity(&gen, &t, kind, &manual_threshold(lo + step, kind).unwrap()).unwrap().score;
        prop_assert!(a <= b);
        prop_assert!((0.0..=100.0).contains(&b));
    }

    #[test]
    fn productivity_counts(d in prop::collection::vec(0.0f64..10.0, 1..50), eta in 0.0f64..10.0) {
        let (pct, idx) = productivity(&d, eta);
        prop_assert_eq!(idx.len(), d.iter().filter(|&&v| v <= eta).count());
        prop_assert!((pct - 100.0 * idx.len() as f64 / d.len() as f64).abs() == 0.0);
    }

    #[test]
    fn normalized_beats_span_unit_interval(v in series(64)) {
        prop_assume!(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > v.iter().cloned().fold(f64::INFINITY, f64::min));
        let b = normalize_beat(&Beat::new(v).unwrap()).unwrap();
        prop_assert_eq!(b.min(), -1.0);
        prop_assert_eq!(b.max(), 1.0);
    }

    #[test]
    fn resampling_keeps_constants_and_length(c in -5.0f64..5.0, from in 2usize..400, to in 2usize..400) {
        let out = resample_beat(&Beat::new(vec![c; from]).unwrap(), to).unwrap();
        prop_assert_eq!(out.len(), to);
        prop_assert!(out.as_slice().iter().all(|&v| v == c));
    }

    #[test]
    fn resampling_is_identity_at_same_length(v in series(64)) {
        let b = Beat::new(v.clone()).unwrap();
        let out = resample_beat(&b, v.len()).unwrap();
        for (a, o) in v.iter().zip(out.as_slice()) {
            prop_assert!((a - o).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trip(set in gen_set(8, 6)) {
        let mut buf = Vec::new();
        write_beats(&mut buf, &set).unwrap();
        let back = parse_beats(buf.as_slice(), 8).unwrap();
        prop_assert_eq!(back.beats(), set.beats());
        prop_assert_eq!(back.labels(), set.labels());
    }

    #[test]
    fn subsets_and_splits_partition(set in gen_set(4, 40), seed in any::<u64>(), n in 1usize..40) {
        let n = n.min(set.len());
        let sub = sample_subset(&set, n, seed).unwrap();
        prop_assert_eq!(sub.len(), n);
        prop_assert_eq!(&sub, &sample_subset(&set, n, seed).unwrap());
        if set.len() >= 2 {
            let (train, test) = split(&set, 0.3, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), set.len());
        }
    }

    #[test]
    fn confusion_matrix_totals(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..60)) {
        let labels = [ClassLabel::N, ClassLabel::L];
        let truth: Vec<ClassLabel> = pairs.iter().map(|p| labels[p.0]).collect();
        let pred: Vec<ClassLabel> = pairs.iter().map(|p| labels[p.1]).collect();
        let cm = ConfusionMatrix::from_predictions(&labels, &truth, &pred).unwrap();
        prop_assert_eq!(cm.total(), pairs.len());
        let r = cm.report().unwrap();
        let correct = pairs.iter().filter(|p| p.0 == p.1).count();
        prop_assert!((r.accuracy - correct as f64 / pairs.len() as f64).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// A damaged checkpoint is rejected with an error, never a panic or a
    /// silently different model.
    #[test]
    fn damaged_checkpoints_are_rejected(pos in any::<prop::sample::Index>(), bit in 0u8..8, cut in any::<prop::sample::Index>()) {
        let mut config = GanConfig::new(ModelKind::WganFc);
        config.beat_length = 16;
        config.latent_dim = 4;
        let bytes = Checkpoint::untrained(&config).unwrap().to_bytes().unwrap();
        let mut flipped = bytes.clone();
        flipped[pos.index(bytes.len())] ^= 1 << bit;
        prop_assert!(Checkpoint::from_bytes(&flipped).is_err());
        let truncated = &bytes[..cut.index(bytes.len())];
        prop_assert!(Checkpoint::from_bytes(truncated).is_err());
    }
}
