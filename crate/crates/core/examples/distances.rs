//! DTW, discrete Frechet and Euclidean distances between beats, a banded
//! DTW, and the parallel cross-set mean.

use beatgen::dataset::{normalize_set, ClassLabel, NormalizeMode};
use beatgen::metrics::{cross_mean_distance, dtw, euclidean, frechet, DistanceKind, DtwOptions, LocalCost};
use beatgen::synth::{synth_beats, SynthConfig};

fn main() -> beatgen::Result<()> {
    let c = SynthConfig::default();
    let (normal, _) = normalize_set(&synth_beats(ClassLabel::N, 50, &c, 1)?, NormalizeMode::PerBeat)?;
    let (lbbb, _) = normalize_set(&synth_beats(ClassLabel::L, 50, &c, 1)?, NormalizeMode::PerBeat)?;
    let (a, b, l) = (
        normal.beats()[0].as_slice(),
        normal.beats()[1].as_slice(),
        lbbb.beats()[0].as_slice(),
    );

    println!("{:<22}{:>10}{:>10}", "", "N vs N", "N vs L");
    let free = DtwOptions::default();
    let banded = DtwOptions {
        band_radius: Some(10),
        ..free
    };
    let squared = DtwOptions {
        local_cost: LocalCost::Squared,
        ..free
    };
    let rows: [(&str, f64, f64); 5] = [
        ("dtw", dtw(a, b, &free)?, dtw(a, l, &free)?),
        ("dtw, band 10", dtw(a, b, &banded)?, dtw(a, l, &banded)?),
        ("dtw, squared cost", dtw(a, b, &squared)?, dtw(a, l, &squared)?),
        ("frechet", frechet(a, b)?, frechet(a, l)?),
        ("euclidean", euclidean(a, b)?, euclidean(a, l)?),
    ];
    for (name, same, other) in rows {
        println!("{name:<22}{same:>10.3}{other:>10.3}");
    }

    println!("\nmean over all 50 x 50 pairs");
    for kind in DistanceKind::ALL {
        println!(
            "{:<10} N-N {:.3}  N-L {:.3}",
            kind.name(),
            cross_mean_distance(&normal, &normal, kind)?,
            cross_mean_distance(&normal, &lbbb, kind)?
        );
    }
    Ok(())
}
