//! Resamples beats of another length to 256 samples and maps them onto
//! [-1, 1], then writes them to a beat CSV.
//!
//! `cargo run --example resample_and_normalize -- [out.csv]`

use beatgen::dataset::{normalize_set, resample_beat, save_beats_csv, ClassLabel, NormalizeMode};
use beatgen::synth::{synth_two_class, SynthConfig};

fn main() -> beatgen::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "beats.csv".into());
    // beats segmented at 280 samples, as from a 360 Hz recording
    let config = SynthConfig {
        length: 280,
        ..SynthConfig::default()
    };
    let raw = synth_two_class((ClassLabel::L, 100), (ClassLabel::N, 100), &config, 1)?;
    let resampled = raw.try_map(|b| resample_beat(b, 256))?;
    let (set, constant) = normalize_set(&resampled, NormalizeMode::PerBeat)?;

    let first = &set.beats()[0];
    println!("{} beats, {} -> {} samples", set.len(), raw.beats()[0].len(), first.len());
    println!("first beat range [{:.3}, {:.3}], constant beats {constant}", first.min(), first.max());
    println!("classes {:?}", set.class_counts());
    save_beats_csv(&out, &set)?;
    println!("written to {out}");
    Ok(())
}
