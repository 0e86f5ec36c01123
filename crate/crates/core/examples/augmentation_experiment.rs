//! Balanced, imbalanced and generator-rebalanced classifier scenarios on
//! synthetic N and L beats.

use beatgen::augmentation::{run_experiment_with_checkpoint, ExperimentSpec};
use beatgen::dataset::{normalize_set, ClassLabel, NormalizeMode};
use beatgen::models::{train, GanConfig, ModelKind};
use beatgen::synth::{synth_beats, synth_two_class, SynthConfig};

fn main() -> beatgen::Result<()> {
    let synth = SynthConfig::default();
    let (real, _) = normalize_set(
        &synth_two_class((ClassLabel::L, 800), (ClassLabel::N, 800), &synth, 1)?,
        NormalizeMode::PerBeat,
    )?;
    // the generator learns from normal beats outside the experiment pool
    let (normal, _) = normalize_set(&synth_beats(ClassLabel::N, 500, &synth, 2)?, NormalizeMode::PerBeat)?;
    let mut config = GanConfig::new(ModelKind::Classic);
    config.seed = 7;
    let run = train(&config, &normal)?;

    for seed in 0..3 {
        let spec = ExperimentSpec::desk(ClassLabel::L, ClassLabel::N, seed);
        let summary = run_experiment_with_checkpoint(&real, &run.checkpoint, &spec)?;
        if seed == 0 {
            println!("{}", summary.to_text());
        }
        println!(
            "seed {seed}: macro F1 {:.3} / {:.3} / {:.3}",
            summary.macro_f1("balanced").unwrap_or(f64::NAN),
            summary.macro_f1("imbalanced").unwrap_or(f64::NAN),
            summary.macro_f1("augmented").unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
