//! Trains the classic GAN on 500 synthetic normal beats and compares the
//! productivity of the trained and untrained generators.

use std::time::Instant;

use beatgen::dataset::{normalize_set, ClassLabel, NormalizeMode};
use beatgen::evaluation::{method4_productivity, template_scores};
use beatgen::metrics::DistanceKind;
use beatgen::models::{generate, train, Checkpoint, GanConfig, ModelKind};
use beatgen::synth::{synth_beats, SynthConfig};
use beatgen::templates::random_template;

fn main() -> beatgen::Result<()> {
    let raw = synth_beats(ClassLabel::N, 500, &SynthConfig::default(), 7)?;
    let (data, _) = normalize_set(&raw, NormalizeMode::PerBeat)?;

    let mut config = GanConfig::new(ModelKind::Classic);
    config.seed = 7;
    let start = Instant::now();
    let run = train(&config, &data)?;
    println!("trained {} epochs in {:.1?}", config.epochs, start.elapsed());
    for l in run.losses.iter().step_by(5) {
        println!("epoch {:>2}  G {:.4}  D {:.4}", l.epoch, l.generator, l.discriminator);
    }

    let template = random_template(&data, 3)?;
    let trained = generate(&run.checkpoint, 300, 11)?;
    let untrained = generate(&Checkpoint::untrained(&config)?, 300, 11)?;
    let scores = template_scores(&trained, &template, DistanceKind::Dtw, None)?;
    let eta = scores.s4.threshold.expect("threshold");
    let before = method4_productivity(&untrained, &template, DistanceKind::Dtw, &eta)?;
    println!("eta {:.3}", eta.value);
    println!("productivity trained {:.1}%  untrained {:.1}%", scores.s4.score, before.score);
    Ok(())
}
