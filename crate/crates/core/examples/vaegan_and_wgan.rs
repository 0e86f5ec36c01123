//! Trains the VAE-GAN and the Wasserstein GAN briefly and compares their
//! losses and output quality with the classic GAN.

use beatgen::dataset::{normalize_set, ClassLabel, NormalizeMode};
use beatgen::evaluation::template_scores;
use beatgen::metrics::DistanceKind;
use beatgen::models::{generate, train, GanConfig, ModelKind};
use beatgen::synth::{synth_beats, SynthConfig};
use beatgen::templates::sab_template;

fn main() -> beatgen::Result<()> {
    let (data, _) = normalize_set(&synth_beats(ClassLabel::N, 300, &SynthConfig::default(), 4)?, NormalizeMode::PerBeat)?;
    let template = sab_template(&data)?;
    for kind in [ModelKind::Classic, ModelKind::Vaegan, ModelKind::WganFc] {
        let mut config = GanConfig::new(kind);
        config.epochs = 8;
        config.seed = 1;
        let run = train(&config, &data)?;
        let last = run.losses.last().expect("losses");
        let gen = generate(&run.checkpoint, 200, 9)?;
        let s = template_scores(&gen, &template, DistanceKind::Dtw, None)?;
        println!(
            "{:<8} latent {:>3}  G {:>8.4}  D {:>8.4}  s2 {:>7.3}  s3 {:>7.3}",
            kind.name(),
            config.latent_dim,
            last.generator,
            last.discriminator,
            s.s2.score,
            s.s3.score
        );
        if !run.reconstruction.is_empty() {
            let r: Vec<String> = run.reconstruction.iter().map(|v| format!("{v:.3}")).collect();
            println!("         reconstruction L1 per epoch {}", r.join(" "));
        }
        if kind == ModelKind::WganFc {
            println!("         largest critic weight {:.4}", run.checkpoint.model.discriminator.max_abs_param());
        }
    }
    Ok(())
}
