//! Scores a set of beats against a random and an averaged template with the
//! four evaluation methods.

use beatgen::dataset::{normalize_set, ClassLabel, NormalizeMode};
use beatgen::evaluation::{method1_sampled, scaled_threshold, template_scores};
use beatgen::metrics::DistanceKind;
use beatgen::synth::{synth_beats, SynthConfig};
use beatgen::templates::{random_template, sab_template};

fn main() -> beatgen::Result<()> {
    let noisy = SynthConfig {
        noise: 0.06,
        jitter: 0.2,
        ..SynthConfig::default()
    };
    let (real, _) = normalize_set(&synth_beats(ClassLabel::N, 400, &SynthConfig::default(), 1)?, NormalizeMode::PerBeat)?;
    // stand-in for generator output: the same class with more variation
    let (gen, _) = normalize_set(&synth_beats(ClassLabel::N, 300, &noisy, 2)?, NormalizeMode::PerBeat)?;

    for kind in DistanceKind::ALL {
        let s1 = method1_sampled(&real, &gen, 100, 100, 0, kind)?;
        println!("{:<8} s1 {:.3}", kind.name(), s1.score);
    }
    for template in [random_template(&real, 3)?, sab_template(&real)?] {
        println!("\ntemplate {}", template.origin);
        for kind in DistanceKind::ALL {
            let s = template_scores(&gen, &template, kind, None)?;
            let eta = s.s4.threshold.expect("threshold");
            let strict = template_scores(&gen, &template, kind, Some(scaled_threshold(s.s3.score, 1.5, kind)?))?;
            println!(
                "{:<8} s2 {:>7.3}  s3 {:>7.3} (beat {:>3})  eta {:>7.3}  s4 {:>5.1}%  s4(1.5 s3) {:>5.1}%",
                kind.name(),
                s.s2.score,
                s.s3.score,
                s.s3.best_index.unwrap_or_default(),
                eta.value,
                s.s4.score,
                strict.s4.score
            );
        }
    }
    Ok(())
}
