//! Writes SVG figures (with CSV data) for the best generated beat under each
//! distance and for the similarity and loss curves of a short training run.
//!
//! `cargo run --release --example figures -- [out-dir]`

use beatgen::dataset::{normalize_set, ClassLabel, NormalizeMode};
use beatgen::evaluation::epoch_curves;
use beatgen::models::{train, GanConfig, ModelKind};
use beatgen::plot::{best_beat_figures, write_curve_figure};
use beatgen::synth::{synth_beats, SynthConfig};
use beatgen::templates::random_template;

fn main() -> beatgen::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "figures".into());
    let (data, _) = normalize_set(&synth_beats(ClassLabel::N, 300, &SynthConfig::default(), 6)?, NormalizeMode::PerBeat)?;
    let mut config = GanConfig::new(ModelKind::Classic);
    config.epochs = 10;
    let run = train(&config, &data)?;

    let template = random_template(&data, 0)?;
    let curve = epoch_curves(&run.snapshots, &template, &run.losses)?;
    let (svg, _) = write_curve_figure(&out, "curve", &curve)?;
    println!("{}", svg.display());
    let last = &run.snapshots.last().expect("snapshots").1;
    for path in best_beat_figures(last, &template, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}
