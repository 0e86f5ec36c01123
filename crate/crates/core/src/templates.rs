//! Reference beats for a class: the per-timestep mean of the class, or one
//! member drawn at random for a human to approve.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Beat, BeatSet, ClassLabel};
use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TemplateOrigin {
    Sab,
    Random { seed: u64, index: usize },
    File { path: PathBuf },
}

impl fmt::Display for TemplateOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateOrigin::Sab => f.write_str("sab"),
            TemplateOrigin::Random { seed, index } => write!(f, "random(seed={seed},index={index})"),
            TemplateOrigin::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub beat: Beat,
    pub origin: TemplateOrigin,
}

/// Statistically averaged beat: mean across the set at every time step.
pub fn sab_template(set: &BeatSet) -> Result<Template> {
    let len = set.beat_length().ok_or(Error::EmptySet)?;
    let mut mean = vec![0.0; len];
    for beat in set.beats() {
        for (m, v) in mean.iter_mut().zip(beat.as_slice()) {
            *m += v;
        }
    }
    let n = set.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(Template {
        beat: Beat::new(mean)?,
        origin: TemplateOrigin::Sab,
    })
}

pub fn random_template(set: &BeatSet, seed: u64) -> Result<Template> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let index = Rng::with_stream(seed, Stream::Sampling).below(set.len());
    Ok(Template {
        beat: set.beats()[index].clone(),
        origin: TemplateOrigin::Random { seed, index },
    })
}

/// Writes the template as a single beat-CSV row labelled `T`.
pub fn save_template(path: impl AsRef<Path>, template: &Template) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    dataset::write_beat_line(&mut w, ClassLabel::T, &template.beat)?;
    Ok(())
}

/// Reads the first row of a beat CSV as a template.
pub fn load_template(path: impl AsRef<Path>) -> Result<Template> {
    let path = path.as_ref();
    let set = dataset::load_beats_any_length(path)?;
    let beat = set.beats().first().cloned().ok_or(Error::EmptySet)?;
    Ok(Template {
        beat,
        origin: TemplateOrigin::File {
            path: path.to_path_buf(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Source;
    use proptest::prelude::*;

    fn set(rows: &[Vec<f64>]) -> BeatSet {
        BeatSet::uniform(
            rows.iter().map(|r| Beat::new(r.clone()).unwrap()).collect(),
            ClassLabel::N,
            Source::Real,
        )
        .unwrap()
    }

    #[test]
    fn sab_examples() {
        let t = sab_template(&set(&[vec![0.0, 2.0], vec![2.0, 4.0]])).unwrap();
        assert_eq!(t.beat.as_slice(), &[1.0, 3.0]);
        let single = vec![0.25, -0.5, 0.75];
        let t = sab_template(&set(std::slice::from_ref(&single))).unwrap();
        assert_eq!(t.beat.as_slice(), single.as_slice());
        assert!(matches!(
            sab_template(&BeatSet::empty(Source::Real)),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn random_examples() {
        let s = set(&[vec![1.0, 2.0]]);
        let t = random_template(&s, 99).unwrap();
        assert_eq!(t.origin, TemplateOrigin::Random { seed: 99, index: 0 });
        let two = set(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(random_template(&two, 5).unwrap(), random_template(&two, 5).unwrap());
        let mut seen = [false; 2];
        for seed in 0..100 {
            if let TemplateOrigin::Random { index, .. } = random_template(&two, seed).unwrap().origin {
                seen[index] = true;
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let t = Template {
            beat: Beat::new(vec![0.1, -0.2, 0.3]).unwrap(),
            origin: TemplateOrigin::Sab,
        };
        save_template(&p, &t).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("T,"));
        let back = load_template(&p).unwrap();
        assert_eq!(back.beat, t.beat);
    }

    proptest! {
        #[test]
        fn sab_commutes_with_affine(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 8), 1..12),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let base = sab_template(&set(&rows)).unwrap();
            let mapped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| a * v + b).collect()).collect();
            let t = sab_template(&set(&mapped)).unwrap();
            prop_assert_eq!(t.beat.len(), 8);
            for (x, y) in t.beat.as_slice().iter().zip(base.beat.as_slice()) {
                prop_assert!((x - (a * y + b)).abs() < 1e-12);
            }
        }

        #[test]
        fn random_template_is_member(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..10),
            seed in any::<u64>(),
        ) {
            let s = set(&rows);
            let t = random_template(&s, seed).unwrap();
            prop_assert!(s.beats().contains(&t.beat));
        }
    }
}
