//! Generative models over beats and their training loops.
//!
//! | kind      | generator                                   | discriminator            |
//! |-----------|---------------------------------------------|--------------------------|
//! | `classic` | 100→128→256→512→1024→L, BN on the middle three, tanh | L→512→256→1, sigmoid |
//! | `wgan-fc` | same as `classic`                           | same, no sigmoid (critic) |
//! | `vaegan`  | decoder 10→512→512→L tanh, encoder L→512→512→(mu, logvar) | 10→512→256→1, sigmoid on latent codes |
//!
//! All hidden activations are LeakyReLU(0.2).

mod checkpoint;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use train::{generate, train, train_with_progress, TrainRun};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network};
use crate::rng::{Rng, Stream};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Classic,
    Vaegan,
    WganFc,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Classic => "classic",
            ModelKind::Vaegan => "vaegan",
            ModelKind::WganFc => "wgan-fc",
        }
    }

    fn tag(self) -> u8 {
        match self {
            ModelKind::Classic => 1,
            ModelKind::Vaegan => 2,
            ModelKind::WganFc => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(ModelKind::Classic),
            2 => Some(ModelKind::Vaegan),
            3 => Some(ModelKind::WganFc),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "classic" => Ok(ModelKind::Classic),
            "vaegan" => Ok(ModelKind::Vaegan),
            "wgan-fc" | "wgan_fc" => Ok(ModelKind::WganFc),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub model_kind: ModelKind,
    /// Generator input width. The VAE-GAN uses it as its code width.
    pub latent_dim: usize,
    pub beat_length: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub snapshot_per_epoch: usize,
    pub lambda_adv: f64,
    pub lambda_l1: f64,
    pub lambda_kl: f64,
    pub clip: f64,
    pub n_critic: usize,
}

impl GanConfig {
    pub fn new(model_kind: ModelKind) -> Self {
        Self {
            model_kind,
            latent_dim: match model_kind {
                ModelKind::Vaegan => 10,
                _ => 100,
            },
            beat_length: 256,
            epochs: 30,
            batch_size: 9,
            lr: 0.0002,
            beta1: 0.5,
            beta2: 0.999,
            seed: 0,
            snapshot_per_epoch: 10,
            lambda_adv: 1.0,
            lambda_l1: 100.0,
            lambda_kl: 1.0,
            clip: 0.01,
            n_critic: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.to_string()));
        if self.latent_dim == 0 || self.beat_length < 2 {
            return bad("latent_dim must be positive and beat_length >= 2");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.lambda_adv < 0.0 || self.lambda_l1 < 0.0 || self.lambda_kl < 0.0 {
            return bad("loss weights must be non-negative");
        }
        if self.model_kind == ModelKind::WganFc && (self.clip <= 0.0 || self.n_critic == 0) {
            return bad("wgan-fc needs clip > 0 and n_critic >= 1");
        }
        Ok(())
    }

    /// Short stable digest of the configuration, stamped on run artifacts.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Encoder of the VAE-GAN: shared trunk plus separate `mu` and `logvar`
/// heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub trunk: Network,
    pub mu: Network,
    pub logvar: Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub kind: ModelKind,
    /// Maps latent vectors to beats (the decoder for the VAE-GAN).
    pub generator: Network,
    /// Discriminator, or critic for `wgan-fc`.
    pub discriminator: Network,
    pub encoder: Option<Encoder>,
}

pub fn generator_specs(latent: usize, beat_length: usize) -> Vec<LayerSpec> {
    let lr = LayerSpec::leaky(LEAKY_SLOPE);
    vec![
        LayerSpec::fc(latent, 128),
        lr,
        LayerSpec::fc(128, 256),
        LayerSpec::batch_norm(256),
        lr,
        LayerSpec::fc(256, 512),
        LayerSpec::batch_norm(512),
        lr,
        LayerSpec::fc(512, 1024),
        LayerSpec::batch_norm(1024),
        lr,
        LayerSpec::fc(1024, beat_length),
        LayerSpec::Tanh,
    ]
}

pub fn discriminator_specs(input: usize, sigmoid: bool) -> Vec<LayerSpec> {
    let lr = LayerSpec::leaky(LEAKY_SLOPE);
    let mut s = vec![
        LayerSpec::fc(input, 512),
        lr,
        LayerSpec::fc(512, 256),
        lr,
        LayerSpec::fc(256, 1),
    ];
    if sigmoid {
        s.push(LayerSpec::Sigmoid);
    }
    s
}

pub fn encoder_trunk_specs(beat_length: usize) -> Vec<LayerSpec> {
    let lr = LayerSpec::leaky(LEAKY_SLOPE);
    vec![
        LayerSpec::fc(beat_length, 512),
        lr,
        LayerSpec::fc(512, 512),
        LayerSpec::batch_norm(512),
        lr,
    ]
}

pub fn decoder_specs(code: usize, beat_length: usize) -> Vec<LayerSpec> {
    let lr = LayerSpec::leaky(LEAKY_SLOPE);
    vec![
        LayerSpec::fc(code, 512),
        lr,
        LayerSpec::fc(512, 512),
        LayerSpec::batch_norm(512),
        lr,
        LayerSpec::fc(512, beat_length),
        LayerSpec::Tanh,
    ]
}

/// Builds untrained networks; weights are drawn from the config seed.
pub fn build_model(config: &GanConfig) -> Result<GanModel> {
    config.validate()?;
    let mut rng = Rng::with_stream(config.seed, Stream::Init);
    let (l, z) = (config.beat_length, config.latent_dim);
    Ok(match config.model_kind {
        ModelKind::Classic | ModelKind::WganFc => GanModel {
            kind: config.model_kind,
            generator: Network::new(&generator_specs(z, l), &mut rng)?,
            discriminator: Network::new(
                &discriminator_specs(l, config.model_kind == ModelKind::Classic),
                &mut rng,
            )?,
            encoder: None,
        },
        ModelKind::Vaegan => {
            let encoder = Encoder {
                trunk: Network::new(&encoder_trunk_specs(l), &mut rng)?,
                mu: Network::new(&[LayerSpec::fc(512, z)], &mut rng)?,
                logvar: Network::new(&[LayerSpec::fc(512, z)], &mut rng)?,
            };
            GanModel {
                kind: ModelKind::Vaegan,
                generator: Network::new(&decoder_specs(z, l), &mut rng)?,
                discriminator: Network::new(&discriminator_specs(z, true), &mut rng)?,
                encoder: Some(encoder),
            }
        }
    })
}

impl GanModel {
    /// Named networks in a fixed order.
    pub fn networks(&self) -> Vec<(&'static str, &Network)> {
        let mut v = vec![
            ("generator", &self.generator),
            ("discriminator", &self.discriminator),
        ];
        if let Some(e) = &self.encoder {
            v.push(("encoder", &e.trunk));
            v.push(("encoder_mu", &e.mu));
            v.push(("encoder_logvar", &e.logvar));
        }
        v
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.input_dim().unwrap_or(0)
    }

    pub fn beat_length(&self) -> usize {
        self.generator.output_dim().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    #[test]
    fn classic_generator_parameter_count() {
        let m = build_model(&GanConfig::new(ModelKind::Classic)).unwrap();
        let expected = (100 * 128 + 128)
            + (128 * 256 + 256)
            + (256 * 512 + 512)
            + (512 * 1024 + 1024)
            + (1024 * 256 + 256)
            + 2 * (256 + 512 + 1024);
        assert_eq!(m.generator.param_count(), expected);
        assert_eq!(
            m.discriminator.param_count(),
            (256 * 512 + 512) + (512 * 256 + 256) + (256 + 1)
        );
    }

    #[test]
    fn vaegan_heads_emit_ten() {
        let m = build_model(&GanConfig::new(ModelKind::Vaegan)).unwrap();
        let e = m.encoder.as_ref().unwrap();
        assert_eq!(e.mu.output_dim(), Some(10));
        assert_eq!(e.logvar.output_dim(), Some(10));
        assert_eq!(m.discriminator.input_dim(), Some(10));
        assert_eq!(m.generator.input_dim(), Some(10));
        assert_eq!(m.beat_length(), 256);
    }

    #[test]
    fn wgan_critic_has_no_sigmoid() {
        let m = build_model(&GanConfig::new(ModelKind::WganFc)).unwrap();
        assert!(!matches!(m.discriminator.layers().last(), Some(Layer::Sigmoid)));
        let c = build_model(&GanConfig::new(ModelKind::Classic)).unwrap();
        assert!(matches!(c.discriminator.layers().last(), Some(Layer::Sigmoid)));
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = GanConfig::new(ModelKind::Classic);
        c.batch_size = 0;
        assert!(matches!(build_model(&c), Err(Error::BadConfig(_))));
    }

    #[test]
    fn config_hash_is_stable() {
        let c = GanConfig::new(ModelKind::Classic);
        assert_eq!(c.hash(), c.clone().hash());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(c.hash(), d.hash());
    }
}
