use super::{build_model, Checkpoint, Encoder, GanConfig, GanModel, ModelKind};
use crate::dataset::{Beat, BeatSet, ClassLabel, Source};
use crate::error::{Error, Result};
use crate::evaluation::EpochLoss;
use crate::nn::{
    bce_const, kl_loss, l1_loss, mean_loss, reparameterize, reparameterize_backward, AdamState,
    Matrix, Mode, Network, ParamTensor,
};
use crate::rng::{Rng, Stream};

/// Rows generated per inference pass; inference is row-independent, so this
/// only bounds memory.
const GENERATE_CHUNK: usize = 512;

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub losses: Vec<EpochLoss>,
    /// `(epoch, beats)` for epochs `1..=epochs`.
    pub snapshots: Vec<(usize, BeatSet)>,
    /// VAE-GAN only: per-epoch L1 between training beats and their
    /// reconstructions through the posterior means.
    pub reconstruction: Vec<f64>,
    pub checkpoint: Checkpoint,
}

impl TrainRun {
    /// All snapshot beats in epoch order.
    pub fn pooled_snapshots(&self) -> Result<BeatSet> {
        let mut pooled = BeatSet::empty(Source::Generated);
        for (_, s) in &self.snapshots {
            pooled = if pooled.is_empty() {
                s.clone()
            } else {
                pooled.concat(s)?
            };
        }
        Ok(pooled.with_source(Source::Generated))
    }
}

pub fn train(config: &GanConfig, data: &BeatSet) -> Result<TrainRun> {
    train_with_progress(config, data, |_, _, _| Ok(()))
}

/// [`train`], calling `on_epoch(epoch, model, loss)` after every epoch.
pub fn train_with_progress<F>(config: &GanConfig, data: &BeatSet, mut on_epoch: F) -> Result<TrainRun>
where
    F: FnMut(usize, &GanModel, &EpochLoss) -> Result<()>,
{
    let mut model = build_model(config)?;
    if data.len() < config.batch_size {
        return Err(Error::BadConfig(format!(
            "batch_size {} exceeds dataset size {}",
            config.batch_size,
            data.len()
        )));
    }
    if data.beat_length() != Some(config.beat_length) {
        return Err(Error::LengthMismatch {
            expected: config.beat_length,
            found: data.beat_length().unwrap_or(0),
        });
    }
    let real = Matrix::from_rows(data.beats())?;
    let mut trainer = Trainer::new(config);
    let mut run = TrainRun {
        losses: Vec::with_capacity(config.epochs),
        snapshots: Vec::with_capacity(config.epochs),
        reconstruction: Vec::new(),
        checkpoint: Checkpoint::new(config.clone(), 0, model.clone()),
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=config.epochs {
        trainer.rng.shuffle(&mut order);
        let (mut g_sum, mut d_sum, mut batches) = (0.0, 0.0, 0usize);
        // the trailing partial batch is dropped
        for (b, idx) in order.chunks_exact(config.batch_size).enumerate() {
            let x = real.select_rows(idx);
            let (g, d) = trainer.step(&mut model, &x)?;
            if !g.is_finite() || !d.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!(
                        "generator loss {g}, discriminator loss {d}, max |G param| {:.3e}, max |D param| {:.3e}",
                        model.generator.max_abs_param(),
                        model.discriminator.max_abs_param()
                    ),
                });
            }
            g_sum += g;
            d_sum += d;
            batches += 1;
        }
        let loss = EpochLoss {
            epoch,
            generator: g_sum / batches as f64,
            discriminator: d_sum / batches as f64,
        };
        if let Some(enc) = &model.encoder {
            run.reconstruction
                .push(reconstruction_l1(enc, &model.generator, &real)?);
        }
        let snap = snapshot(&model, config, epoch)?;
        run.snapshots.push((epoch, snap));
        on_epoch(epoch, &model, &loss)?;
        run.losses.push(loss);
    }
    run.checkpoint = Checkpoint::new(config.clone(), config.epochs, model);
    Ok(run)
}

/// `n` beats from the checkpoint's generator with latents drawn from `seed`.
pub fn generate(ckpt: &Checkpoint, n: usize, seed: u64) -> Result<BeatSet> {
    let mut rng = Rng::with_stream(seed, Stream::Latent);
    sample_generator(&ckpt.model.generator, n, &mut rng)
}

fn sample_generator(generator: &Network, n: usize, rng: &mut Rng) -> Result<BeatSet> {
    let latent = generator
        .input_dim()
        .ok_or_else(|| Error::CorruptCheckpoint("generator has no input layer".into()))?;
    // all latents are drawn before any inference so chunking cannot change them
    let z = Matrix::randn(n, latent, rng);
    let mut beats = Vec::with_capacity(n);
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(GENERATE_CHUNK) {
        let out = generator.infer(&z.select_rows(chunk))?;
        for i in 0..out.rows() {
            beats.push(Beat::new(out.row(i).to_vec())?);
        }
    }
    BeatSet::uniform(beats, ClassLabel::G, Source::Generated)
}

fn snapshot(model: &GanModel, config: &GanConfig, epoch: usize) -> Result<BeatSet> {
    let stream = ((Stream::Snapshot as u64) << 32) | epoch as u64;
    let mut rng = Rng::with_stream_id(config.seed, stream);
    sample_generator(&model.generator, config.snapshot_per_epoch, &mut rng)
}

fn reconstruction_l1(enc: &Encoder, decoder: &Network, real: &Matrix) -> Result<f64> {
    let h = enc.trunk.infer(real)?;
    let mu = enc.mu.infer(&h)?;
    let rec = decoder.infer(&mu)?;
    Ok(l1_loss(&rec, real)?.0)
}

struct Trainer {
    kind: ModelKind,
    latent: usize,
    lambda_adv: f64,
    lambda_l1: f64,
    lambda_kl: f64,
    clip: f64,
    n_critic: usize,
    rng: Rng,
    opt_g: AdamState,
    opt_d: AdamState,
    iteration: usize,
    last_g: f64,
}

impl Trainer {
    fn new(config: &GanConfig) -> Self {
        let adam = || AdamState::new(config.lr, config.beta1, config.beta2);
        Self {
            kind: config.model_kind,
            latent: config.latent_dim,
            lambda_adv: config.lambda_adv,
            lambda_l1: config.lambda_l1,
            lambda_kl: config.lambda_kl,
            clip: config.clip,
            n_critic: config.n_critic,
            rng: Rng::with_stream(config.seed, Stream::Training),
            opt_g: adam(),
            opt_d: adam(),
            iteration: 0,
            last_g: 0.0,
        }
    }

    /// One batch; returns `(generator loss, discriminator loss)`.
    fn step(&mut self, model: &mut GanModel, x: &Matrix) -> Result<(f64, f64)> {
        self.iteration += 1;
        match self.kind {
            ModelKind::Classic => self.classic_step(model, x),
            ModelKind::WganFc => self.wgan_step(model, x),
            ModelKind::Vaegan => self.vaegan_step(model, x),
        }
    }

    fn classic_step(&mut self, model: &mut GanModel, x: &Matrix) -> Result<(f64, f64)> {
        let z = Matrix::randn(x.rows(), self.latent, &mut self.rng);
        let (fake, g_cache) = model.generator.forward(&z, Mode::Train)?;

        let d = &mut model.discriminator;
        d.zero_grad();
        let (p_real, c_real) = d.forward(x, Mode::Train)?;
        let (l_real, g_real) = bce_const(&p_real, 1.0)?;
        d.backward(&c_real, &g_real)?;
        let (p_fake, c_fake) = d.forward(&fake, Mode::Train)?;
        let (l_fake, g_fake) = bce_const(&p_fake, 0.0)?;
        d.backward(&c_fake, &g_fake)?;
        self.opt_d.step(&mut d.params_mut())?;

        model.generator.zero_grad();
        let (p, c) = d.forward(&fake, Mode::Train)?;
        let (l_gen, g) = bce_const(&p, 1.0)?;
        let dfake = d.backward_input(&c, &g)?;
        model.generator.backward(&g_cache, &dfake)?;
        self.opt_g.step(&mut model.generator.params_mut())?;
        Ok((l_gen, l_real + l_fake))
    }

    fn wgan_step(&mut self, model: &mut GanModel, x: &Matrix) -> Result<(f64, f64)> {
        let z = Matrix::randn(x.rows(), self.latent, &mut self.rng);
        let (fake, g_cache) = model.generator.forward(&z, Mode::Train)?;

        let d = &mut model.discriminator;
        d.zero_grad();
        let (s_real, c_real) = d.forward(x, Mode::Train)?;
        let (m_real, g_real) = mean_loss(&s_real);
        d.backward(&c_real, &g_real.scale(-1.0))?;
        let (s_fake, c_fake) = d.forward(&fake, Mode::Train)?;
        let (m_fake, g_fake) = mean_loss(&s_fake);
        d.backward(&c_fake, &g_fake)?;
        self.opt_d.step(&mut d.params_mut())?;
        d.clip_params(self.clip);
        let critic = m_fake - m_real;

        if self.iteration.is_multiple_of(self.n_critic) {
            model.generator.zero_grad();
            let (s, c) = d.forward(&fake, Mode::Train)?;
            let (m, g) = mean_loss(&s);
            let dfake = d.backward_input(&c, &g.scale(-1.0))?;
            model.generator.backward(&g_cache, &dfake)?;
            self.opt_g.step(&mut model.generator.params_mut())?;
            self.last_g = -m;
        } else {
            self.last_g = -mean_loss(&d.infer(&fake)?).0;
        }
        Ok((self.last_g, critic))
    }

    fn vaegan_step(&mut self, model: &mut GanModel, x: &Matrix) -> Result<(f64, f64)> {
        let GanModel {
            generator: decoder,
            discriminator: d,
            encoder,
            ..
        } = model;
        let enc = encoder
            .as_mut()
            .ok_or_else(|| Error::BadConfig("vaegan model without encoder".into()))?;

        let (h, c_trunk) = enc.trunk.forward(x, Mode::Train)?;
        let (mu, c_mu) = enc.mu.forward(&h, Mode::Train)?;
        let (logvar, c_lv) = enc.logvar.forward(&h, Mode::Train)?;
        let (z, eps) = reparameterize(&mu, &logvar, &mut self.rng)?;
        let (rec, c_dec) = decoder.forward(&z, Mode::Train)?;

        // prior draws are real codes, posterior draws are fake
        let prior = Matrix::randn(x.rows(), self.latent, &mut self.rng);
        d.zero_grad();
        let (p_real, c_real) = d.forward(&prior, Mode::Train)?;
        let (l_real, g_real) = bce_const(&p_real, 1.0)?;
        d.backward(&c_real, &g_real)?;
        let (p_fake, c_fake) = d.forward(&z, Mode::Train)?;
        let (l_fake, g_fake) = bce_const(&p_fake, 0.0)?;
        d.backward(&c_fake, &g_fake)?;
        self.opt_d.step(&mut d.params_mut())?;

        decoder.zero_grad();
        enc.trunk.zero_grad();
        enc.mu.zero_grad();
        enc.logvar.zero_grad();

        let (l1, g_l1) = l1_loss(&rec, x)?;
        let mut dz = decoder.backward(&c_dec, &g_l1.scale(self.lambda_l1))?;
        let (p, c) = d.forward(&z, Mode::Train)?;
        let (adv, g_adv) = bce_const(&p, 1.0)?;
        dz.add_assign(&d.backward_input(&c, &g_adv.scale(self.lambda_adv))?)?;

        let (mut dmu, mut dlv) = reparameterize_backward(&dz, &eps, &logvar)?;
        let (kl, dmu_kl, dlv_kl) = kl_loss(&mu, &logvar)?;
        dmu.add_assign(&dmu_kl.scale(self.lambda_kl))?;
        dlv.add_assign(&dlv_kl.scale(self.lambda_kl))?;

        let mut dh = enc.mu.backward(&c_mu, &dmu)?;
        dh.add_assign(&enc.logvar.backward(&c_lv, &dlv)?)?;
        enc.trunk.backward(&c_trunk, &dh)?;

        let mut params: Vec<&mut ParamTensor> = decoder.params_mut();
        params.extend(enc.trunk.params_mut());
        params.extend(enc.mu.params_mut());
        params.extend(enc.logvar.params_mut());
        self.opt_g.step(&mut params)?;

        let total = self.lambda_adv * adv + self.lambda_l1 * l1 + self.lambda_kl * kl;
        Ok((total, l_real + l_fake))
    }
}
