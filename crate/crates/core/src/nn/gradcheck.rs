//! Central finite-difference checks of the analytic gradients.
//!
//! Every check draws a random configuration, computes the analytic gradient
//! and compares it with `(f(x + h) - f(x - h)) / 2h` entry by entry. The
//! reported error is norm-wise per tensor,
//! `||analytic - numeric|| / max(||analytic||, ||numeric||)`, and the worst
//! tensor wins. A tensor whose true gradient vanishes (an FC bias feeding
//! BatchNorm) has both norms at round-off level; there the absolute
//! difference is reported instead.

use super::layers::{LayerSpec, Mode, Network};
use super::loss::{bce_loss, l1_loss, mean_loss, softmax_ce_loss};
use super::tensor::Matrix;
use super::vae::{kl_loss, reparameterize_backward};
use crate::error::Result;
use crate::rng::Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
const NEGLIGIBLE: f64 = 1e-7;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    /// Worst norm-wise relative error over the checked tensors.
    pub max_rel_error: f64,
    /// Number of scalar entries compared.
    pub entries: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < NEGLIGIBLE {
        return norm(&diff);
    }
    norm(&diff) / scale
}

/// Numeric gradient of `f` at `x`, perturbing one entry at a time.
fn numeric_grad(x: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(x)?;
        x[i] = orig - h;
        let minus = f(x)?;
        x[i] = orig;
        g.push((plus - minus) / (2.0 * h));
    }
    Ok(g)
}

/// Pushes entries away from the kinks of ReLU, LeakyReLU and L1.
fn away_from_zero(v: f64) -> f64 {
    if v.abs() < 0.05 {
        if v < 0.0 {
            v - 0.05
        } else {
            v + 0.05
        }
    } else {
        v
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::randn(rows, cols, rng)
}

fn weighted_sum(y: &Matrix, r: &Matrix) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Checks a network on the scalar `sum(R * net(x))` for a fixed random `R`,
/// differentiating with respect to the input and every parameter. Parameters
/// are redrawn from N(0, 1) so the check is not dominated by tiny weights.
pub fn check_network(name: &str, specs: &[LayerSpec], batch: usize, rng: &mut Rng) -> Result<GradCheck> {
    let mut net = Network::new(specs, rng)?;
    for p in net.params_mut() {
        for v in p.value.iter_mut() {
            *v = rng.normal();
        }
    }
    let in_dim = net.input_dim().unwrap_or(1);
    let out_dim = net.output_dim().unwrap_or(in_dim);
    let mut x = random_matrix(batch, in_dim, rng);
    x.data_mut().iter_mut().for_each(|v| *v = away_from_zero(*v));
    let r = random_matrix(batch, out_dim, rng);

    net.zero_grad();
    let (_, cache) = net.forward(&x, Mode::Train)?;
    let dx = net.backward(&cache, &r)?;
    let analytic_params: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();

    let mut worst = 0.0f64;
    let mut entries = 0;

    let mut probe = net.clone();
    let mut xv = x.data().to_vec();
    let numeric_x = numeric_grad(&mut xv, STEP, |v| {
        let xm = Matrix::from_vec(batch, in_dim, v.to_vec())?;
        Ok(weighted_sum(&probe.forward(&xm, Mode::Train)?.0, &r))
    })?;
    worst = worst.max(rel_error(dx.data(), &numeric_x));
    entries += numeric_x.len();

    for (k, analytic) in analytic_params.iter().enumerate() {
        let mut values = net.params()[k].value.clone();
        let mut probe = net.clone();
        let numeric = numeric_grad(&mut values, STEP, |v| {
            probe.params_mut()[k].value.copy_from_slice(v);
            Ok(weighted_sum(&probe.forward(&x, Mode::Train)?.0, &r))
        })?;
        worst = worst.max(rel_error(analytic, &numeric));
        entries += numeric.len();
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: worst,
        entries,
    })
}

fn check_loss(
    name: &str,
    x: &Matrix,
    analytic: &Matrix,
    f: impl Fn(&Matrix) -> Result<f64>,
) -> Result<GradCheck> {
    let (rows, cols) = x.shape();
    let mut v = x.data().to_vec();
    let numeric = numeric_grad(&mut v, STEP, |v| f(&Matrix::from_vec(rows, cols, v.to_vec())?))?;
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: rel_error(analytic.data(), &numeric),
        entries: numeric.len(),
    })
}

/// The layer kinds and losses covered by [`check_random`].
pub const CHECKS: [&str; 12] = [
    "fully_connected",
    "leaky_relu",
    "relu",
    "tanh",
    "sigmoid",
    "batch_norm",
    "bce",
    "l1",
    "softmax_ce",
    "mean",
    "kl",
    "reparameterize",
];

/// One random configuration of the named check.
pub fn check_random(name: &str, rng: &mut Rng) -> Result<GradCheck> {
    let batch = 2 + rng.below(5);
    let width = 1 + rng.below(7);
    let out = 1 + rng.below(7);
    match name {
        "fully_connected" => check_network(name, &[LayerSpec::fc(width, out)], batch, rng),
        "leaky_relu" => {
            let slope = rng.uniform_range(0.01, 0.5);
            check_network(name, &[LayerSpec::leaky(slope)], batch, rng)
        }
        "relu" => check_network(name, &[LayerSpec::Relu], batch, rng),
        "tanh" => check_network(name, &[LayerSpec::Tanh], batch, rng),
        "sigmoid" => check_network(name, &[LayerSpec::Sigmoid], batch, rng),
        // With two rows each normalized feature is +-1 up to epsilon, the
        // true input gradient is of order epsilon and the difference
        // quotient measures round-off; three or more rows keep it O(1).
        "batch_norm" => check_network(
            name,
            &[LayerSpec::fc(width, out), LayerSpec::batch_norm(out)],
            batch + 1,
            rng,
        ),
        "bce" => {
            let p = random_matrix(batch, out, rng).map(|v| 0.05 + 0.9 * super::layers::sigmoid(v));
            let y = Matrix::from_vec(
                batch,
                out,
                (0..batch * out).map(|_| rng.uniform()).collect(),
            )?;
            let (_, g) = bce_loss(&p, &y)?;
            check_loss(name, &p, &g, |m| Ok(bce_loss(m, &y)?.0))
        }
        "l1" => {
            let a = random_matrix(batch, out, rng);
            let b = a.zip_map(&random_matrix(batch, out, rng), |x, d| x + away_from_zero(d))?;
            let (_, g) = l1_loss(&a, &b)?;
            check_loss(name, &a, &g, |m| Ok(l1_loss(m, &b)?.0))
        }
        "softmax_ce" => {
            let classes = 2 + rng.below(4);
            let logits = random_matrix(batch, classes, rng).scale(2.0);
            let labels: Vec<usize> = (0..batch).map(|_| rng.below(classes)).collect();
            let (_, g) = softmax_ce_loss(&logits, &labels)?;
            check_loss(name, &logits, &g, |m| Ok(softmax_ce_loss(m, &labels)?.0))
        }
        "mean" => {
            let x = random_matrix(batch, out, rng);
            let (_, g) = mean_loss(&x);
            check_loss(name, &x, &g, |m| Ok(mean_loss(m).0))
        }
        "kl" => {
            let mu = random_matrix(batch, out, rng);
            let logvar = random_matrix(batch, out, rng);
            let (_, dmu, dlv) = kl_loss(&mu, &logvar)?;
            let a = check_loss("kl", &mu, &dmu, |m| Ok(kl_loss(m, &logvar)?.0))?;
            let b = check_loss("kl", &logvar, &dlv, |m| Ok(kl_loss(&mu, m)?.0))?;
            Ok(GradCheck {
                name: name.to_string(),
                max_rel_error: a.max_rel_error.max(b.max_rel_error),
                entries: a.entries + b.entries,
            })
        }
        "reparameterize" => {
            // f = sum(R * (mu + exp(logvar / 2) * eps)) with eps held fixed
            let mu = random_matrix(batch, out, rng);
            let logvar = random_matrix(batch, out, rng);
            let eps = random_matrix(batch, out, rng);
            let r = random_matrix(batch, out, rng);
            let z = |mu: &Matrix, lv: &Matrix| -> Result<f64> {
                let std = lv.map(|v| (0.5 * v).exp());
                let noise = std.zip_map(&eps, |s, e| s * e)?;
                let z = mu.zip_map(&noise, |m, n| m + n)?;
                Ok(weighted_sum(&z, &r))
            };
            let (dmu, dlv) = reparameterize_backward(&r, &eps, &logvar)?;
            let a = check_loss(name, &mu, &dmu, |m| z(m, &logvar))?;
            let b = check_loss(name, &logvar, &dlv, |m| z(&mu, m))?;
            Ok(GradCheck {
                name: name.to_string(),
                max_rel_error: a.max_rel_error.max(b.max_rel_error),
                entries: a.entries + b.entries,
            })
        }
        other => Err(crate::error::Error::InvalidInputs(format!("unknown gradient check {other}"))),
    }
}

/// `configs` random configurations of every entry in [`CHECKS`], reporting
/// the worst configuration per check.
pub fn run_suite(configs: usize, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    CHECKS
        .iter()
        .map(|name| {
            let mut worst = GradCheck {
                name: name.to_string(),
                max_rel_error: 0.0,
                entries: 0,
            };
            for _ in 0..configs {
                let c = check_random(name, &mut rng)?;
                worst.entries += c.entries;
                worst.max_rel_error = worst.max_rel_error.max(c.max_rel_error);
            }
            Ok(worst)
        })
        .collect()
}
