//! Gaussian latent helpers for the variational encoder.

use super::tensor::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, 1)`. Returns `z` and
/// the noise so the caller can differentiate through the draw.
pub fn reparameterize(mu: &Matrix, logvar: &Matrix, rng: &mut Rng) -> Result<(Matrix, Matrix)> {
    mu.expect_shape(logvar.shape())?;
    let eps = Matrix::randn(mu.rows(), mu.cols(), rng);
    let z = Matrix::from_vec(
        mu.rows(),
        mu.cols(),
        mu.data()
            .iter()
            .zip(logvar.data())
            .zip(eps.data())
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect(),
    )?;
    Ok((z, eps))
}

/// Gradients of `z` with respect to `mu` and `logvar`, given `d loss / dz`.
pub fn reparameterize_backward(dz: &Matrix, eps: &Matrix, logvar: &Matrix) -> Result<(Matrix, Matrix)> {
    dz.expect_shape(eps.shape())?;
    dz.expect_shape(logvar.shape())?;
    let dlogvar = Matrix::from_vec(
        dz.rows(),
        dz.cols(),
        dz.data()
            .iter()
            .zip(eps.data())
            .zip(logvar.data())
            .map(|((g, e), lv)| g * e * 0.5 * (0.5 * lv).exp())
            .collect(),
    )?;
    Ok((dz.clone(), dlogvar))
}

/// Closed-form `KL(N(mu, exp(logvar)) || N(0, 1))` summed over dimensions.
pub fn kl_divergence_gaussian(mu: &[f64], logvar: &[f64]) -> Result<f64> {
    if mu.len() != logvar.len() {
        return Err(Error::ShapeMismatch(format!(
            "mu has {} entries, logvar {}",
            mu.len(),
            logvar.len()
        )));
    }
    Ok(0.5
        * mu.iter()
            .zip(logvar)
            .map(|(m, lv)| m * m + lv.exp() - lv - 1.0)
            .sum::<f64>())
}

/// Batch mean of the per-row KL divergence and its gradients with respect
/// to `mu` and `logvar`.
pub fn kl_loss(mu: &Matrix, logvar: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    mu.expect_shape(logvar.shape())?;
    let n = mu.rows().max(1) as f64;
    let mut loss = 0.0;
    for i in 0..mu.rows() {
        loss += kl_divergence_gaussian(mu.row(i), logvar.row(i))?;
    }
    let dmu = mu.scale(1.0 / n);
    let dlogvar = logvar.map(|lv| 0.5 * (lv.exp() - 1.0) / n);
    Ok((loss / n, dmu, dlogvar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence_gaussian(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(kl_divergence_gaussian(&[1.0], &[0.0]).unwrap(), 0.5);
        assert!(kl_divergence_gaussian(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn tiny_variance_returns_mean() {
        let mu = Matrix::from_rows(&[[0.3, -1.2]]).unwrap();
        let lv = Matrix::filled(1, 2, -50.0);
        let (z, _) = reparameterize(&mu, &lv, &mut Rng::new(1)).unwrap();
        for (a, b) in z.data().iter().zip(mu.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_wrt_mu_is_identity() {
        let dz = Matrix::from_rows(&[[0.5, -2.0]]).unwrap();
        let eps = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let lv = Matrix::zeros(1, 2);
        let (dmu, _) = reparameterize_backward(&dz, &eps, &lv).unwrap();
        assert_eq!(dmu, dz);
    }
}
