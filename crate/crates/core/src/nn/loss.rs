use super::tensor::Matrix;
use crate::error::{Error, Result};

/// Distance kept between a probability and 0 or 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over all elements and its gradient with respect
/// to the probabilities. Probabilities are clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    pred.expect_shape(target.shape())?;
    let n = pred.data().len().max(1) as f64;
    let loss: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    let grad = pred.zip_map(target, |p, y| {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        (p - y) / (p * (1.0 - p)) / n
    })?;
    Ok((loss / n, grad))
}

/// [`bce_loss`] against a constant target (all ones or all zeros).
pub fn bce_const(pred: &Matrix, target: f64) -> Result<(f64, Matrix)> {
    bce_loss(pred, &Matrix::filled(pred.rows(), pred.cols(), target))
}

/// Mean absolute difference and its subgradient with respect to `a`
/// (zero where the entries tie).
pub fn l1_loss(a: &Matrix, b: &Matrix) -> Result<(f64, Matrix)> {
    a.expect_shape(b.shape())?;
    let n = a.data().len().max(1) as f64;
    let loss: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    let grad = a.zip_map(b, |x, y| {
        let d = x - y;
        if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        }
    })?;
    Ok((loss / n, grad))
}

/// Mean softmax cross-entropy over rows, stabilized with log-sum-exp.
/// Returns the gradient with respect to the logits.
pub fn softmax_ce_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            logits.rows()
        )));
    }
    let classes = logits.cols();
    let n = logits.rows().max(1) as f64;
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::BadLabel { label, classes });
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[label];
        let g = grad.row_mut(i);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (row[k] - lse).exp() / n;
        }
        g[label] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}

/// Mean of all entries with gradient `1/n`; the critic terms of the
/// Wasserstein objective.
pub fn mean_loss(x: &Matrix) -> (f64, Matrix) {
    let n = x.data().len().max(1) as f64;
    let loss = x.data().iter().sum::<f64>() / n;
    (loss, Matrix::filled(x.rows(), x.cols(), 1.0 / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn bce_examples() {
        let (l, _) = bce_const(&m(&[&[0.5]]), 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = bce_const(&m(&[&[1.0]]), 1.0).unwrap();
        assert!((0.0..1e-6).contains(&l));
        let (l, _) = bce_const(&m(&[&[0.0]]), 1.0).unwrap();
        assert!(l.is_finite());
    }

    #[test]
    fn l1_examples() {
        let (l, _) = l1_loss(&m(&[&[1.0, 2.0]]), &m(&[&[1.0, 2.0]])).unwrap();
        assert_eq!(l, 0.0);
        let (l, _) = l1_loss(&m(&[&[1.0]]), &m(&[&[3.0]])).unwrap();
        assert_eq!(l, 2.0);
        let (_, g) = l1_loss(&m(&[&[1.0, 5.0, 2.0]]), &m(&[&[3.0, 1.0, 2.0]])).unwrap();
        assert!(g.get(0, 0) < 0.0 && g.get(0, 1) > 0.0 && g.get(0, 2) == 0.0);
        assert!(l1_loss(&m(&[&[1.0]]), &m(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn softmax_examples() {
        let (l, _) = softmax_ce_loss(&m(&[&[0.3, 0.3]]), &[1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = softmax_ce_loss(&m(&[&[50.0, -50.0]]), &[0]).unwrap();
        assert!(l < 1e-12);
        assert!(matches!(
            softmax_ce_loss(&m(&[&[0.0, 0.0]]), &[2]),
            Err(Error::BadLabel { label: 2, classes: 2 })
        ));
    }
}
