use super::tensor::ParamTensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam. Moment buffers are created on the first step and
/// must keep the same shapes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon: 1e-8,
            t: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// Applies one update to `params` from their accumulated gradients.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len()
            || params
                .iter()
                .zip(&self.first_moment)
                .any(|(p, m)| p.len() != m.len())
        {
            return Err(Error::ShapeMismatch(
                "parameter set changed between Adam steps".into(),
            ));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let ParamTensor { value, grad, .. } = &mut **p;
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                value[i] -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Single-tensor convenience wrapper around [`AdamState::step`].
pub fn adam_step(param: &mut ParamTensor, state: &mut AdamState) -> Result<()> {
    state.step(&mut [param])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        let mut p = ParamTensor::from_values(1, 1, vec![0.0]);
        p.grad = vec![1.0];
        let mut s = AdamState::new(0.0002, 0.5, 0.999);
        adam_step(&mut p, &mut s).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        assert!((p.value[0] + 0.0002 / (1.0 + 1e-8)).abs() < 1e-18);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_no_move() {
        let mut p = ParamTensor::from_values(2, 2, vec![0.1, -0.2, 0.3, 0.4]);
        let before = p.value.clone();
        let mut s = AdamState::new(0.001, 0.5, 0.999);
        adam_step(&mut p, &mut s).unwrap();
        assert_eq!(p.value, before);
    }

    #[test]
    fn zero_lr_no_move() {
        let mut p = ParamTensor::from_values(1, 3, vec![0.1, -0.2, 0.3]);
        p.grad = vec![5.0, -1.0, 0.5];
        let before = p.value.clone();
        let mut s = AdamState::new(0.0, 0.5, 0.999);
        for _ in 0..10 {
            adam_step(&mut p, &mut s).unwrap();
        }
        assert_eq!(p.value, before);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut p = ParamTensor::from_values(1, 2, vec![1.0, -1.0]);
            let mut s = AdamState::new(0.01, 0.5, 0.999);
            for k in 0..50 {
                p.grad = p.value.iter().map(|v| 2.0 * v + k as f64 * 1e-3).collect();
                adam_step(&mut p, &mut s).unwrap();
            }
            p.value
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shape_change_rejected() {
        let mut a = ParamTensor::zeros(1, 2);
        let mut s = AdamState::new(0.1, 0.5, 0.999);
        adam_step(&mut a, &mut s).unwrap();
        let mut b = ParamTensor::zeros(1, 3);
        assert!(matches!(adam_step(&mut b, &mut s), Err(Error::ShapeMismatch(_))));
    }
}
