use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RMSProp: `s <- decay*s + (1-decay)*g^2`, `theta <- theta - lr*g/(sqrt(s) + eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Running mean of squared gradients, one entry per parameter.
    pub state: Vec<f64>,
}

impl RmsProp {
    pub fn new(n_params: usize, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self { learning_rate, decay, epsilon, state: vec![0.0; n_params] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        rmsprop_step(params, grads, &mut self.state, self.learning_rate, self.decay, self.epsilon)
    }
}

pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut [f64], lr: f64, decay: f64, epsilon: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape { expected: params.len(), actual: grads.len() });
    }
    if state.len() != grads.len() {
        return Err(Error::Shape { expected: grads.len(), actual: state.len() });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient {} at parameter {i}", grads[i])));
    }
    for ((p, g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        *s = decay * *s + (1.0 - decay) * g * g;
        let denom = s.sqrt() + epsilon;
        if denom > 0.0 {
            *p -= lr * g / denom;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays_state() {
        let mut p = vec![1.0, -2.0];
        let mut s = vec![0.5, 2.0];
        rmsprop_step(&mut p, &[0.0, 0.0], &mut s, 0.01, 0.9, 1e-7).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert!((s[0] - 0.45).abs() < 1e-15 && (s[1] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn first_step_by_hand() {
        let mut p = vec![0.0];
        let mut s = vec![0.0];
        rmsprop_step(&mut p, &[1.0], &mut s, 0.01, 0.9, 0.0).unwrap();
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert!((p[0] + 0.031_622_776_601_683_79).abs() < 1e-12);
    }

    #[test]
    fn constant_gradient_step_tends_to_learning_rate() {
        let mut opt = RmsProp::new(1, 0.01, 0.9, 1e-7);
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..500 {
            let before = p[0];
            opt.step(&mut p, &[-3.0]).unwrap();
            last = p[0] - before;
        }
        assert!((last - 0.01).abs() < 1e-8, "step {last}");
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![0.0];
        let mut s = vec![0.0];
        assert!(matches!(rmsprop_step(&mut p, &[f64::NAN], &mut s, 0.01, 0.9, 1e-7), Err(Error::Numeric(_))));
    }
}
