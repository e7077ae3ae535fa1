use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    /// No nonlinearity; the network collapses to a linear map.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and activation `a = apply(z)`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        })
    }
}

pub fn parameter_count(d: usize, n1: usize, n2: usize) -> usize {
    (d + 1) * n1 + (n1 + 1) * n2 + n2 + 1
}

/// Two hidden layers and a linear output unit.
///
/// Parameters live in one flat vector laid out as `W1` (`n1 x d`, row-major),
/// `b1`, `W2` (`n2 x n1`), `b2`, `w3` (`n2`), `b3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub n1: usize,
    pub n2: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// Inverted-dropout multipliers for a batch: each entry is 0 or `1/(1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMasks {
    pub hidden1: Vec<f64>,
    pub hidden2: Vec<f64>,
}

impl BatchMasks {
    pub fn ones(batch: usize, n1: usize, n2: usize) -> Self {
        Self { hidden1: vec![1.0; batch * n1], hidden2: vec![1.0; batch * n2] }
    }

    pub fn sample<R: Rng>(rng: &mut R, batch: usize, n1: usize, n2: usize, p: f64) -> Self {
        let keep = 1.0 / (1.0 - p);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect()
        };
        let hidden1 = draw(batch * n1);
        let hidden2 = draw(batch * n2);
        Self { hidden1, hidden2 }
    }
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

impl Network {
    pub fn zeros(input_dim: usize, n1: usize, n2: usize, activation: Activation) -> Self {
        Self { input_dim, n1, n2, activation, params: vec![0.0; parameter_count(input_dim, n1, n2)] }
    }

    /// Uniform fan-in initialization: He scaling for ReLU, Glorot for the
    /// saturating activations. Biases start at zero.
    pub fn init<R: Rng>(input_dim: usize, n1: usize, n2: usize, activation: Activation, rng: &mut R) -> Self {
        let mut net = Self::zeros(input_dim, n1, n2, activation);
        let o = net.offsets();
        let limit = |fan_in: usize, fan_out: usize| match activation {
            Activation::Relu => (6.0 / fan_in as f64).sqrt(),
            _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let layers = [(o.w1, o.b1, input_dim, n1), (o.w2, o.b2, n1, n2), (o.w3, o.b3, n2, 1)];
        for (start, end, fan_in, fan_out) in layers {
            let a = limit(fan_in, fan_out);
            for p in &mut net.params[start..end] {
                *p = rng.gen_range(-a..a);
            }
        }
        net
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> Offsets {
        let w1 = 0;
        let b1 = w1 + self.n1 * self.input_dim;
        let w2 = b1 + self.n1;
        let b2 = w2 + self.n2 * self.n1;
        let w3 = b2 + self.n2;
        let b3 = w3 + self.n2;
        Offsets { w1, b1, w2, b2, w3, b3 }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape { expected: self.input_dim, actual: x.len() });
        }
        Ok(())
    }

    /// Deterministic inference, no dropout.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut h1 = vec![0.0; self.n1];
        let mut h2 = vec![0.0; self.n2];
        Ok(self.forward_into(x, None, &mut h1, &mut h2, None))
    }

    /// Training-mode forward pass with the given dropout multipliers.
    pub fn forward_train(&self, x: &[f64], mask1: &[f64], mask2: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut h1 = vec![0.0; self.n1];
        let mut h2 = vec![0.0; self.n2];
        Ok(self.forward_into(x, Some((mask1, mask2)), &mut h1, &mut h2, None))
    }

    /// Writes masked activations into `h1`/`h2`; optionally keeps
    /// pre-activations in `z` (`n1 + n2`) for backpropagation.
    fn forward_into(
        &self,
        x: &[f64],
        masks: Option<(&[f64], &[f64])>,
        h1: &mut [f64],
        h2: &mut [f64],
        mut z: Option<&mut [f64]>,
    ) -> f64 {
        let o = self.offsets();
        let p = &self.params;
        let d = self.input_dim;
        for j in 0..self.n1 {
            let w = &p[o.w1 + j * d..o.w1 + (j + 1) * d];
            let s = p[o.b1 + j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if let Some(z) = z.as_deref_mut() {
                z[j] = s;
            }
            let mut a = self.activation.apply(s);
            if let Some((m1, _)) = masks {
                a *= m1[j];
            }
            h1[j] = a;
        }
        for j in 0..self.n2 {
            let w = &p[o.w2 + j * self.n1..o.w2 + (j + 1) * self.n1];
            let s = p[o.b2 + j] + w.iter().zip(h1.iter()).map(|(a, b)| a * b).sum::<f64>();
            if let Some(z) = z.as_deref_mut() {
                z[self.n1 + j] = s;
            }
            let mut a = self.activation.apply(s);
            if let Some((_, m2)) = masks {
                a *= m2[j];
            }
            h2[j] = a;
        }
        p[o.b3] + p[o.w3..o.w3 + self.n2].iter().zip(h2.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Batch-mean squared error over `rows` of `x` and its exact gradient,
    /// written into `grad` (overwritten). Masks, when given, hold one row per
    /// batch element.
    pub fn batch_gradient(
        &self,
        x: &Matrix,
        y: &[f64],
        rows: &[usize],
        masks: Option<&BatchMasks>,
        grad: &mut [f64],
    ) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::Range("empty batch".into()));
        }
        if x.cols() != self.input_dim {
            return Err(Error::Shape { expected: self.input_dim, actual: x.cols() });
        }
        if grad.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), actual: grad.len() });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (n1, n2, d) = (self.n1, self.n2, self.input_dim);
        let o = self.offsets();
        let p = &self.params;
        let mut h1 = vec![0.0; n1];
        let mut h2 = vec![0.0; n2];
        let mut z = vec![0.0; n1 + n2];
        let mut d2 = vec![0.0; n2];
        let mut d1 = vec![0.0; n1];
        let scale = 2.0 / rows.len() as f64;
        let mut loss = 0.0;
        for (b, &r) in rows.iter().enumerate() {
            let xr = x.row(r);
            let m = masks.map(|m| (&m.hidden1[b * n1..(b + 1) * n1], &m.hidden2[b * n2..(b + 1) * n2]));
            let out = self.forward_into(xr, m, &mut h1, &mut h2, Some(&mut z));
            let err = out - y[r];
            loss += err * err;
            let delta = scale * err;

            grad[o.b3] += delta;
            for j in 0..n2 {
                grad[o.w3 + j] += delta * h2[j];
                let zj = z[n1 + j];
                let mask = m.map_or(1.0, |(_, m2)| m2[j]);
                d2[j] = delta * p[o.w3 + j] * mask * self.activation.derivative(zj, self.activation.apply(zj));
            }
            d1.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n2 {
                let dj = d2[j];
                if dj == 0.0 {
                    continue;
                }
                grad[o.b2 + j] += dj;
                let row = o.w2 + j * n1;
                let w = &p[row..row + n1];
                let g = &mut grad[row..row + n1];
                for k in 0..n1 {
                    g[k] += dj * h1[k];
                    d1[k] += dj * w[k];
                }
            }
            for k in 0..n1 {
                let zk = z[k];
                let mask = m.map_or(1.0, |(m1, _)| m1[k]);
                let dk = d1[k] * mask * self.activation.derivative(zk, self.activation.apply(zk));
                if dk == 0.0 {
                    continue;
                }
                grad[o.b1 + k] += dk;
                let g = &mut grad[o.w1 + k * d..o.w1 + (k + 1) * d];
                for (gi, xi) in g.iter_mut().zip(xr) {
                    *gi += dk * xi;
                }
            }
        }
        Ok(loss / rows.len() as f64)
    }

    /// Mean squared error in inference mode.
    pub fn mse(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::Range("no rows to evaluate".into()));
        }
        if x.cols() != self.input_dim {
            return Err(Error::Shape { expected: self.input_dim, actual: x.cols() });
        }
        let mut h1 = vec![0.0; self.n1];
        let mut h2 = vec![0.0; self.n2];
        let sse: f64 = rows
            .iter()
            .map(|&r| {
                let e = self.forward_into(x.row(r), None, &mut h1, &mut h2, None) - y[r];
                e * e
            })
            .sum();
        Ok(sse / rows.len() as f64)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape { expected: self.input_dim, actual: x.cols() });
        }
        let mut h1 = vec![0.0; self.n1];
        let mut h2 = vec![0.0; self.n2];
        Ok((0..x.rows()).map(|r| self.forward_into(x.row(r), None, &mut h1, &mut h2, None)).collect())
    }
}
