//! Independent oracles shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redispatch::eval::{wilcoxon_signed_rank, WilcoxonMode};
use redispatch::features::Matrix;
use redispatch::mlp::{Activation, BatchMasks, Network};

/// Layout: W1 (n1 x d), b1, W2 (n2 x n1), b2, w3, b3. Returns the output and
/// the smallest |pre-activation| seen.
pub fn oracle_forward(net: &Network, p: &[f64], x: &[f64], m1: &[f64], m2: &[f64]) -> (f64, f64) {
    let (d, n1, n2) = (net.input_dim, net.n1, net.n2);
    let act = |z: f64| match net.activation {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Identity => z,
    };
    let (w1, b1) = (0, n1 * d);
    let (w2, b2) = (b1 + n1, b1 + n1 + n2 * n1);
    let (w3, b3) = (b2 + n2, b2 + 2 * n2);
    let mut closest = f64::INFINITY;
    let h1: Vec<f64> = (0..n1)
        .map(|k| {
            let z = p[b1 + k] + (0..d).map(|i| p[w1 + k * d + i] * x[i]).sum::<f64>();
            closest = closest.min(z.abs());
            act(z) * m1[k]
        })
        .collect();
    let h2: Vec<f64> = (0..n2)
        .map(|j| {
            let z = p[b2 + j] + (0..n1).map(|k| p[w2 + j * n1 + k] * h1[k]).sum::<f64>();
            closest = closest.min(z.abs());
            act(z) * m2[j]
        })
        .collect();
    (p[b3] + (0..n2).map(|j| p[w3 + j] * h2[j]).sum::<f64>(), closest)
}

pub fn oracle_loss(net: &Network, p: &[f64], x: &Matrix, y: &[f64], masks: &BatchMasks) -> (f64, f64) {
    let (n1, n2) = (net.n1, net.n2);
    let mut closest = f64::INFINITY;
    let mut sse = 0.0;
    for r in 0..x.rows() {
        let (out, c) = oracle_forward(net, p, x.row(r), &masks.hidden1[r * n1..(r + 1) * n1], &masks.hidden2[r * n2..(r + 1) * n2]);
        closest = closest.min(c);
        sse += (out - y[r]).powi(2);
    }
    (sse / x.rows() as f64, closest)
}

pub struct GradientCheck {
    /// Networks compared per activation: relu, tanh, sigmoid.
    pub checked: [usize; 3],
    pub worst: f64,
}

/// Compares backpropagation with central differences on random networks
/// (d <= 5, n1, n2 <= 4) with and without dropout masks.
pub fn gradient_check(trials: usize, seed: u64) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fourth-order central stencil: truncation and rounding both stay far
    // below the tolerance. Entries at rounding level of the loss are compared
    // against that floor instead of their own size.
    let h = 1e-3;
    let mut checked = [0usize; 3];
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let activation = [Activation::Relu, Activation::Tanh, Activation::Sigmoid][trial % 3];
        let (d, n1, n2) = (rng.gen_range(1..=5), rng.gen_range(1..=4), rng.gen_range(1..=4));
        let batch = rng.gen_range(1..=6);
        let mut net = Network::init(d, n1, n2, activation, &mut rng);
        for v in &mut net.params {
            *v += rng.gen_range(-0.3..0.3);
        }
        let x = Matrix::from_vec(batch, d, (0..batch * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let y: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let masks = if rng.gen_bool(0.5) {
            BatchMasks::sample(&mut rng, batch, n1, n2, 0.3)
        } else {
            BatchMasks::ones(batch, n1, n2)
        };
        let (loss0, closest) = oracle_loss(&net, &net.params, &x, &y, &masks);
        // Finite differences are meaningless across a ReLU kink.
        if activation == Activation::Relu && closest < 1e-2 {
            continue;
        }
        let rows: Vec<usize> = (0..batch).collect();
        let mut grad = vec![0.0; net.parameter_count()];
        let loss = net.batch_gradient(&x, &y, &rows, Some(&masks), &mut grad).unwrap();
        worst = worst.max((loss - loss0).abs() / loss0.max(1.0));

        let mut p = net.params.clone();
        for i in 0..p.len() {
            let orig = p[i];
            let mut at = |t: f64| {
                p[i] = orig + t;
                oracle_loss(&net, &p, &x, &y, &masks).0
            };
            let numeric = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            p[i] = orig;
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6 * (1.0 + loss0));
            worst = worst.max(rel);
        }
        checked[trial % 3] += 1;
    }
    GradientCheck { checked, worst }
}

/// Intercept first, then slopes, from (A'A)^-1 A'y with A = [1 X].
pub fn normal_equations(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let (n, p) = (x.rows(), x.cols());
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let yv = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let beta = ata.try_inverse().expect("well conditioned") * a.transpose() * yv;
    beta.iter().copied().collect()
}

pub fn random_system(rng: &mut ChaCha8Rng) -> (Matrix, Vec<f64>) {
    let p = rng.gen_range(1..=8);
    let n = rng.gen_range(p + 10..=60);
    let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
    let y = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    (x, y)
}

/// Two-sided exact p for tie-free data: counts of subsets of 1..=n by sum.
pub fn dp_exact_p(n: usize, w: f64) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let centre = max as f64 / 2.0;
    let dev = (w - centre).abs();
    let extreme: u64 = (0..=max).filter(|&s| (s as f64 - centre).abs() >= dev - 1e-9).map(|s| counts[s]).sum();
    extreme as f64 / 2f64.powi(n as i32)
}

/// Largest |exact - asymptotic| over random tie-free samples with n in 8..=12,
/// after checking exact enumeration against the rank-sum distribution.
pub fn wilcoxon_gap(samples_per_n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for n in 8..=12 {
        for _ in 0..samples_per_n {
            let shift = rng.gen_range(-1.0..1.0);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0) + shift).collect();
            let b = vec![0.0; n];
            let exact = wilcoxon_signed_rank(&a, &b, WilcoxonMode::Exact).unwrap();
            let approx = wilcoxon_signed_rank(&a, &b, WilcoxonMode::Asymptotic).unwrap();
            let oracle = dp_exact_p(n, exact.w);
            assert!((exact.p_value - oracle).abs() < 1e-12, "n={n}: {} vs {oracle}", exact.p_value);
            worst = worst.max((exact.p_value - approx.p_value).abs());
        }
    }
    worst
}
