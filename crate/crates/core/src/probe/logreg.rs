use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::check_samples;
use crate::error::{Error, Result};

/// Gradient-norm stopping tolerance.
pub const TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;

/// Multinomial logistic regression head.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeModel {
    pub class_order: Vec<u32>,
    pub lambda: f64,
    pub channels: usize,
    /// `channels x classes`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Objective after every accepted step, starting at the initial point.
    pub objective_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    class_order: Vec<u32>,
    lambda: f64,
    channels: usize,
    weights: String,
    bias: Vec<f32>,
}

impl ProbeModel {
    pub fn num_classes(&self) -> usize {
        self.class_order.len()
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.channels {
            return Err(Error::InvalidInput(format!(
                "expected {} features, found {}",
                self.channels,
                x.len()
            )));
        }
        let k = self.num_classes();
        let mut z = self.bias.clone();
        for (j, &v) in x.iter().enumerate() {
            for (zc, w) in z.iter_mut().zip(&self.weights[j * k..(j + 1) * k]) {
                *zc += v * w;
            }
        }
        Ok(z)
    }

    /// Class probabilities in `class_order`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    /// Most probable class; ties go to the earlier class in `class_order`.
    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        Ok(self.class_order[best])
    }

    /// JSON with weights as base64 little-endian f32.
    pub fn to_json(&self) -> String {
        let bytes: Vec<u8> = self
            .weights
            .iter()
            .flat_map(|&w| (w as f32).to_le_bytes())
            .collect();
        let file = ModelFile {
            class_order: self.class_order.clone(),
            lambda: self.lambda,
            channels: self.channels,
            weights: STANDARD.encode(bytes),
            bias: self.bias.iter().map(|&b| b as f32).collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
        let bytes = STANDARD
            .decode(file.weights)
            .map_err(|e| Error::Format(format!("model weights: {e}")))?;
        let k = file.class_order.len();
        if bytes.len() != 4 * k * file.channels || file.bias.len() != k {
            return Err(Error::Format(
                "model parameter sizes do not match class order and channels".into(),
            ));
        }
        let weights = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Self {
            class_order: file.class_order,
            lambda: file.lambda,
            channels: file.channels,
            weights,
            bias: file.bias.into_iter().map(f64::from).collect(),
        })
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean cross-entropy plus `lambda / 2 * |W|^2` and its gradient.
///
/// `params` holds W (`d x k`, row-major) followed by the k biases; `y`
/// holds class indices in `0..k`.
pub fn objective_and_gradient(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    lambda: f64,
    params: &[f64],
) -> (f64, Vec<f64>) {
    let d = x[0].len();
    let (w, b) = params.split_at(d * k);
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; k];
    for (xi, &yi) in x.iter().zip(y) {
        z.copy_from_slice(b);
        for (j, &v) in xi.iter().enumerate() {
            for (zc, wc) in z.iter_mut().zip(&w[j * k..(j + 1) * k]) {
                *zc += v * wc;
            }
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[yi];
        // residual p - onehot
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = (*zc - lse).exp() - if c == yi { 1.0 } else { 0.0 };
        }
        for (j, &v) in xi.iter().enumerate() {
            for (g, r) in grad[j * k..(j + 1) * k].iter_mut().zip(&z) {
                *g += v * r;
            }
        }
        for (g, r) in grad[d * k..].iter_mut().zip(&z) {
            *g += r;
        }
    }
    let n = x.len() as f64;
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    let mut reg = 0.0;
    for (g, &wv) in grad[..d * k].iter_mut().zip(w) {
        *g += lambda * wv;
        reg += wv * wv;
    }
    (loss + 0.5 * lambda * reg, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the probe by L-BFGS with backtracking line search from zero.
pub fn fit_logreg(x: &[Vec<f64>], y: &[u32], lambda: f64) -> Result<(ProbeModel, FitReport)> {
    let d = check_samples(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidInput(
            "at least two classes are required".into(),
        ));
    }
    let k = classes.len();
    let yi: Vec<usize> = y
        .iter()
        .map(|c| classes.binary_search(c).unwrap())
        .collect();

    let mut params = vec![0.0; d * k + k];
    let (mut f, mut g) = objective_and_gradient(x, &yi, k, lambda, &params);
    let mut history = vec![f];
    let mut pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut iterations = 0;
    let mut gnorm = dot(&g, &g).sqrt();

    while gnorm > TOLERANCE && iterations < MAX_ITERATIONS {
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, yv, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = pairs
            .back()
            .map_or(1.0 / gnorm.max(1.0), |(s, yv, _)| dot(s, yv) / dot(yv, yv));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, yv, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(yv, &q);
            q.iter_mut()
                .zip(s)
                .for_each(|(qi, si)| *qi += (a - beta) * si);
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope.is_nan() || slope >= 0.0 {
            pairs.clear();
            dir = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
            slope = dot(&dir, &g);
        }

        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            let (ft, gt) = objective_and_gradient(x, &yi, k, lambda, &trial);
            if ft.is_finite() && ft <= f + ARMIJO * step * slope && ft < f {
                break Some((trial, ft, gt));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((trial, ft, gt)) = accepted else {
            break;
        };

        let s: Vec<f64> = trial.iter().zip(&params).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == HISTORY {
                pairs.pop_front();
            }
            pairs.push_back((s, yv, 1.0 / sy));
        }
        params = trial;
        f = ft;
        g = gt;
        gnorm = dot(&g, &g).sqrt();
        history.push(f);
        iterations += 1;
    }

    let (w, b) = params.split_at(d * k);
    Ok((
        ProbeModel {
            class_order: classes,
            lambda,
            channels: d,
            weights: w.to_vec(),
            bias: b.to_vec(),
        },
        FitReport {
            iterations,
            converged: gnorm <= TOLERANCE,
            gradient_norm: gnorm,
            objective_history: history,
        },
    ))
}
