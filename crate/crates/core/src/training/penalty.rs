//! Gradient penalties on the critic's input gradient.
//!
//! The penalty `λ · mean_i (‖∇ₓD(x̂ᵢ)‖ - 1)²` depends on first derivatives,
//! so its parameter gradient is second order. With `gᵢ = ∇ₓD(x̂ᵢ)`,
//! `vᵢ = gᵢ / ‖gᵢ‖` and `cᵢ = 2(‖gᵢ‖ - 1)`:
//!
//! ```text
//! ∂P/∂θ = (λ/B) Σᵢ cᵢ · vᵢᵀ ∂gᵢ/∂θ
//!       ≈ (λ/B) Σᵢ cᵢ · (∇θD(x̂ᵢ + h·vᵢ) - ∇θD(x̂ᵢ - h·vᵢ)) / 2h
//! ```
//!
//! Each side is one backward pass of `Σᵢ cᵢ D(x̂ᵢ ± h·vᵢ)`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Mode, Module, Param, RngState, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::Discriminator;

/// Finite-difference step along the input-gradient direction.
pub const PENALTY_FD_STEP: f64 = 1e-4;

/// A differentiable map from a batch `[B, ...]` to one value per sample.
pub trait Critic {
    fn score(&self, g: &mut Graph, x: Var) -> Result<Var>;
    fn module(&self) -> &dyn Module;
}

/// Discriminator as critic: raw scores, or sigmoid probabilities.
pub struct DiscriminatorCritic<'a> {
    pub disc: &'a Discriminator,
    pub probability: bool,
}

impl Critic for DiscriminatorCritic<'_> {
    fn score(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let z = self.disc.logits(g, x)?;
        if self.probability {
            g.sigmoid(z)
        } else {
            Ok(z)
        }
    }

    fn module(&self) -> &dyn Module {
        self.disc
    }
}

/// `D(x) = scale · wᵀ flatten(x)`.
#[derive(Clone, Debug)]
pub struct LinearCritic {
    pub weight: Param,
}

impl LinearCritic {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        LinearCritic {
            weight: Param::new(Tensor::new(vec![n, 1], weights).expect("column vector")),
        }
    }
}

impl Critic for LinearCritic {
    fn score(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let b = g.shape(x)[0];
        let flat = g.flatten(x, 1)?;
        let w = g.param(&self.weight)?;
        let s = g.matmul(flat, w)?;
        g.reshape(s, &[b])
    }

    fn module(&self) -> &dyn Module {
        self
    }
}

impl Module for LinearCritic {
    fn parameters(&self) -> Vec<&Param> {
        vec![&self.weight]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PenaltyMode {
    /// `x̂ = u·real + (1-u)·fake`, `u ~ U(0,1)` per sample.
    Interpolated,
    /// `x̂ = real + c·ε·std(real)`, `ε ~ N(0,1)` per element.
    AroundReal { scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyOutput {
    pub value: f64,
    /// Gradient of the penalty for every critic parameter, declaration order.
    pub grads: Vec<Tensor>,
    /// `‖∇ₓD(x̂ᵢ)‖` per sample.
    pub grad_norms: Vec<f64>,
    pub points: Tensor,
}

/// Draws the penalty points for `mode`.
pub fn penalty_points(real: &Tensor, fake: &Tensor, mode: PenaltyMode, rng: &mut RngState) -> Result<Tensor> {
    if real.shape() != fake.shape() || real.ndim() == 0 || real.shape()[0] == 0 {
        return Err(Error::dim(
            "gradient_penalty",
            format!("real {:?} and fake {:?} batches", real.shape(), fake.shape()),
        ));
    }
    let b = real.shape()[0];
    let per = real.numel() / b;
    let mut out = real.clone();
    match mode {
        PenaltyMode::Interpolated => {
            for i in 0..b {
                let u = rng.uniform();
                let span = i * per..(i + 1) * per;
                for ((o, &r), &f) in out.data_mut()[span.clone()].iter_mut().zip(&real.data()[span.clone()]).zip(&fake.data()[span]) {
                    *o = u * r + (1.0 - u) * f;
                }
            }
        }
        PenaltyMode::AroundReal { scale } => {
            let n = real.numel() as f64;
            let mean = real.data().iter().sum::<f64>() / n;
            let std = (real.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            for o in out.data_mut() {
                *o += scale * rng.normal() * std;
            }
        }
    }
    Ok(out)
}

/// Per-sample input gradients of the critic at `points`.
pub fn input_gradients(critic: &dyn Critic, points: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new(Mode::Eval);
    let x = g.input(points.clone())?;
    let s = critic.score(&mut g, x)?;
    let total = g.sum(s)?;
    g.backward(total)?;
    Ok(g.grad(x).cloned().unwrap_or_else(|| Tensor::zeros(points.shape())))
}

fn weighted_param_grads(critic: &dyn Critic, points: &Tensor, weights: &[f64]) -> Result<Vec<Tensor>> {
    let mut g = Graph::new(Mode::Eval);
    let x = g.constant(points.clone())?;
    let s = critic.score(&mut g, x)?;
    let w = g.constant(Tensor::vector(weights.to_vec()))?;
    let ws = g.mul(s, w)?;
    let total = g.sum(ws)?;
    g.backward(total)?;
    Ok(g.module_grads(critic.module()))
}

/// Penalty value and approximate parameter gradient at fixed points.
pub fn penalty_at(critic: &dyn Critic, points: &Tensor, lambda: f64) -> Result<PenaltyOutput> {
    if lambda < 0.0 {
        return Err(Error::Config(format!("penalty weight {} must be non-negative", lambda)));
    }
    let b = points.shape()[0];
    let per = points.numel() / b;
    let grads_x = input_gradients(critic, points)?;
    let mut norms = Vec::with_capacity(b);
    let mut dir = Tensor::zeros(points.shape());
    for i in 0..b {
        let gi = &grads_x.data()[i * per..(i + 1) * per];
        let n = gi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            for (d, v) in dir.data_mut()[i * per..(i + 1) * per].iter_mut().zip(gi) {
                *d = v / n;
            }
        }
        norms.push(n);
    }
    let value = lambda * norms.iter().map(|n| (n - 1.0).powi(2)).sum::<f64>() / b as f64;
    let weights: Vec<f64> = norms.iter().map(|n| 2.0 * (n - 1.0)).collect();

    let h = PENALTY_FD_STEP;
    let shifted = |sign: f64| {
        let mut p = points.clone();
        for (x, d) in p.data_mut().iter_mut().zip(dir.data()) {
            *x += sign * h * d;
        }
        p
    };
    let plus = weighted_param_grads(critic, &shifted(1.0), &weights)?;
    let minus = weighted_param_grads(critic, &shifted(-1.0), &weights)?;
    let k = lambda / (b as f64 * 2.0 * h);
    let grads = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| {
            let data = p.data().iter().zip(m.data()).map(|(a, b)| k * (a - b)).collect();
            Tensor::new(p.shape().to_vec(), data)
        })
        .collect::<Result<Vec<_>>>()?;
    if !value.is_finite() || grads.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite { op: "gradient_penalty" });
    }
    Ok(PenaltyOutput {
        value,
        grads,
        grad_norms: norms,
        points: points.clone(),
    })
}

/// Samples penalty points for `mode` and evaluates the penalty there.
pub fn gradient_penalty(
    critic: &dyn Critic,
    real: &Tensor,
    fake: &Tensor,
    mode: PenaltyMode,
    lambda: f64,
    rng: &mut RngState,
) -> Result<PenaltyOutput> {
    if lambda < 0.0 {
        return Err(Error::Config(format!("penalty weight {} must be non-negative", lambda)));
    }
    let points = penalty_points(real, fake, mode, rng)?;
    penalty_at(critic, &points, lambda)
}
