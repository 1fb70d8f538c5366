//! The training objective: pixel reconstruction loss, time-blended identity
//! loss, the 3D shape term, and their weighted total.
//!
//! These are the reference f64 implementations; the trainer assembles the
//! same quantities inside the autodiff graph and the decomposition identity
//! ties the two together on every logged step.

use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_id: f64,
    pub lambda_3d: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_id.is_finite() && self.lambda_id >= 0.0) {
            return Err(Error::invalid_argument(format!("lambda_id {} invalid", self.lambda_id)));
        }
        if !(self.lambda_3d.is_finite() && self.lambda_3d >= 0.0) {
            return Err(Error::invalid_argument(format!("lambda_3d {} invalid", self.lambda_3d)));
        }
        Ok(())
    }
}

/// One step's loss components. `total = mse + lambda_id * id + lambda_3d * shape3d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse: f64,
    pub id: f64,
    pub shape3d: f64,
    pub total: f64,
    pub gamma_t: f64,
}

/// Mean over all pixels and channels of the squared difference.
pub fn mse_loss(x_sty: &ImageTensor, x0_hat: &ImageTensor) -> Result<f64> {
    if x_sty.shape() != x0_hat.shape() {
        return Err(Error::invalid_argument(format!(
            "mse shapes differ: {:?} vs {:?}",
            x_sty.shape(),
            x0_hat.shape()
        )));
    }
    let n = x_sty.data().len() as f64;
    Ok(x_sty
        .data()
        .iter()
        .zip(x0_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity of two embedding vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid_argument("embedding dimensions differ"));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::numeric("cosine similarity of a zero vector"));
    }
    Ok(dot(a, b) / (na * nb))
}

/// Time-blended identity loss:
/// `-γ CS(f_id, f_hat) - (1-γ) CS(f_sty, f_hat)`.
pub fn id_loss(f_id: &[f64], f_sty: &[f64], f_hat: &[f64], gamma_t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma_t) {
        return Err(Error::invalid_argument(format!("gamma_t {gamma_t} outside [0, 1]")));
    }
    let cs_id = cosine_similarity(f_id, f_hat)?;
    let cs_sty = cosine_similarity(f_sty, f_hat)?;
    Ok(-gamma_t * cs_id - (1.0 - gamma_t) * cs_sty)
}

/// Functional form of the identity-blend weight γ_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum GammaMode {
    /// γ_t = ᾱ_t: emphasizes the identity target near clean data and the
    /// style target near pure noise.
    AlphaBar,
    Constant(f64),
    /// γ_t = 1 - t/T.
    Linear,
}

impl Default for GammaMode {
    fn default() -> Self {
        GammaMode::AlphaBar
    }
}

pub fn gamma_schedule(t: usize, sched: &NoiseSchedule, mode: GammaMode) -> Result<f64> {
    if t >= sched.t_steps() {
        return Err(Error::invalid_argument(format!(
            "timestep {t} out of range for T={}",
            sched.t_steps()
        )));
    }
    let g = match mode {
        GammaMode::AlphaBar => sched.alpha_bar(t),
        GammaMode::Constant(c) => {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::invalid_argument(format!("constant gamma {c} outside [0, 1]")));
            }
            c
        }
        GammaMode::Linear => 1.0 - t as f64 / sched.t_steps() as f64,
    };
    debug_assert!((0.0..=1.0).contains(&g));
    Ok(g)
}

/// Weighted total per the three-term objective.
pub fn total_loss(
    mse: f64,
    id: f64,
    shape3d: f64,
    gamma_t: f64,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    for (name, v) in [("mse", mse), ("id", id), ("shape3d", shape3d)] {
        if !v.is_finite() {
            return Err(Error::numeric(format!("loss component {name} is not finite: {v}")));
        }
    }
    let total = mse + weights.lambda_id * id + weights.lambda_3d * shape3d;
    Ok(LossBreakdown { mse, id, shape3d, total, gamma_t })
}

impl LossBreakdown {
    /// The decomposition identity that every logged step must satisfy.
    pub fn decomposition_holds(&self, weights: &LossWeights, tol: f64) -> bool {
        (self.total - (self.mse + weights.lambda_id * self.id + weights.lambda_3d * self.shape3d))
            .abs()
            <= tol
    }
}
