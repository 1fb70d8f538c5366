//! DDPM mathematical core: the variance schedule, the forward (noising)
//! process, clean-image recovery from a noise prediction, and the posterior
//! coefficients used by the ancestral sampler.
//!
//! Everything here is plain f64 so the algebraic identities (for example
//! forward/recover being exact inverses) can be verified to 1e-10.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Per-timestep β, α = 1-β, and ᾱ = ∏ α tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear β interpolation over `t_steps` steps.
    pub fn linear(t_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if t_steps < 2 {
            return Err(Error::invalid_argument("schedule needs at least 2 steps"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::invalid_argument(format!(
                "invalid beta range [{beta_start}, {beta_end}]: need 0 < start <= end < 1"
            )));
        }
        let mut beta = Vec::with_capacity(t_steps);
        for t in 0..t_steps {
            let frac = t as f64 / (t_steps - 1) as f64;
            beta.push(beta_start + (beta_end - beta_start) * frac);
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(t_steps);
        let mut prod = 1.0;
        for &a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        Ok(NoiseSchedule { beta, alpha, alpha_bar })
    }

    pub fn t_steps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.t_steps() {
            return Err(Error::invalid_argument(format!(
                "timestep {t} out of range for T={}",
                self.t_steps()
            )));
        }
        Ok(())
    }

    /// Posterior mean coefficients for the ancestral step
    /// `mu = c0 * x0_hat + ct * x_t` at timestep `t`.
    pub fn posterior_coefficients(&self, t: usize) -> (f64, f64) {
        let ab_t = self.alpha_bar[t];
        let ab_prev = if t == 0 { 1.0 } else { self.alpha_bar[t - 1] };
        let c0 = ab_prev.sqrt() * self.beta[t] / (1.0 - ab_t);
        let ct = self.alpha[t].sqrt() * (1.0 - ab_prev) / (1.0 - ab_t);
        (c0, ct)
    }
}

/// `x_t = sqrt(ᾱ_t) x0 + sqrt(1-ᾱ_t) ε`.
pub fn forward_diffuse(
    x0: &ImageTensor,
    t: usize,
    eps: &ImageTensor,
    sched: &NoiseSchedule,
) -> Result<ImageTensor> {
    sched.check_t(t)?;
    if x0.shape() != eps.shape() {
        return Err(Error::invalid_argument(format!(
            "noise shape {:?} does not match image shape {:?}",
            eps.shape(),
            x0.shape()
        )));
    }
    let ab = sched.alpha_bar(t);
    let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
    let (c, h, w) = x0.shape();
    let data = x0.data().iter().zip(eps.data()).map(|(&x, &e)| sa * x + sb * e).collect();
    ImageTensor::new(c, h, w, data)
}

/// `x̂0 = (x_t - sqrt(1-ᾱ_t) ε̂) / sqrt(ᾱ_t)`.
pub fn recover_x0(
    x_t: &ImageTensor,
    eps_pred: &ImageTensor,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<ImageTensor> {
    sched.check_t(t)?;
    if x_t.shape() != eps_pred.shape() {
        return Err(Error::invalid_argument(format!(
            "prediction shape {:?} does not match image shape {:?}",
            eps_pred.shape(),
            x_t.shape()
        )));
    }
    let ab = sched.alpha_bar(t);
    if ab <= 0.0 {
        return Err(Error::numeric(format!("alpha_bar at t={t} is not positive: {ab}")));
    }
    let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
    let (c, h, w) = x_t.shape();
    let data = x_t.data().iter().zip(eps_pred.data()).map(|(&x, &e)| (x - sb * e) / sa).collect();
    ImageTensor::new(c, h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_image(seed: u64, n: usize) -> ImageTensor {
        let mut r = rng::stream(seed, &[]);
        let data = (0..3 * n * n).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        ImageTensor::new(3, n, n, data).unwrap()
    }

    fn random_noise(seed: u64, n: usize) -> ImageTensor {
        let mut r = rng::stream(seed, &[1]);
        let data = (0..3 * n * n).map(|_| rng::standard_normal(&mut r)).collect();
        ImageTensor::new(3, n, n, data).unwrap()
    }

    #[test]
    fn full_scale_schedule_decays_below_one_percent() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        assert!(s.alpha_bar(999) < 0.01, "alpha_bar(999) = {}", s.alpha_bar(999));
    }

    #[test]
    fn two_step_schedule_hand_values() {
        let s = NoiseSchedule::linear(2, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar(0) - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(1) - 0.81).abs() < 1e-15);
    }

    #[test]
    fn alpha_bar_strictly_decreasing_and_product_consistent() {
        let s = NoiseSchedule::linear(100, 1e-4, 0.1).unwrap();
        let mut prod = 1.0;
        for t in 0..s.t_steps() {
            prod *= s.alpha(t);
            assert!((s.alpha_bar(t) - prod).abs() < 1e-12);
            if t > 0 {
                assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            }
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(NoiseSchedule::linear(1, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.03, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.5, 1.0).is_err());
    }

    #[test]
    fn forward_with_zero_noise_scales_by_sqrt_alpha_bar() {
        let s = NoiseSchedule::linear(10, 0.01, 0.1).unwrap();
        let x0 = random_image(3, 8);
        let zero = ImageTensor::zeros(3, 8, 8);
        let xt = forward_diffuse(&x0, 4, &zero, &s).unwrap();
        let sa = s.alpha_bar(4).sqrt();
        for (a, b) in xt.data().iter().zip(x0.data()) {
            assert!((a - sa * b).abs() < 1e-15);
        }
    }

    #[test]
    fn recover_inverts_forward_exactly() {
        let s = NoiseSchedule::linear(100, 1e-4, 0.1).unwrap();
        for seed in 0..20 {
            let x0 = random_image(seed, 8);
            let eps = random_noise(seed, 8);
            let t = (seed as usize * 7) % 100;
            let xt = forward_diffuse(&x0, t, &eps, &s).unwrap();
            let rec = recover_x0(&xt, &eps, t, &s).unwrap();
            for (a, b) in rec.data().iter().zip(x0.data()) {
                assert!((a - b).abs() < 1e-10, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn recover_with_zero_prediction_rescales_x_t() {
        let s = NoiseSchedule::linear(10, 0.01, 0.1).unwrap();
        let xt = random_image(5, 8);
        let zero = ImageTensor::zeros(3, 8, 8);
        let rec = recover_x0(&xt, &zero, 3, &s).unwrap();
        let sa = s.alpha_bar(3).sqrt();
        for (a, b) in rec.data().iter().zip(xt.data()) {
            assert!((a - b / sa).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let s = NoiseSchedule::linear(10, 0.01, 0.1).unwrap();
        let x0 = random_image(1, 8);
        let eps = random_noise(1, 4);
        assert!(forward_diffuse(&x0, 2, &eps, &s).is_err());
        assert!(recover_x0(&x0, &eps, 2, &s).is_err());
    }

    #[test]
    fn posterior_coefficients_reconstruct_mean_identity() {
        // At the fixed point x0_hat = x0 and x_t from forward_diffuse with
        // eps = 0, the posterior mean must equal sqrt(ab_{t-1}) x0.
        let s = NoiseSchedule::linear(50, 1e-3, 0.08).unwrap();
        for t in 1..50 {
            let (c0, ct) = s.posterior_coefficients(t);
            let mu = c0 + ct * s.alpha_bar(t).sqrt(); // per unit x0
            assert!((mu - s.alpha_bar(t - 1).sqrt()).abs() < 1e-12, "t={t}");
        }
    }
}
