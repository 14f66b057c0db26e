//! Noise schedules, the closed-form forward (noising) process, and the
//! posterior coefficients used by the reverse step.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Array, Real};

/// Upper bound applied to every β.
pub const MAX_BETA: f64 = 0.999;

/// Default cosine offset `s`.
pub const COSINE_OFFSET: f64 = 0.008;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `β_t = 1 / (T - t + 1)`.
    Linear,
    /// `ᾱ_t = f(t) / f(0)` with `f(t) = cos²(((t/T) + s) / (1 + s) · π/2)`.
    Cosine,
}

/// Serializable description of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub steps: usize,
    pub offset: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Cosine,
            steps: 1000,
            offset: COSINE_OFFSET,
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<ScheduleTable> {
        make_schedule(self.kind, self.steps, self.offset)
    }
}

/// Precomputed β, α, ᾱ and posterior variances for `t = 1..=T`.
///
/// Vectors are indexed by `t` directly; index 0 holds the clean-data
/// convention `β_0 = 0`, `α_0 = ᾱ_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleTable {
    spec: ScheduleSpec,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    posterior_var: Vec<f64>,
}

fn cosine_f(t: usize, steps: usize, s: f64) -> f64 {
    let u = (t as f64 / steps as f64 + s) / (1.0 + s);
    (u * FRAC_PI_2).cos().powi(2)
}

pub fn make_schedule(kind: ScheduleKind, steps: usize, offset: f64) -> Result<ScheduleTable> {
    if steps == 0 {
        return Err(Error::config("schedule needs at least one diffusion step"));
    }
    let mut beta = vec![0.0; steps + 1];
    let mut alpha = vec![1.0; steps + 1];
    let mut alpha_bar = vec![1.0; steps + 1];
    match kind {
        ScheduleKind::Linear => {
            for t in 1..=steps {
                beta[t] = (1.0 / (steps - t + 1) as f64).min(MAX_BETA);
                alpha[t] = 1.0 - beta[t];
                alpha_bar[t] = alpha_bar[t - 1] * alpha[t];
            }
        }
        ScheduleKind::Cosine => {
            if !(offset > 0.0) {
                return Err(Error::config(format!(
                    "cosine offset must be positive, got {offset}"
                )));
            }
            let f0 = cosine_f(0, steps, offset);
            for t in 1..=steps {
                alpha_bar[t] = cosine_f(t, steps, offset) / f0;
                beta[t] = (1.0 - alpha_bar[t] / alpha_bar[t - 1]).min(MAX_BETA);
                alpha[t] = 1.0 - beta[t];
            }
        }
    }
    let mut posterior_var = vec![0.0; steps + 1];
    for t in 1..=steps {
        posterior_var[t] = (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]) * beta[t];
    }
    Ok(ScheduleTable {
        spec: ScheduleSpec {
            kind,
            steps,
            offset,
        },
        beta,
        alpha,
        alpha_bar,
        posterior_var,
    })
}

impl ScheduleTable {
    pub fn spec(&self) -> ScheduleSpec {
        self.spec
    }

    pub fn kind(&self) -> ScheduleKind {
        self.spec.kind
    }

    /// Total number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.spec.steps
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

    pub fn posterior_var(&self, t: usize) -> f64 {
        self.posterior_var[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta[1..]
    }

    fn check_step(&self, t: usize, allow_zero: bool) -> Result<()> {
        let lo = if allow_zero { 0 } else { 1 };
        if t < lo || t > self.steps() {
            return Err(Error::Index(format!(
                "timestep {t} outside [{lo}, {}]",
                self.steps()
            )));
        }
        Ok(())
    }

    /// Reverse-step coefficients at `t`:
    /// `(1/√α_t, β_t/√(1-ᾱ_t), (1-ᾱ_{t-1})/(1-ᾱ_t)·β_t)`.
    pub fn posterior_coeffs(&self, t: usize) -> Result<(f64, f64, f64)> {
        self.check_step(t, false)?;
        Ok((
            1.0 / self.alpha[t].sqrt(),
            self.beta[t] / (1.0 - self.alpha_bar[t]).sqrt(),
            self.posterior_var[t],
        ))
    }

    /// Samples `x_t = √ᾱ_t · x0 + √(1-ᾱ_t) · eps`. `t = 0` returns `x0`.
    pub fn q_sample<F: Real>(&self, x0: &Array<F>, t: usize, eps: &Array<F>) -> Result<Array<F>> {
        self.check_step(t, true)?;
        if x0.shape() != eps.shape() {
            return Err(Error::shape(format!(
                "noise shape {:?} does not match signal {:?}",
                eps.shape(),
                x0.shape()
            )));
        }
        let ab = self.alpha_bar[t];
        let data = x0
            .data()
            .iter()
            .zip(eps.data())
            .map(|(&x, &e)| diffuse(ab, x, e))
            .collect();
        Array::new(x0.shape().to_vec(), data)
    }
}

/// `√ᾱ · x0 + √(1-ᾱ) · eps` for one value.
#[inline]
pub fn diffuse<F: Real>(alpha_bar: f64, x0: F, eps: F) -> F {
    F::lit(alpha_bar.sqrt()) * x0 + F::lit((1.0 - alpha_bar).sqrt()) * eps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_steps() {
        assert!(matches!(
            make_schedule(ScheduleKind::Cosine, 0, COSINE_OFFSET),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn alpha_bar_starts_at_one() {
        for steps in [1, 10, 1000] {
            let t = make_schedule(ScheduleKind::Cosine, steps, COSINE_OFFSET).unwrap();
            assert_eq!(t.alpha_bar(0), 1.0);
        }
    }

    #[test]
    fn default_offset() {
        assert_eq!(ScheduleSpec::default().offset, 0.008);
    }

    #[test]
    fn first_posterior_variance_is_zero() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Cosine] {
            let t = make_schedule(kind, 50, COSINE_OFFSET).unwrap();
            assert_eq!(t.posterior_var(1), 0.0);
            assert_eq!(t.posterior_coeffs(1).unwrap().2, 0.0);
        }
    }

    #[test]
    fn linear_alpha_bar_is_linear_in_t() {
        // Π (1 - 1/(T-i+1)) telescopes to (T - t) / T before the final clip.
        let t = make_schedule(ScheduleKind::Linear, 20, 0.0).unwrap();
        for step in 0..20 {
            assert!((t.alpha_bar(step) - (20 - step) as f64 / 20.0).abs() < 1e-12);
        }
        assert_eq!(t.beta(20), MAX_BETA);
    }

    #[test]
    fn coefficients_match_direct_formula() {
        let t = make_schedule(ScheduleKind::Cosine, 50, COSINE_OFFSET).unwrap();
        for step in 1..=50 {
            let (cx, ce, var) = t.posterior_coeffs(step).unwrap();
            assert!(cx > 1.0);
            assert_eq!(cx, 1.0 / (1.0 - t.beta(step)).sqrt());
            assert_eq!(ce, t.beta(step) / (1.0 - t.alpha_bar(step)).sqrt());
            assert!(var >= 0.0 && var <= t.beta(step));
        }
    }

    #[test]
    fn q_sample_closed_form() {
        let t = make_schedule(ScheduleKind::Cosine, 10, COSINE_OFFSET).unwrap();
        let x0 = Array::from_f64(vec![3], &[1.0, -2.0, 0.5]).unwrap();
        let eps = Array::from_f64(vec![3], &[0.5, 0.1, -1.0]).unwrap();
        assert_eq!(t.q_sample(&x0, 0, &eps).unwrap(), x0);
        let zero = Array::<f64>::zeros(vec![3]);
        let y = t.q_sample(&zero, 4, &eps).unwrap();
        for (v, e) in y.data().iter().zip(eps.data()) {
            assert_eq!(*v, (1.0 - t.alpha_bar(4)).sqrt() * e);
        }
        assert!(matches!(t.q_sample(&x0, 11, &eps), Err(Error::Index(_))));
        assert!(matches!(t.posterior_coeffs(0), Err(Error::Index(_))));
    }

    #[test]
    fn scalar_arithmetic_example() {
        // √0.64 · 1 + √0.36 · 0.5 = 1.1
        assert!((diffuse(0.64, 1.0f64, 0.5) - 1.1).abs() < 1e-15);
    }
}
