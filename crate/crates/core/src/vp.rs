//! Online joint adaptation of the step size `mu` and shrinkage `rho`.
//!
//! The engine keeps a running model of the filter's mean-square deviation.
//! Per iteration it
//!
//! 1. estimates the EMSE `zeta` from a smoothed error, floored at the
//!    model-implied bound `sigma_u^2 * xi`,
//! 2. forms `g` and `r1` in closed form from `zeta`,
//! 3. approximates the weight error from a one-step plant estimate and
//!    evaluates `h`, `l`, `r2` on the current sample,
//! 4. minimises the next-iteration MSD, a quadratic in `(mu, rho)`,
//! 5. smooths and clamps the result, and
//! 6. propagates the MSD model with the parameters actually applied.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::filter::{dot, FilterConfig, FilterState, ParamSource};
use crate::partition::weighted_attractor_with;

/// Relative determinant threshold below which the closed-form solve is
/// replaced by the attractor-free optimum.
pub const DEFAULT_DET_TOL: f64 = 1e-10;

/// Statistics of the MSD recursion at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub g: f64,
    pub h: f64,
    pub ell: f64,
    pub r1: f64,
    pub r2: f64,
}

impl MomentEstimates {
    /// Next-iteration MSD for parameters `(mu, rho)` given current MSD `xi`.
    pub fn next_msd(&self, xi: f64, mu: f64, rho: f64) -> f64 {
        xi + mu * mu * self.g + rho * rho * self.h + 2.0 * mu * rho * self.ell
            - 2.0 * mu * self.r1
            - 2.0 * rho * self.r2
    }

    pub fn determinant(&self) -> f64 {
        self.g * self.h - self.ell * self.ell
    }

    fn is_finite(&self) -> bool {
        [self.g, self.h, self.ell, self.r1, self.r2]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Output of [`solve_optimal_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalParams {
    /// Unconstrained minimiser, before clamping at zero.
    pub raw_mu: f64,
    pub raw_rho: f64,
    pub mu: f64,
    pub rho: f64,
    /// False when the determinant test sent the solve to the fallback.
    pub closed_form: bool,
}

/// Minimises the MSD quadratic over `(mu, rho)`.
///
/// Falls back to `(r1 / g, 0)` when `g h - l^2` is not clearly positive,
/// then clamps both parameters at zero from below.
pub fn solve_optimal_params(m: &MomentEstimates, det_tol: f64) -> Result<OptimalParams> {
    if !m.is_finite() {
        return Err(Error::Model(format!("non-finite moments {m:?}")));
    }
    if !(m.g > 0.0) {
        return Err(Error::Model(format!("g must be positive, got {}", m.g)));
    }
    let det = m.determinant();
    let (raw_mu, raw_rho, closed_form) = if det > det_tol * m.g * m.h.max(f64::MIN_POSITIVE) {
        (
            (m.h * m.r1 - m.ell * m.r2) / det,
            (m.g * m.r2 - m.ell * m.r1) / det,
            true,
        )
    } else {
        (m.r1 / m.g, 0.0, false)
    };
    Ok(OptimalParams {
        raw_mu,
        raw_rho,
        mu: raw_mu.max(0.0),
        rho: raw_rho.max(0.0),
        closed_form,
    })
}

/// `g = sigma_z^2 sigma_u^2 L + (2 + L) sigma_u^2 zeta`.
pub fn compute_g(sigma_z2: f64, sigma_u2: f64, len: usize, zeta: f64) -> f64 {
    let l = len as f64;
    sigma_z2 * sigma_u2 * l + (2.0 + l) * sigma_u2 * zeta
}

/// `r1` equals the EMSE.
pub fn compute_r1(zeta: f64) -> f64 {
    zeta
}

/// One-step plant estimate `w* ≈ w_n - p_n` with `p_n = -(r1/g) e_n u_n`.
///
/// Returns `(w_star_hat, w_tilde_hat)`; the weight-error estimate is `p_n`.
pub fn one_step_plant_estimate(
    w: &[f64],
    e: f64,
    u: &[f64],
    r1: f64,
    g: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(w.len(), u.len())?;
    if !(g > 0.0) {
        return Err(Error::Model(format!("g must be positive, got {g}")));
    }
    let eta = r1 / g;
    let w_tilde: Vec<f64> = u.iter().map(|&ui| -eta * e * ui).collect();
    let w_star = w.iter().zip(&w_tilde).map(|(wi, pi)| wi - pi).collect();
    Ok((w_star, w_tilde))
}

/// Instantaneous `(h, l, r2)` from a weight-error estimate, the regressor and
/// the attractor vector `beta ∘ s`.
pub fn compute_instantaneous_moments(
    w_tilde: &[f64],
    u: &[f64],
    beta_s: &[f64],
) -> Result<(f64, f64, f64)> {
    check_len(w_tilde.len(), u.len())?;
    check_len(w_tilde.len(), beta_s.len())?;
    let h = dot(beta_s, beta_s);
    let ell = dot(w_tilde, u) * dot(u, beta_s);
    let r2 = dot(beta_s, w_tilde);
    Ok((h, ell, r2))
}

/// Hyperparameters of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpConfig {
    /// Error smoothing factor, in `[0, 1)`.
    pub gamma: f64,
    /// Parameter smoothing factor, in `[0, 1)`.
    pub gamma_prime: f64,
    /// Step-size cap; `None` leaves the step size unbounded.
    pub mu_max: Option<f64>,
    /// Measurement-noise variance.
    pub sigma_z2: f64,
    /// Input power.
    pub sigma_u2: f64,
    pub det_tol: f64,
    /// Initial value of the model MSD.
    pub xi_init: f64,
}

impl VpConfig {
    /// Defaults for a filter of length `len`: `gamma = 0.95`, `gamma' = 0.99`,
    /// `mu_max = 2 / (3 sigma_u^2 L)`, model MSD starting at 1.
    pub fn new(len: usize, sigma_z2: f64, sigma_u2: f64) -> Self {
        Self {
            gamma: 0.95,
            gamma_prime: 0.99,
            mu_max: Some(default_mu_max(sigma_u2, len)),
            sigma_z2,
            sigma_u2,
            det_tol: DEFAULT_DET_TOL,
            xi_init: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be in [0, 1), got {x}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("gamma_prime", self.gamma_prime)?;
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("sigma_z2", self.sigma_z2)?;
        positive("sigma_u2", self.sigma_u2)?;
        positive("det_tol", self.det_tol)?;
        if let Some(mu_max) = self.mu_max {
            positive("mu_max", mu_max)?;
        }
        if !(self.xi_init >= 0.0 && self.xi_init.is_finite()) {
            return Err(Error::Parameter(format!(
                "xi_init must be >= 0, got {}",
                self.xi_init
            )));
        }
        Ok(())
    }
}

pub fn default_mu_max(sigma_u2: f64, len: usize) -> f64 {
    2.0 / (3.0 * sigma_u2 * len as f64)
}

/// Everything one iteration of the engine computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpStep {
    pub mu: f64,
    pub rho: f64,
    pub zeta_hat: f64,
    pub moments: MomentEstimates,
    pub optimum: OptimalParams,
}

/// Exponentially weighted estimate of the input power `||u||^2 / L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputPowerTracker {
    pub forgetting: f64,
    pub power: f64,
}

impl InputPowerTracker {
    pub fn new(forgetting: f64, initial: f64) -> Self {
        Self {
            forgetting,
            power: initial,
        }
    }

    pub fn update(&mut self, u: &[f64]) -> f64 {
        let inst = dot(u, u) / u.len().max(1) as f64;
        self.power = self.forgetting * self.power + (1.0 - self.forgetting) * inst;
        self.power
    }
}

/// Engine memory, advanced in lockstep with one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct VpState {
    pub config: VpConfig,
    pub len: usize,
    /// Smoothed error.
    pub e_smooth: f64,
    /// Model MSD.
    pub xi_model: f64,
    /// EMSE lower bound, `sigma_u^2 * xi_model`.
    pub zeta_min: f64,
    pub mu_prev: f64,
    pub rho_prev: f64,
    /// Number of iterations that took the fallback solve.
    pub fallbacks: usize,
    pub iterations: usize,
    power: Option<InputPowerTracker>,
    attractor: Vec<f64>,
}

impl VpState {
    pub fn new(config: VpConfig, len: usize) -> Result<Self> {
        config.validate()?;
        if len == 0 {
            return Err(Error::Parameter("filter length must be at least 1".into()));
        }
        Ok(Self {
            config,
            len,
            e_smooth: 0.0,
            xi_model: config.xi_init,
            zeta_min: config.sigma_u2 * config.xi_init,
            mu_prev: 0.0,
            rho_prev: 0.0,
            fallbacks: 0,
            iterations: 0,
            power: None,
            attractor: vec![0.0; len],
        })
    }

    /// Replace the configured input power by a running estimate.
    pub fn with_power_tracking(mut self, forgetting: f64) -> Self {
        self.power = Some(InputPowerTracker::new(forgetting, self.config.sigma_u2));
        self
    }

    /// Smooths the error and returns the EMSE estimate, floored at `zeta_min`.
    pub fn estimate_emse(&mut self, e: f64) -> f64 {
        let gamma = self.config.gamma;
        self.e_smooth = (1.0 - gamma) * e + gamma * self.e_smooth;
        let zeta = (self.e_smooth * self.e_smooth - self.config.sigma_z2).max(self.zeta_min);
        debug_assert!(zeta >= self.zeta_min && self.zeta_min >= 0.0);
        zeta
    }

    pub fn compute_g(&self, zeta: f64) -> f64 {
        compute_g(self.config.sigma_z2, self.config.sigma_u2, self.len, zeta)
    }

    /// Temporal smoothing of the optimum plus the step-size cap. The
    /// returned pair is remembered for the next call.
    pub fn smooth_and_clamp(&mut self, mu_star: f64, rho_star: f64) -> (f64, f64) {
        let gp = self.config.gamma_prime;
        let mut mu = gp * self.mu_prev + (1.0 - gp) * mu_star;
        if let Some(mu_max) = self.config.mu_max {
            mu = mu.min(mu_max);
        }
        let rho = gp * self.rho_prev + (1.0 - gp) * rho_star;
        self.mu_prev = mu;
        self.rho_prev = rho;
        (mu, rho)
    }

    /// Advances the model MSD with the applied parameters and refreshes the
    /// EMSE lower bound from it.
    pub fn propagate_model_msd(&mut self, m: &MomentEstimates, mu: f64, rho: f64) {
        self.xi_model = m.next_msd(self.xi_model, mu, rho).max(0.0);
        self.zeta_min = self.config.sigma_u2 * self.xi_model;
    }

    /// Full iteration for a filter holding weights `w` that just saw
    /// regressor `u` with a-priori error `e`. Returns the parameters to
    /// apply now.
    pub fn iterate(&mut self, state: &FilterState, cfg: &FilterConfig, u: &[f64], e: f64) -> Result<VpStep> {
        check_len(self.len, u.len())?;
        check_len(self.len, state.w.len())?;
        if let Some(tracker) = self.power.as_mut() {
            self.config.sigma_u2 = tracker.update(u).max(f64::MIN_POSITIVE);
        }

        let zeta_hat = self.estimate_emse(e);
        let g = self.compute_g(zeta_hat);
        let r1 = compute_r1(zeta_hat);
        let (_, w_tilde) = one_step_plant_estimate(&state.w, e, u, r1, g)?;

        match cfg.attractor {
            Some(mode) => weighted_attractor_with(&state.w, &cfg.partition, |_, n| mode.beta(n), &mut self.attractor)?,
            None => self.attractor.iter_mut().for_each(|a| *a = 0.0),
        }
        let (h, ell, r2) = compute_instantaneous_moments(&w_tilde, u, &self.attractor)?;
        let moments = MomentEstimates { g, h, ell, r1, r2 };

        let optimum = solve_optimal_params(&moments, self.config.det_tol)?;
        if !optimum.closed_form {
            self.fallbacks += 1;
        }
        let (mu, rho) = self.smooth_and_clamp(optimum.mu, optimum.rho);
        self.propagate_model_msd(&moments, mu, rho);
        self.iterations += 1;

        Ok(VpStep {
            mu,
            rho,
            zeta_hat,
            moments,
            optimum,
        })
    }
}

impl ParamSource for VpState {
    fn params(&mut self, state: &FilterState, cfg: &FilterConfig, u: &[f64], error: f64) -> Result<(f64, f64)> {
        let step = self.iterate(state, cfg, u, error)?;
        Ok((step.mu, step.rho))
    }
}

/// Sample variance of the a-priori error of a slow LMS warm-up, taken over
/// the samples after `skip`. A rough stand-in when the noise variance is
/// not known.
pub fn estimate_noise_variance<'a, I>(samples: I, len: usize, warmup_mu: f64, skip: usize) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut w = vec![0.0; len];
    let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for (k, (u, d)) in samples.into_iter().enumerate() {
        check_len(len, u.len())?;
        let e = d - dot(&w, u);
        for (wi, ui) in w.iter_mut().zip(u) {
            *wi += warmup_mu * e * ui;
        }
        if k >= skip {
            count += 1;
            let delta = e - mean;
            mean += delta / count as f64;
            m2 += delta * (e - mean);
        }
    }
    if count < 2 {
        return Err(Error::Parameter(
            "noise estimation needs at least two samples after the skip".into(),
        ));
    }
    Ok(m2 / (count - 1) as f64)
}
