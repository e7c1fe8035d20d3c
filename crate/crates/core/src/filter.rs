//! LMS, GZA-LMS and GRZA-LMS update engines.
//!
//! All three share one update,
//!
//! ```text
//! e_n     = d_n - w_n' u_n
//! w_{n+1} = w_n + mu_n e_n u_n - rho_n (beta_n ∘ s_n)
//! ```
//!
//! and differ only in the per-group weights `beta_n` (plain LMS drops the
//! attractor term altogether). Step size and shrinkage are passed per step so
//! fixed-parameter and variable-parameter runs go through the same code.

use crate::error::{check_len, Error, Result};
use crate::partition::{weighted_attractor_with, AttractorMode, GroupPartition};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub partition: GroupPartition,
    /// `None` is plain LMS.
    pub attractor: Option<AttractorMode>,
    /// Step size for fixed-parameter runs.
    pub mu: f64,
    /// Shrinkage (`mu * lambda`) for fixed-parameter runs.
    pub rho: f64,
    pub variable_params: bool,
}

impl FilterConfig {
    pub fn new(partition: GroupPartition, attractor: Option<AttractorMode>) -> Result<Self> {
        if let Some(mode) = attractor {
            mode.validate()?;
        }
        Ok(Self {
            partition,
            attractor,
            mu: 0.0,
            rho: 0.0,
            variable_params: false,
        })
    }

    pub fn fixed(mut self, mu: f64, rho: f64) -> Result<Self> {
        check_params(mu, rho)?;
        self.mu = mu;
        self.rho = rho;
        self.variable_params = false;
        Ok(self)
    }

    pub fn variable(mut self) -> Self {
        self.variable_params = true;
        self
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(mode) = self.attractor {
            mode.validate()?;
        }
        check_params(self.mu, self.rho)
    }
}

fn check_params(mu: f64, rho: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Parameter(format!("step size must be >= 0, got {mu}")));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Parameter(format!("shrinkage must be >= 0, got {rho}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// Current estimate `w_n`.
    pub w: Vec<f64>,
    /// Number of updates applied so far.
    pub n: usize,
    /// Error `e_n` of the most recent update.
    pub last_error: f64,
    /// `beta ∘ s` used by the most recent update.
    pub last_attractor: Vec<f64>,
}

impl FilterState {
    /// All-zero initial weights.
    pub fn zeros(len: usize) -> Self {
        Self::from_weights(vec![0.0; len])
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        let len = w.len();
        Self {
            w,
            n: 0,
            last_error: 0.0,
            last_attractor: vec![0.0; len],
        }
    }

    /// Filter output `w_n' u`.
    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        check_len(self.w.len(), u.len())?;
        Ok(dot(&self.w, u))
    }

    /// One update with the attractor chosen by `cfg`. Returns `e_n`.
    pub fn step(&mut self, cfg: &FilterConfig, u: &[f64], d: f64, mu: f64, rho: f64) -> Result<f64> {
        check_params(mu, rho)?;
        match cfg.attractor {
            None => self.step_with_beta(&cfg.partition, |_, _| 0.0, u, d, mu, 0.0),
            Some(AttractorMode::Gza) => self.step_with_beta(&cfg.partition, |_, _| 1.0, u, d, mu, rho),
            Some(mode @ AttractorMode::Grza { .. }) => {
                self.step_with_beta(&cfg.partition, |_, norm| mode.beta(norm), u, d, mu, rho)
            }
        }
    }

    /// One update with an arbitrary per-group weight `beta(j, ||w_j||)`.
    pub fn step_with_beta<F>(
        &mut self,
        partition: &GroupPartition,
        beta: F,
        u: &[f64],
        d: f64,
        mu: f64,
        rho: f64,
    ) -> Result<f64>
    where
        F: Fn(usize, f64) -> f64,
    {
        check_len(partition.len(), self.w.len())?;
        check_len(self.w.len(), u.len())?;
        check_params(mu, rho)?;

        let e = d - dot(&self.w, u);
        weighted_attractor_with(&self.w, partition, beta, &mut self.last_attractor)?;
        let gain = mu * e;
        for ((w, &ui), &a) in self.w.iter_mut().zip(u).zip(&self.last_attractor) {
            *w = *w + gain * ui - rho * a;
        }
        self.n += 1;
        self.last_error = e;
        if !e.is_finite() || self.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { iteration: self.n });
        }
        Ok(e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Supplies `(mu_n, rho_n)` before each update.
pub trait ParamSource {
    /// Called with the state *before* the update and its a-priori error
    /// `e_n = d_n - w_n' u_n`.
    fn params(&mut self, state: &FilterState, cfg: &FilterConfig, u: &[f64], error: f64) -> Result<(f64, f64)>;
}

/// Constant `(mu, rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedParams {
    pub mu: f64,
    pub rho: f64,
}

impl From<&FilterConfig> for FixedParams {
    fn from(cfg: &FilterConfig) -> Self {
        Self {
            mu: cfg.mu,
            rho: cfg.rho,
        }
    }
}

impl ParamSource for FixedParams {
    fn params(&mut self, _: &FilterState, _: &FilterConfig, _: &[f64], _: f64) -> Result<(f64, f64)> {
        Ok((self.mu, self.rho))
    }
}

/// Runs the filter from all-zero weights over `(u_n, d_n)` pairs. The
/// returned trajectory starts with the initial state.
pub fn run_sequence<'a, I>(
    cfg: &FilterConfig,
    inputs: I,
    params: &mut dyn ParamSource,
) -> Result<Vec<FilterState>>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    cfg.validate()?;
    let mut state = FilterState::zeros(cfg.len());
    let mut trajectory = vec![state.clone()];
    for (u, d) in inputs {
        let e = d - state.predict(u)?;
        let (mu, rho) = params.params(&state, cfg, u, e)?;
        state.step(cfg, u, d, mu, rho)?;
        trajectory.push(state.clone());
    }
    Ok(trajectory)
}
