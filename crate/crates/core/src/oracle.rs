//! Brute-force cross-checks for the closed forms: grid minimisation of the
//! MSD quadratic, central-difference subgradients of the l1,2 norm and
//! Monte-Carlo estimates of the transient-model moments.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::filter::{dot, FilterConfig, FilterState};
use crate::partition::{group_norms, l12_norm, weighted_attractor_with, GroupPartition};
use crate::signal::{stream_rng, InputProcess, Stream, TappedDelayLine};
use crate::vp::{compute_g, MomentEstimates};

use rand_distr::{Distribution, Normal};

/// Ensemble members simulated per parallel work item.
const ENSEMBLE_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMin {
    pub mu: f64,
    pub rho: f64,
    pub value: f64,
    /// Grid spacing along each axis.
    pub mu_step: f64,
    pub rho_step: f64,
}

/// Exhaustive minimisation of `m.next_msd(0, mu, rho)` over a
/// `resolution x resolution` grid on `[mu_lo, mu_hi] x [rho_lo, rho_hi]`.
pub fn grid_minimize_quadratic(
    m: &MomentEstimates,
    mu_box: (f64, f64),
    rho_box: (f64, f64),
    resolution: usize,
) -> Result<GridMin> {
    if resolution < 2 {
        return Err(Error::Domain(format!("grid resolution must be >= 2, got {resolution}")));
    }
    let axis = |(lo, hi): (f64, f64)| {
        let step = (hi - lo) / (resolution - 1) as f64;
        (lo, step)
    };
    let (mu_lo, mu_step) = axis(mu_box);
    let (rho_lo, rho_step) = axis(rho_box);
    let mut best = GridMin {
        mu: mu_lo,
        rho: rho_lo,
        value: f64::INFINITY,
        mu_step,
        rho_step,
    };
    for i in 0..resolution {
        let mu = mu_lo + i as f64 * mu_step;
        for j in 0..resolution {
            let rho = rho_lo + j as f64 * rho_step;
            let value = m.next_msd(0.0, mu, rho);
            if value < best.value {
                best.mu = mu;
                best.rho = rho;
                best.value = value;
            }
        }
    }
    Ok(best)
}

/// Central-difference gradient of the l1,2 norm. Every group norm must
/// exceed `10 * step`.
pub fn finite_diff_subgradient(w: &[f64], p: &GroupPartition, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let norms = group_norms(w, p)?;
    if let Some((j, n)) = norms.iter().enumerate().find(|(_, n)| **n <= 10.0 * step) {
        return Err(Error::Domain(format!(
            "group {j} has norm {n}, too close to the non-differentiable set for step {step}"
        )));
    }
    let mut probe = w.to_vec();
    let mut grad = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        probe[i] = w[i] + step;
        let plus = l12_norm(&probe, p)?;
        probe[i] = w[i] - step;
        let minus = l12_norm(&probe, p)?;
        probe[i] = w[i];
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte-Carlo counterparts of `g, h, l, r1, r2` computed with the true
/// weight error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleMoments {
    pub g: Estimate,
    pub h: Estimate,
    pub ell: Estimate,
    pub r1: Estimate,
    pub r2: Estimate,
    /// EMSE `sigma_u^2 ||w~||^2`, valid for white input; equal in
    /// expectation to `r1`.
    pub zeta: Estimate,
    /// MSD `||w~||^2`.
    pub msd: Estimate,
    pub ensemble: usize,
}

impl EnsembleMoments {
    pub fn means(&self) -> MomentEstimates {
        MomentEstimates {
            g: self.g.mean,
            h: self.h.mean,
            ell: self.ell.mean,
            r1: self.r1.mean,
            r2: self.r2.mean,
        }
    }
}

/// Setup shared by the ensemble routines.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSetup {
    pub plant: Vec<f64>,
    pub input: InputProcess,
    pub sigma_z2: f64,
    pub filter: FilterConfig,
    /// Initial weights; `None` starts from zero.
    pub w0: Option<Vec<f64>>,
    pub seed: u64,
}

impl EnsembleSetup {
    fn validate(&self) -> Result<()> {
        self.input.validate()?;
        self.filter.validate()?;
        check_len(self.filter.len(), self.plant.len())?;
        if let Some(w0) = &self.w0 {
            check_len(self.plant.len(), w0.len())?;
        }
        if !(self.sigma_z2 >= 0.0) {
            return Err(Error::Parameter(format!("noise variance must be >= 0, got {}", self.sigma_z2)));
        }
        Ok(())
    }
}

/// Per-sample values whose ensemble means are the model statistics.
#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    g: f64,
    h: f64,
    ell: f64,
    r1: f64,
    r2: f64,
    msd: f64,
    msd_next: f64,
}

const FIELDS: usize = 7;

impl Sample {
    fn as_array(&self) -> [f64; FIELDS] {
        [self.g, self.h, self.ell, self.r1, self.r2, self.msd, self.msd_next]
    }
}

/// Running sums and sums of squares per iteration.
#[derive(Debug, Clone)]
struct Accumulator {
    sum: Vec<[f64; FIELDS]>,
    sq: Vec<[f64; FIELDS]>,
    count: usize,
}

impl Accumulator {
    fn new(horizon: usize) -> Self {
        Self {
            sum: vec![[0.0; FIELDS]; horizon],
            sq: vec![[0.0; FIELDS]; horizon],
            count: 0,
        }
    }

    fn add(&mut self, n: usize, s: &Sample) {
        for (k, v) in s.as_array().into_iter().enumerate() {
            self.sum[n][k] += v;
            self.sq[n][k] += v * v;
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for n in 0..self.sum.len() {
            for k in 0..FIELDS {
                self.sum[n][k] += other.sum[n][k];
                self.sq[n][k] += other.sq[n][k];
            }
        }
        self.count += other.count;
    }

    fn estimate(&self, n: usize, k: usize) -> Estimate {
        let c = self.count as f64;
        let mean = self.sum[n][k] / c;
        let var = ((self.sq[n][k] - c * mean * mean) / (c - 1.0)).max(0.0);
        Estimate {
            mean,
            std_err: (var / c).sqrt(),
        }
    }

    fn moments(&self, n: usize, sigma_u2: f64) -> (EnsembleMoments, Estimate) {
        let e = |k| self.estimate(n, k);
        let msd = e(5);
        let moments = EnsembleMoments {
            g: e(0),
            h: e(1),
            ell: e(2),
            r1: e(3),
            r2: e(4),
            zeta: Estimate {
                mean: sigma_u2 * msd.mean,
                std_err: sigma_u2 * msd.std_err,
            },
            msd,
            ensemble: self.count,
        };
        (moments, e(6))
    }
}

/// Runs one ensemble member for `horizon` iterations with fixed `(mu, rho)`,
/// recording the per-iteration statistics.
fn simulate_member(setup: &EnsembleSetup, member: u64, horizon: usize, acc: &mut Accumulator) -> Result<()> {
    let len = setup.plant.len();
    let mut input_rng = stream_rng(setup.seed, member, Stream::Input);
    let mut history_rng = stream_rng(setup.seed, member, Stream::History);
    let mut noise_rng = stream_rng(setup.seed, member, Stream::Noise);
    let noise = Normal::new(0.0, setup.sigma_z2.sqrt()).expect("validated noise variance");

    // Full delay line from the first iteration on, so the regressor is
    // stationary throughout.
    let mut history = setup.input.generate(len - 1, &mut history_rng)?;
    history.reverse();
    history.push(0.0);
    let mut line = TappedDelayLine::with_history(&history);
    let xs = setup.input.generate(horizon, &mut input_rng)?;

    let cfg = &setup.filter;
    let mut state = FilterState::from_weights(setup.w0.clone().unwrap_or_else(|| vec![0.0; len]));
    let mut attractor = vec![0.0; len];
    let mut w_tilde = vec![0.0; len];
    for (n, &x) in xs.iter().enumerate() {
        let u = line.push(x);
        let z = noise.sample(&mut noise_rng);
        let d = dot(u, &setup.plant) + z;

        for i in 0..len {
            w_tilde[i] = state.w[i] - setup.plant[i];
        }
        match cfg.attractor {
            Some(mode) => weighted_attractor_with(&state.w, &cfg.partition, |_, nm| mode.beta(nm), &mut attractor)?,
            None => attractor.iter_mut().for_each(|a| *a = 0.0),
        }
        let uu = dot(u, u);
        let wu = dot(&w_tilde, u);
        let ub = dot(u, &attractor);
        let msd = dot(&w_tilde, &w_tilde);
        let sample_g = (z * z + wu * wu) * uu;
        let h = dot(&attractor, &attractor);
        let r2 = dot(&attractor, &w_tilde);

        state.step(cfg, u, d, cfg.mu, cfg.rho)?;
        let msd_next: f64 = state.w.iter().zip(&setup.plant).map(|(w, p)| (w - p) * (w - p)).sum();

        acc.add(
            n,
            &Sample {
                g: sample_g,
                h,
                ell: wu * ub,
                r1: wu * wu,
                r2,
                msd,
                msd_next,
            },
        );
    }
    acc.count += 1;
    Ok(())
}

fn run_ensemble(setup: &EnsembleSetup, horizon: usize, ensemble: usize) -> Result<Accumulator> {
    setup.validate()?;
    if ensemble < 2 {
        return Err(Error::Parameter(format!("ensemble needs >= 2 members, got {ensemble}")));
    }
    let chunks: Vec<(usize, usize)> = (0..ensemble)
        .step_by(ENSEMBLE_CHUNK)
        .map(|s| (s, (s + ENSEMBLE_CHUNK).min(ensemble)))
        .collect();
    let partials: Vec<Result<Accumulator>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Accumulator::new(horizon);
            for member in lo..hi {
                simulate_member(setup, member as u64, horizon, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(horizon);
    for partial in partials {
        total.merge(&partial?);
    }
    Ok(total)
}

/// Sample moments at 1-based iteration `n`, using the true weight error of
/// `ensemble` independent trajectories.
pub fn ensemble_moments(setup: &EnsembleSetup, n: usize, ensemble: usize) -> Result<EnsembleMoments> {
    if n == 0 {
        return Err(Error::Parameter("iteration index is 1-based".into()));
    }
    let acc = run_ensemble(setup, n, ensemble)?;
    let sigma_u2 = setup.input.stationary_variance();
    Ok(acc.moments(n - 1, sigma_u2).0)
}

/// Model-recursion check configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheck {
    pub setup: EnsembleSetup,
    pub horizon: usize,
    pub ensemble: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelCheckRow {
    pub n: usize,
    pub msd: f64,
    /// Ensemble `tr Q_{n+1} - tr Q_n`.
    pub actual_increment: f64,
    /// Increment predicted by the trace recursion with ensemble moments.
    pub model_increment: f64,
    pub relative_deviation: f64,
    /// `g` from ensemble samples and from its Gaussian closed form at the
    /// ensemble EMSE.
    pub g_sample: Estimate,
    pub g_closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub mu: f64,
    pub rho: f64,
    pub horizon: usize,
    pub ensemble: usize,
    pub max_relative_deviation: f64,
    pub rows: Vec<ModelCheckRow>,
}

fn relative_deviation(actual: f64, model: f64) -> f64 {
    let diff = (actual - model).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / actual.abs().max(f64::MIN_POSITIVE)
    }
}

/// Compares the ensemble MSD increments against the trace recursion
/// evaluated with ensemble moments, iteration by iteration.
pub fn validate_model_recursion(check: &ModelCheck) -> Result<ModelReport> {
    let setup = &check.setup;
    let acc = run_ensemble(setup, check.horizon, check.ensemble)?;
    let sigma_u2 = setup.input.stationary_variance();
    let len = setup.plant.len();
    let (mu, rho) = (setup.filter.mu, setup.filter.rho);
    let rows: Vec<ModelCheckRow> = (0..check.horizon)
        .map(|n| {
            let (m, msd_next) = acc.moments(n, sigma_u2);
            let actual = msd_next.mean - m.msd.mean;
            let model = m.means().next_msd(0.0, mu, rho);
            ModelCheckRow {
                n: n + 1,
                msd: m.msd.mean,
                actual_increment: actual,
                model_increment: model,
                relative_deviation: relative_deviation(actual, model),
                g_sample: m.g,
                g_closed_form: compute_g(setup.sigma_z2, sigma_u2, len, m.zeta.mean),
            }
        })
        .collect();
    let max_relative_deviation = rows.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
    Ok(ModelReport {
        mu,
        rho,
        horizon: check.horizon,
        ensemble: check.ensemble,
        max_relative_deviation,
        rows,
    })
}
