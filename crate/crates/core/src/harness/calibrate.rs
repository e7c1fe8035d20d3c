//! Calibration of the fixed-parameter baselines.
//!
//! The step size is chosen so that plain LMS starts out as fast as
//! VP-GRZA-LMS: both are summarised by the least-squares slope of the dB MSD
//! over the first iterations, and `mu` is the grid point whose slope is
//! closest to the target. A fixed step cannot always match the adaptive one,
//! because LMS reaches its noise floor within the window once `mu` is large,
//! which flattens the fitted slope. The shrinkage of each attracting
//! baseline is then the value minimising its first-stage steady-state MSD at
//! that step size.

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::{AlgorithmKind, AlgorithmSpec, ExperimentConfig};
use super::experiment::{run_experiment, LearningCurve};

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub runs: usize,
    /// Iterations fitted by the slope.
    pub window: usize,
    pub mu_grid: usize,
    pub mu_min: f64,
    /// Shrinkage candidates besides zero, log-spaced.
    pub rho_grid: usize,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            runs: 20,
            window: 500,
            mu_grid: 48,
            mu_min: 1e-3,
            rho_grid: 25,
            rho_min: 1e-6,
            rho_max: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub experiment: String,
    pub seed: u64,
    pub runs: usize,
    pub target_slope_db: f64,
    pub mu: f64,
    pub lms_slope_db: f64,
    pub rho_gza: f64,
    pub rho_grza: f64,
    /// `(mu, slope)` per grid point.
    pub mu_scan: Vec<(f64, f64)>,
    /// `(rho, stage-1 steady-state dB)` per grid point.
    pub gza_scan: Vec<(f64, f64)>,
    pub grza_scan: Vec<(f64, f64)>,
}

/// Least-squares slope of `10 log10(msd)` against the iteration index over
/// the first `window` samples, in dB per iteration.
pub fn initial_slope_db(msd: &[f64], window: usize) -> f64 {
    let n = window.min(msd.len());
    if n < 2 {
        return f64::NAN;
    }
    let x_mean = (n as f64 - 1.0) / 2.0;
    let ys: Vec<f64> = msd[..n].iter().map(|m| 10.0 * m.log10()).collect();
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let (sxy, sxx) = ys.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (i, y)| {
        let dx = i as f64 - x_mean;
        (sxy + dx * (y - y_mean), sxx + dx * dx)
    });
    sxy / sxx
}

pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

fn find<'a>(curves: &'a [LearningCurve], name: &str) -> Result<&'a LearningCurve> {
    curves
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Model(format!("missing curve {name}")))
}

pub fn calibrate(base: &ExperimentConfig, opts: &CalibrationOptions) -> Result<CalibrationReport> {
    if opts.window < 2 || opts.mu_grid < 1 || opts.runs < 1 {
        return Err(Error::Parameter("calibration needs runs >= 1, window >= 2 and a non-empty grid".into()));
    }
    let mut cfg = base.clone();
    cfg.runs = opts.runs;
    cfg.master_seed = base.master_seed.wrapping_add(1);
    cfg.output_dir = None;

    // Largest step with a comfortable mean-square stability margin.
    let power = cfg.input.process().stationary_variance();
    let mu_cap = 1.0 / (power * (cfg.filter_len as f64 + 2.0));
    let mus = geometric_grid(opts.mu_min, mu_cap, opts.mu_grid);

    let mut slope_cfg = cfg.clone();
    slope_cfg.iterations = opts.window;
    slope_cfg.algorithms = vec![AlgorithmSpec::variable("target", AlgorithmKind::Grza)];
    slope_cfg
        .algorithms
        .extend(mus.iter().enumerate().map(|(i, &mu)| AlgorithmSpec::fixed(&format!("lms{i}"), AlgorithmKind::Lms, mu, 0.0)));
    let out = run_experiment(&slope_cfg)?;
    let target = initial_slope_db(&find(&out.curves, "target")?.msd, opts.window);
    let mu_scan: Vec<(f64, f64)> = mus
        .iter()
        .enumerate()
        .map(|(i, &mu)| Ok((mu, initial_slope_db(&find(&out.curves, &format!("lms{i}"))?.msd, opts.window))))
        .collect::<Result<_>>()?;
    let &(mu, lms_slope) = mu_scan
        .iter()
        .filter(|(_, s)| s.is_finite())
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .ok_or_else(|| Error::Model("no finite LMS slope on the grid".into()))?;

    let mut rhos = vec![0.0];
    rhos.extend(geometric_grid(opts.rho_min, opts.rho_max, opts.rho_grid));
    let stage_end = cfg.schedule()?.stages()[0].end - 1;
    let mut rho_cfg = cfg.clone();
    rho_cfg.iterations = stage_end.min(cfg.iterations);
    rho_cfg.algorithms = Vec::new();
    for (i, &rho) in rhos.iter().enumerate() {
        rho_cfg.algorithms.push(AlgorithmSpec::fixed(&format!("gza{i}"), AlgorithmKind::Gza, mu, rho));
        rho_cfg.algorithms.push(AlgorithmSpec::fixed(&format!("grza{i}"), AlgorithmKind::Grza, mu, rho));
    }
    let out = run_experiment(&rho_cfg)?;
    let scan = |prefix: &str| -> Vec<(f64, f64)> {
        rhos.iter()
            .enumerate()
            .map(|(i, &rho)| {
                let s = out.summary(&format!("{prefix}{i}")).expect("configured above");
                let db = if s.diverged_runs > 0 { f64::INFINITY } else { s.steady_state_db[0] };
                (rho, db)
            })
            .collect()
    };
    let best = |scan: &[(f64, f64)]| scan.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map_or(0.0, |p| p.0);
    let gza_scan = scan("gza");
    let grza_scan = scan("grza");

    Ok(CalibrationReport {
        experiment: base.name.clone(),
        seed: cfg.master_seed,
        runs: cfg.runs,
        target_slope_db: target,
        mu,
        lms_slope_db: lms_slope,
        rho_gza: best(&gza_scan),
        rho_grza: best(&grza_scan),
        mu_scan,
        gza_scan,
        grza_scan,
    })
}
