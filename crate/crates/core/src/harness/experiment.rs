//! Monte-Carlo ensembles of the configured algorithms.
//!
//! Every run draws one input/noise realisation and feeds it to all
//! algorithms, so comparisons are paired. Runs are simulated in parallel in
//! fixed-size batches and summed in run-index order, which keeps the output
//! independent of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{FilterConfig, FilterState};
use crate::signal::{simulate_plant, stream_rng, PlantRealisation, PlantSchedule, Stream, TappedDelayLine};
use crate::vp::{estimate_noise_variance, VpState};

use super::config::{AlgorithmKind, AlgorithmSpec, ExperimentConfig};

/// Runs simulated concurrently before their sums are folded in.
const RUN_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveMeta {
    pub config_hash: String,
    pub master_seed: u64,
    /// Mean over runs of the sample power of the scalar input.
    pub measured_input_power: f64,
    pub runs_used: usize,
    pub diverged_runs: usize,
}

/// Run-averaged learning curve of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub name: String,
    pub kind: AlgorithmKind,
    pub variable: bool,
    /// `E ||w_n - w*_n||^2` at `n = 1..=iterations`.
    pub msd: Vec<f64>,
    /// Mean applied step size (variable-parameter algorithms only).
    pub mu: Option<Vec<f64>>,
    /// Mean of `rho_n / mu_n` (variable-parameter algorithms only).
    pub lambda: Option<Vec<f64>>,
    pub meta: CurveMeta,
}

impl LearningCurve {
    pub fn msd_db(&self) -> Vec<f64> {
        self.msd.iter().map(|&m| to_db(m)).collect()
    }

    pub fn len(&self) -> usize {
        self.msd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msd.is_empty()
    }

    /// Mean linear MSD over the last `window` iterations of the 1-based
    /// iteration range `stage`, in dB.
    pub fn steady_state_db(&self, stage: std::ops::Range<usize>, window: usize) -> f64 {
        let end = (stage.end - 1).min(self.msd.len());
        let start = (stage.start - 1).max(end.saturating_sub(window));
        if end <= start {
            return f64::NAN;
        }
        let slice = &self.msd[start..end];
        to_db(slice.iter().sum::<f64>() / slice.len() as f64)
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Per-algorithm statistics besides the curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub name: String,
    pub kind: AlgorithmKind,
    pub variable: bool,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub runs_used: usize,
    pub diverged_runs: usize,
    /// Fraction of parameter-engine iterations that used the fallback solve.
    pub fallback_rate: Option<f64>,
    /// Steady-state MSD per plant stage, dB.
    pub steady_state_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub curves: Vec<LearningCurve>,
    pub summaries: Vec<AlgorithmSummary>,
    /// 1-based half-open iteration ranges of the plant stages.
    pub stages: Vec<std::ops::Range<usize>>,
    pub measured_input_power: f64,
    pub nominal_input_power: f64,
}

impl ExperimentOutput {
    pub fn curve(&self, name: &str) -> Option<&LearningCurve> {
        self.curves.iter().find(|c| c.name == name)
    }

    pub fn summary(&self, name: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

/// One algorithm over one run.
#[derive(Debug, Clone)]
struct AlgorithmTrace {
    msd: Vec<f64>,
    mu: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    fallbacks: usize,
}

#[derive(Debug)]
struct RunOutcome {
    input_power: f64,
    traces: Vec<std::result::Result<AlgorithmTrace, Error>>,
}

#[derive(Debug, Clone)]
struct Totals {
    msd: Vec<f64>,
    mu: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    runs_used: usize,
    diverged: usize,
    fallbacks: usize,
}

impl Totals {
    fn new(iterations: usize, variable: bool) -> Self {
        Self {
            msd: vec![0.0; iterations],
            mu: variable.then(|| vec![0.0; iterations]),
            lambda: variable.then(|| vec![0.0; iterations]),
            runs_used: 0,
            diverged: 0,
            fallbacks: 0,
        }
    }

    fn add(&mut self, trace: &AlgorithmTrace) {
        fn acc(total: &mut [f64], x: &[f64]) {
            total.iter_mut().zip(x).for_each(|(t, v)| *t += v);
        }
        acc(&mut self.msd, &trace.msd);
        if let (Some(t), Some(x)) = (self.mu.as_mut(), trace.mu.as_ref()) {
            acc(t, x);
        }
        if let (Some(t), Some(x)) = (self.lambda.as_mut(), trace.lambda.as_ref()) {
            acc(t, x);
        }
        self.fallbacks += trace.fallbacks;
        self.runs_used += 1;
    }
}

/// Everything derived from the configuration once per experiment.
struct Prepared {
    schedule: PlantSchedule,
    filters: Vec<FilterConfig>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let schedule = cfg.schedule()?;
    let filters = cfg
        .algorithms
        .iter()
        .map(|a| cfg.filter_config(a))
        .collect::<Result<_>>()?;
    Ok(Prepared { schedule, filters })
}

fn make_engine(cfg: &ExperimentConfig, alg: &AlgorithmSpec, realisation: &PlantRealisation, schedule: &PlantSchedule) -> Result<VpState> {
    let mut vp_cfg = cfg.vp_config(alg)?;
    if cfg.vp.noise_warmup > 0 {
        let mut line = TappedDelayLine::new(cfg.filter_len);
        let samples: Vec<(Vec<f64>, f64)> = realisation
            .input
            .iter()
            .zip(&realisation.desired)
            .take(cfg.vp.noise_warmup.min(schedule.total_iterations()))
            .map(|(&x, &d)| (line.push(x).to_vec(), d))
            .collect();
        let skip = samples.len() / 2;
        let estimate = estimate_noise_variance(
            samples.iter().map(|(u, d)| (u.as_slice(), *d)),
            cfg.filter_len,
            cfg.vp.noise_warmup_mu,
            skip,
        )?;
        vp_cfg.sigma_z2 = estimate.max(f64::MIN_POSITIVE);
    }
    let state = VpState::new(vp_cfg, cfg.filter_len)?;
    Ok(if cfg.vp.track_input_power {
        state.with_power_tracking(cfg.vp.power_forgetting)
    } else {
        state
    })
}

fn trace_algorithm(
    cfg: &ExperimentConfig,
    alg: &AlgorithmSpec,
    filter: &FilterConfig,
    schedule: &PlantSchedule,
    realisation: &PlantRealisation,
) -> Result<AlgorithmTrace> {
    let iterations = realisation.input.len();
    let mut engine = if alg.variable {
        Some(make_engine(cfg, alg, realisation, schedule)?)
    } else {
        None
    };
    let mut state = FilterState::zeros(cfg.filter_len);
    let mut line = TappedDelayLine::new(cfg.filter_len);
    let mut msd = Vec::with_capacity(iterations);
    let mut mu_trace = engine.as_ref().map(|_| Vec::with_capacity(iterations));
    let mut lambda_trace = engine.as_ref().map(|_| Vec::with_capacity(iterations));

    for (i, (&x, &d)) in realisation.input.iter().zip(&realisation.desired).enumerate() {
        let n = i + 1;
        let u = line.push(x);
        let w_star = schedule.active(n);
        msd.push(state.w.iter().zip(w_star).map(|(w, t)| (w - t) * (w - t)).sum());

        let (mu, rho) = match engine.as_mut() {
            Some(vp) => {
                let e = d - state.predict(u)?;
                let step = vp.iterate(&state, filter, u, e)?;
                (step.mu, step.rho)
            }
            None => (filter.mu, filter.rho),
        };
        if let (Some(m), Some(l)) = (mu_trace.as_mut(), lambda_trace.as_mut()) {
            m.push(mu);
            l.push(if mu > 0.0 { rho / mu } else { 0.0 });
        }
        state.step(filter, u, d, mu, rho)?;
    }
    Ok(AlgorithmTrace {
        msd,
        mu: mu_trace,
        lambda: lambda_trace,
        fallbacks: engine.map_or(0, |vp| vp.fallbacks),
    })
}

fn simulate_run(cfg: &ExperimentConfig, prepared: &Prepared, run: usize) -> Result<RunOutcome> {
    let iterations = cfg.iterations;
    let mut input_rng = stream_rng(cfg.master_seed, run as u64, Stream::Input);
    let mut noise_rng = stream_rng(cfg.master_seed, run as u64, Stream::Noise);
    let input = cfg.input.process().generate(iterations, &mut input_rng)?;
    let realisation = simulate_plant(&prepared.schedule, &input, cfg.noise_variance, &mut noise_rng)?;
    let input_power = if iterations == 0 {
        0.0
    } else {
        input.iter().map(|x| x * x).sum::<f64>() / iterations as f64
    };
    let traces = cfg
        .algorithms
        .iter()
        .zip(&prepared.filters)
        .map(|(alg, filter)| trace_algorithm(cfg, alg, filter, &prepared.schedule, &realisation))
        .collect();
    Ok(RunOutcome { input_power, traces })
}

/// Runs the full ensemble on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(cfg)?;
    let iterations = cfg.iterations;
    let mut totals: Vec<Totals> = cfg
        .algorithms
        .iter()
        .map(|a| Totals::new(iterations, a.variable))
        .collect();
    let mut power_sum = 0.0;

    for batch_start in (0..cfg.runs).step_by(RUN_BATCH) {
        let batch_end = (batch_start + RUN_BATCH).min(cfg.runs);
        let outcomes: Vec<Result<RunOutcome>> = (batch_start..batch_end)
            .into_par_iter()
            .map(|run| simulate_run(cfg, &prepared, run))
            .collect();
        for outcome in outcomes {
            let outcome = outcome?;
            power_sum += outcome.input_power;
            for (total, trace) in totals.iter_mut().zip(&outcome.traces) {
                match trace {
                    Ok(trace) => total.add(trace),
                    Err(Error::Divergence { .. }) => total.diverged += 1,
                    Err(other) => return Err(Error::Model(other.to_string())),
                }
            }
        }
    }

    let measured_input_power = power_sum / cfg.runs as f64;
    let config_hash = cfg.hash()?;
    let schedule = &prepared.schedule;
    let stages = schedule.stages();

    let mut curves = Vec::with_capacity(totals.len());
    let mut summaries = Vec::with_capacity(totals.len());
    for (alg, total) in cfg.algorithms.iter().zip(totals) {
        let scale = 1.0 / total.runs_used as f64;
        let mean = |v: Vec<f64>| v.into_iter().map(|x| x * scale).collect::<Vec<f64>>();
        let curve = LearningCurve {
            name: alg.name.clone(),
            kind: alg.kind,
            variable: alg.variable,
            msd: mean(total.msd),
            mu: total.mu.map(mean),
            lambda: total.lambda.map(mean),
            meta: CurveMeta {
                config_hash: config_hash.clone(),
                master_seed: cfg.master_seed,
                measured_input_power,
                runs_used: total.runs_used,
                diverged_runs: total.diverged,
            },
        };
        let vp_iterations = total.runs_used * iterations;
        summaries.push(AlgorithmSummary {
            name: alg.name.clone(),
            kind: alg.kind,
            variable: alg.variable,
            mu: (!alg.variable).then_some(alg.mu),
            rho: (!alg.variable).then_some(alg.rho),
            runs_used: total.runs_used,
            diverged_runs: total.diverged,
            fallback_rate: (alg.variable && vp_iterations > 0)
                .then(|| total.fallbacks as f64 / vp_iterations as f64),
            steady_state_db: stages
                .iter()
                .map(|s| curve.steady_state_db(s.clone(), cfg.steady_window))
                .collect(),
        });
        curves.push(curve);
    }

    Ok(ExperimentOutput {
        config: cfg.clone(),
        config_hash,
        curves,
        summaries,
        stages,
        measured_input_power,
        nominal_input_power: cfg.input.process().stationary_variance(),
    })
}

/// Runs the ensemble on a dedicated pool of `workers` threads
/// (`None`: rayon's default).
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    match workers {
        None => run_experiment(cfg),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| run_experiment(cfg))
        }
    }
}
