//! Seedable input processes, measurement noise and the piecewise-constant
//! plant used to produce `(u_n, d_n)` pairs with `d_n = u_n' w*_n + z_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Samples discarded before an AR(1) sequence is returned.
pub const AR1_BURN_IN: usize = 1000;

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Input = 0,
    Noise = 1,
    History = 2,
}

/// RNG for `stream` of Monte-Carlo run `run`. Distinct `(run, stream)` pairs
/// draw from non-overlapping ChaCha streams.
pub fn stream_rng(master_seed: u64, run: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run * 8 + stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputProcess {
    /// i.i.d. `N(0, variance)`.
    WhiteGaussian { variance: f64 },
    /// `u_n = alpha u_{n-1} + v_n` with `v_n` drawn from
    /// `0.5 N(a sigma_v, sigma_v^2) + 0.5 N(-a sigma_v, sigma_v^2)`.
    Ar1Mixture { alpha: f64, a: f64, sigma_v2: f64 },
}

impl InputProcess {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InputProcess::WhiteGaussian { variance } if variance > 0.0 && variance.is_finite() => Ok(()),
            InputProcess::WhiteGaussian { variance } => Err(Error::Parameter(format!(
                "input variance must be positive, got {variance}"
            ))),
            InputProcess::Ar1Mixture { alpha, a, sigma_v2 } => {
                if !(alpha.abs() < 1.0) {
                    return Err(Error::Parameter(format!("AR(1) needs |alpha| < 1, got {alpha}")));
                }
                if !(sigma_v2 > 0.0 && sigma_v2.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "mixture variance must be positive, got {sigma_v2}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::Parameter(format!("mixture offset must be finite, got {a}")));
                }
                Ok(())
            }
        }
    }

    /// Stationary variance implied by the parameters.
    pub fn stationary_variance(&self) -> f64 {
        match *self {
            InputProcess::WhiteGaussian { variance } => variance,
            InputProcess::Ar1Mixture { alpha, a, sigma_v2 } => sigma_v2 * (1.0 + a * a) / (1.0 - alpha * alpha),
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match *self {
            InputProcess::WhiteGaussian { variance } => white_gaussian(n, variance, rng),
            InputProcess::Ar1Mixture { alpha, a, sigma_v2 } => ar1_mixture(n, alpha, a, sigma_v2, rng),
        })
    }
}

fn white_gaussian<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, variance.sqrt()).expect("validated variance");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// One draw from the symmetric two-component mixture.
pub fn mixture_sample<R: Rng + ?Sized>(a: f64, sigma_v: f64, rng: &mut R) -> f64 {
    let centre = if rng.random::<bool>() { a * sigma_v } else { -a * sigma_v };
    let z: f64 = StandardNormal.sample(rng);
    centre + sigma_v * z
}

fn ar1_mixture<R: Rng + ?Sized>(n: usize, alpha: f64, a: f64, sigma_v2: f64, rng: &mut R) -> Vec<f64> {
    let sigma_v = sigma_v2.sqrt();
    let mut u = 0.0;
    for _ in 0..AR1_BURN_IN {
        u = alpha * u + mixture_sample(a, sigma_v, rng);
    }
    (0..n)
        .map(|_| {
            u = alpha * u + mixture_sample(a, sigma_v, rng);
            u
        })
        .collect()
}

pub fn gen_white_gaussian(n: usize, variance: f64, seed: u64) -> Result<Vec<f64>> {
    InputProcess::WhiteGaussian { variance }.generate(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn gen_ar1_mixture(n: usize, alpha: f64, a: f64, sigma_v2: f64, seed: u64) -> Result<Vec<f64>> {
    InputProcess::Ar1Mixture { alpha, a, sigma_v2 }.generate(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// The three 35-tap plants of the system-identification experiments:
/// group-sparse, dense, group-sparse.
pub fn paper_plants() -> [Vec<f64>; 3] {
    let mut w1 = vec![0.8, 0.5, 0.3, 0.2, 0.1];
    w1.extend([0.0; 15]);
    w1.extend([-0.05, -0.1, -0.2, -0.3, -0.5]);
    w1.extend([0.0; 5]);
    w1.extend([0.5, 0.25, 0.5, -0.25, -0.5]);

    let mut w2 = vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
    w2.extend([1.0; 17]);
    w2.extend([-0.1, -0.2, -0.3, -0.4, -0.5, -0.6, -0.7, -0.8, -0.9]);

    let mut w3 = vec![1.2, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.2, 0.5, 0.4];
    w3.extend([0.0; 15]);
    w3.extend([-0.4, -0.5, -0.2, -0.4, -0.5, -0.6, -0.7, -0.8, -0.9, -1.2]);

    debug_assert!(w1.len() == 35 && w2.len() == 35 && w3.len() == 35);
    [w1, w2, w3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSegment {
    /// First iteration (1-based) at which `weights` is active.
    pub start: usize,
    pub weights: Vec<f64>,
}

/// Piecewise-constant true weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSchedule {
    segments: Vec<PlantSegment>,
    total_iterations: usize,
}

impl PlantSchedule {
    pub fn new(segments: Vec<PlantSegment>, total_iterations: usize) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::Parameter("plant schedule needs a segment".into()))?;
        if first.start != 1 {
            return Err(Error::Parameter(format!(
                "first plant segment must start at iteration 1, got {}",
                first.start
            )));
        }
        let len = first.weights.len();
        if len == 0 {
            return Err(Error::Parameter("plant vectors must be non-empty".into()));
        }
        for pair in segments.windows(2) {
            if pair[1].start <= pair[0].start {
                return Err(Error::Parameter(format!(
                    "segment starts must increase, got {} after {}",
                    pair[1].start, pair[0].start
                )));
            }
        }
        for seg in &segments {
            check_len(len, seg.weights.len())?;
        }
        Ok(Self {
            segments,
            total_iterations,
        })
    }

    /// The three paper plants switched at iterations 1, `stage_len` and
    /// `2 * stage_len`, run for `3 * stage_len` iterations.
    pub fn paper(stage_len: usize) -> Result<Self> {
        if stage_len < 2 {
            return Err(Error::Parameter(format!("stage length must be >= 2, got {stage_len}")));
        }
        let [w1, w2, w3] = paper_plants();
        Self::new(
            vec![
                PlantSegment { start: 1, weights: w1 },
                PlantSegment { start: stage_len, weights: w2 },
                PlantSegment { start: 2 * stage_len, weights: w3 },
            ],
            3 * stage_len,
        )
    }

    pub fn len(&self) -> usize {
        self.segments[0].weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn with_total_iterations(mut self, total: usize) -> Self {
        self.total_iterations = total;
        self
    }

    pub fn segments(&self) -> &[PlantSegment] {
        &self.segments
    }

    /// Index of the segment active at 1-based iteration `n`.
    pub fn segment_index(&self, n: usize) -> usize {
        self.segments.partition_point(|s| s.start <= n).saturating_sub(1)
    }

    /// True weights at 1-based iteration `n`.
    pub fn active(&self, n: usize) -> &[f64] {
        &self.segments[self.segment_index(n)].weights
    }

    /// 1-based half-open iteration range of every segment, truncated to the
    /// schedule length. Segments starting after the end are omitted.
    pub fn stages(&self) -> Vec<std::ops::Range<usize>> {
        let end = self.total_iterations + 1;
        self.segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.start < end)
            .map(|(i, s)| {
                let next = self.segments.get(i + 1).map_or(end, |n| n.start.min(end));
                s.start..next
            })
            .collect()
    }
}

/// Tapped-delay-line regressor `[x_n, x_{n-1}, ..., x_{n-L+1}]`, zero-padded
/// at start-up.
#[derive(Debug, Clone, PartialEq)]
pub struct TappedDelayLine {
    taps: Vec<f64>,
}

impl TappedDelayLine {
    pub fn new(len: usize) -> Self {
        Self { taps: vec![0.0; len] }
    }

    /// Pre-fills the line with `history`, most recent sample first.
    pub fn with_history(history: &[f64]) -> Self {
        Self { taps: history.to_vec() }
    }

    pub fn push(&mut self, x: f64) -> &[f64] {
        let len = self.taps.len();
        if len > 0 {
            self.taps.copy_within(0..len - 1, 1);
            self.taps[0] = x;
        }
        &self.taps
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Input and desired sequences of one realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRealisation {
    pub input: Vec<f64>,
    pub desired: Vec<f64>,
}

impl PlantRealisation {
    /// Walks `(n, u_n, d_n, w*_n)` with `n` starting at 1.
    pub fn for_each_sample<F>(&self, schedule: &PlantSchedule, mut f: F)
    where
        F: FnMut(usize, &[f64], f64, &[f64]),
    {
        let mut line = TappedDelayLine::new(schedule.len());
        for (i, (&x, &d)) in self.input.iter().zip(&self.desired).enumerate() {
            let n = i + 1;
            let u = line.push(x);
            f(n, u, d, schedule.active(n));
        }
    }
}

/// Passes the scalar input through the scheduled plant via a tapped delay
/// line and adds `N(0, sigma_z2)` noise.
pub fn simulate_plant<R: Rng + ?Sized>(
    schedule: &PlantSchedule,
    input: &[f64],
    sigma_z2: f64,
    noise_rng: &mut R,
) -> Result<PlantRealisation> {
    if !(sigma_z2 >= 0.0 && sigma_z2.is_finite()) {
        return Err(Error::Parameter(format!("noise variance must be >= 0, got {sigma_z2}")));
    }
    let noise = Normal::new(0.0, sigma_z2.sqrt()).expect("validated noise variance");
    let mut line = TappedDelayLine::new(schedule.len());
    let desired = input
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = line.push(x);
            let w = schedule.active(i + 1);
            let clean: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
            clean + noise.sample(noise_rng)
        })
        .collect();
    Ok(PlantRealisation {
        input: input.to_vec(),
        desired,
    })
}
