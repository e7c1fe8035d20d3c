//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use grza_vp::filter::{run_sequence, FilterState, FixedParams};
use grza_vp::harness::cli::cli_main;
use grza_vp::harness::{run_experiment, ExperimentConfig, ExperimentOutput};
use grza_vp::oracle::{grid_minimize_quadratic, validate_model_recursion, EnsembleSetup, ModelCheck};
use grza_vp::partition::{
    attractor_direction, beta_weights, expand_group_vector, l12_norm, log_sum_penalty, AttractorMode, GroupPartition,
};
use grza_vp::signal::{gen_white_gaussian, paper_plants, InputProcess, TappedDelayLine};
use grza_vp::vp::{
    compute_g, compute_instantaneous_moments, compute_r1, one_step_plant_estimate, solve_optimal_params,
    MomentEstimates, VpConfig, VpState, DEFAULT_DET_TOL,
};
use grza_vp::FilterConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn vec_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y, tol))
}

fn vp_state(gamma: f64, gamma_prime: f64, sigma_z2: f64, zeta_min: f64, mu_max: Option<f64>) -> VpState {
    let mut cfg = VpConfig::new(35, sigma_z2, 1.0);
    cfg.gamma = gamma;
    cfg.gamma_prime = gamma_prime;
    cfg.mu_max = mu_max;
    cfg.xi_init = zeta_min;
    VpState::new(cfg, 35).unwrap()
}

/// Closed-form examples for the mixed norms, the update and the engine.
fn exact_examples() -> Outcome {
    const EPS: f64 = 1e-15;
    let start = Instant::now();
    let pairs = GroupPartition::from_ranges(4, &[0..2, 2..4]).unwrap();
    let one2 = GroupPartition::contiguous(2, 2).unwrap();
    let single3 = GroupPartition::singletons(3).unwrap();
    let gza = AttractorMode::Gza;
    let grza = AttractorMode::grza(0.1).unwrap();
    let diag = MomentEstimates { g: 2.0, h: 1.0, ell: 0.0, r1: 1.0, r2: 1.0 };

    let mut checks: Vec<(&str, bool)> = vec![
        ("l12 3-4-5", close(l12_norm(&[3.0, 4.0, 0.0, 0.0], &pairs).unwrap(), 5.0, EPS)),
        ("l12 zero", l12_norm(&[0.0; 4], &pairs).unwrap() == 0.0),
        ("l12 singletons", close(l12_norm(&[1.0, -2.0, 3.0], &single3).unwrap(), 6.0, EPS)),
        ("log-sum zero", log_sum_penalty(&[0.0; 4], &pairs, 0.1).unwrap() == 0.0),
        ("log-sum one group", close(log_sum_penalty(&[3.0, 4.0], &one2, 1.0).unwrap(), 6f64.ln(), EPS)),
        (
            "log-sum at epsilon",
            close(log_sum_penalty(&[0.1, 0.0, 0.0], &single3, 0.1).unwrap(), 2f64.ln(), EPS),
        ),
        ("log-sum bad epsilon", log_sum_penalty(&[1.0, 0.0], &one2, 0.0).is_err()),
        ("direction 3-4", vec_close(&attractor_direction(&[3.0, 4.0], &one2).unwrap(), &[0.6, 0.8], EPS)),
        ("direction zero group", attractor_direction(&[0.0, 0.0, 1.0, 0.0], &pairs).unwrap()[..2] == [0.0, 0.0]),
        (
            "direction scale invariant",
            vec_close(
                &attractor_direction(&[7.5, -2.0, 0.3, 1.0], &pairs).unwrap(),
                &attractor_direction(&[15.0, -4.0, 0.6, 2.0], &pairs).unwrap(),
                EPS,
            ),
        ),
        ("beta gza", beta_weights(&[1.0, 2.0, 0.0, 0.0], &pairs, gza).unwrap() == [1.0, 1.0]),
        ("beta grza 0.4", close(beta_weights(&[0.4, 0.0], &one2, grza).unwrap()[0], 2.0, EPS)),
        ("beta grza zero", close(beta_weights(&[0.0, 0.0], &one2, grza).unwrap()[0], 10.0, EPS)),
        (
            "expand",
            expand_group_vector(&[2.0, 3.0], &GroupPartition::from_ranges(3, &[0..2, 2..3]).unwrap()).unwrap()
                == [2.0, 2.0, 3.0],
        ),
        ("expand singletons", expand_group_vector(&[4.0, 5.0, 6.0], &single3).unwrap() == [4.0, 5.0, 6.0]),
        ("g at zero emse", close(compute_g(0.01, 1.0, 35, 0.0), 0.35, EPS)),
        ("g at 0.1", close(compute_g(0.01, 1.0, 35, 0.1), 4.05, EPS)),
        ("r1 identity", compute_r1(0.0) == 0.0 && compute_r1(0.24) == 0.24 && compute_r1(1e6) == 1e6),
        ("solve diagonal", {
            let o = solve_optimal_params(&diag, DEFAULT_DET_TOL).unwrap();
            close(o.mu, 0.5, EPS) && close(o.rho, 1.0, EPS) && o.closed_form
        }),
        ("solve fallback", {
            let m = MomentEstimates { g: 4.0, h: 0.0, ell: 0.0, r1: 1.0, r2: 0.0 };
            let o = solve_optimal_params(&m, DEFAULT_DET_TOL).unwrap();
            o.mu == 0.25 && o.rho == 0.0 && !o.closed_form
        }),
        ("solve bad g", solve_optimal_params(&MomentEstimates { g: 0.0, ..diag }, DEFAULT_DET_TOL).is_err()),
        ("msd recursion", {
            let m = MomentEstimates { g: 1.0, h: 1.0, ell: 0.0, r1: 1.0, r2: 0.0 };
            close(m.next_msd(2.0, 1.0, 0.0), 1.0, EPS) && m.next_msd(2.0, 0.0, 0.0) == 2.0
        }),
    ];

    // One-step plant estimate.
    let w = [0.3, -0.7];
    let (ws, wt) = one_step_plant_estimate(&w, 1.5, &[1.0, 2.0], 0.0, 1.0).unwrap();
    checks.push(("one-step r1=0", ws == w && wt == [0.0, 0.0]));
    let (_, wt) = one_step_plant_estimate(&w, 0.0, &[1.0, 2.0], 0.3, 1.0).unwrap();
    checks.push(("one-step e=0", wt.iter().all(|x| *x == 0.0)));
    let (ws, wt) = one_step_plant_estimate(&[0.0, 0.0], 2.0, &[1.0, -1.0], 0.1, 1.0).unwrap();
    checks.push(("one-step by hand", vec_close(&wt, &[-0.2, 0.2], EPS) && vec_close(&ws, &[0.2, -0.2], EPS)));
    checks.push(("one-step bad g", one_step_plant_estimate(&w, 1.0, &[1.0, 1.0], 0.1, 0.0).is_err()));

    // Instantaneous moments.
    checks.push((
        "moments zero attractor",
        compute_instantaneous_moments(&[0.5, 1.0], &[1.0, 2.0], &[0.0, 0.0]).unwrap() == (0.0, 0.0, 0.0),
    ));
    let (h, ell, r2) = compute_instantaneous_moments(&[0.6, 0.8], &[0.0, 0.0], &[0.6, 0.8]).unwrap();
    checks.push(("moments by hand", close(h, 1.0, EPS) && ell == 0.0 && close(r2, 1.0, EPS)));

    // Filter update.
    let lms = FilterConfig::new(GroupPartition::singletons(2).unwrap(), None).unwrap();
    let mut s = FilterState::from_weights(vec![1.0, 0.0]);
    let e = s.step(&lms, &[1.0, 1.0], 2.0, 0.1, 0.0).unwrap();
    checks.push(("lms step", e == 1.0 && vec_close(&s.w, &[1.1, 0.1], EPS)));
    let gza_cfg = FilterConfig::new(one2.clone(), Some(gza)).unwrap();
    let mut s = FilterState::from_weights(vec![3.0, 4.0]);
    s.step(&gza_cfg, &[0.0, 0.0], 0.0, 0.7, 0.5).unwrap();
    checks.push(("attractor-only step", vec_close(&s.w, &[2.7, 3.6], EPS)));

    // EMSE estimate with lower bound.
    checks.push(("emse gamma=0", close(vp_state(0.0, 0.9, 0.01, 0.0, None).estimate_emse(0.5), 0.24, EPS)));
    checks.push(("emse floor", vp_state(0.0, 0.9, 0.01, 0.05, None).estimate_emse(0.05) == 0.05));
    let mut quiet = vp_state(0.95, 0.9, 0.01, 0.0, None);
    checks.push(("emse quiescent", (0..100).all(|_| quiet.estimate_emse(0.0) == 0.0)));

    // Smoothing and clamping.
    let mut vp = vp_state(0.95, 0.9, 0.01, 0.0, Some(0.15));
    vp.mu_prev = 0.1;
    let (mu, _) = vp.smooth_and_clamp(0.2, 0.0);
    checks.push(("smooth below clamp", close(mu, 0.11, EPS) && vp.mu_prev == mu));
    let mut vp = vp_state(0.95, 0.9, 0.01, 0.0, Some(0.15));
    checks.push(("smooth clamp", vp.smooth_and_clamp(1e9, 0.0).0 == 0.15));
    let mut vp = vp_state(0.95, 0.0, 0.01, 0.0, Some(0.15));
    checks.push(("no smoothing", vp.smooth_and_clamp(0.05, 0.3) == (0.05, 0.3)));

    // Model propagation refreshes the lower bound.
    let mut vp = vp_state(0.95, 0.9, 0.01, 2.0, None);
    vp.propagate_model_msd(&MomentEstimates { g: 1.0, h: 1.0, ell: 0.0, r1: 1.0, r2: 0.0 }, 1.0, 0.0);
    checks.push(("propagate by hand", close(vp.xi_model, 1.0, EPS) && close(vp.zeta_min, 1.0, EPS)));
    let mut vp = vp_state(0.95, 0.9, 0.01, 0.001, None);
    vp.propagate_model_msd(&diag, 10.0, 0.0);
    checks.push(("propagate floor", vp.xi_model >= 0.0));

    let elapsed = start.elapsed();
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(name, _)| *name).collect();
    if !failed.is_empty() {
        return Err(format!("failed examples: {failed:?}"));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("{} examples took {elapsed:?}", checks.len()));
    }
    Ok(format!("{} examples exact, {elapsed:?}", checks.len()))
}

/// Closed form against a 401x401 grid on random positive-definite tuples.
///
/// The objective is an exact quadratic, so the grid minimum exceeds the true
/// minimum by `d' H d` with `d` the offset between them. Agreement within one
/// cell is judged in that metric: the excess may not exceed the cost of one
/// cell diagonal. With correlated `H` the nearest node in that metric can be
/// several cells away along the flat direction, so the per-axis offset is
/// reported but not gated.
fn closed_form_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_excess: f64 = 0.0;
    let mut worst_cells: f64 = 0.0;
    let mut within_axis_cell = 0;
    let mut worst_residual: f64 = 0.0;
    for k in 0..1000 {
        let g = 10f64.powf(rng.random_range(-1.0..1.0));
        let h = 10f64.powf(rng.random_range(-1.0..1.0));
        let ell = rng.random_range(-0.9..0.9) * (g * h).sqrt();
        let mu = 10f64.powf(rng.random_range(-3.0..0.0));
        let rho = 10f64.powf(rng.random_range(-3.0..0.0));
        let m = MomentEstimates { g, h, ell, r1: g * mu + ell * rho, r2: ell * mu + h * rho };

        let opt = solve_optimal_params(&m, DEFAULT_DET_TOL).map_err(|e| e.to_string())?;
        if !opt.closed_form {
            return Err(format!("tuple {k} took the fallback: {m:?}"));
        }
        let res = (g * opt.raw_mu + ell * opt.raw_rho - m.r1).hypot(ell * opt.raw_mu + h * opt.raw_rho - m.r2);
        worst_residual = worst_residual.max(res / m.r1.hypot(m.r2));

        // Box around the solution, jittered so it does not sit on a node.
        let mu_box = (0.0, 2.0 * opt.mu * rng.random_range(0.9..1.1));
        let rho_box = (0.0, 2.0 * opt.rho * rng.random_range(0.9..1.1));
        let grid = grid_minimize_quadratic(&m, mu_box, rho_box, 401).map_err(|e| e.to_string())?;

        let best = m.next_msd(0.0, opt.mu, opt.rho);
        let quad = |a: f64, b: f64| g * a * a + 2.0 * ell * a * b + h * b * b;
        let cell_cost = quad(grid.mu_step, grid.rho_step).max(quad(grid.mu_step, -grid.rho_step));
        let excess = (grid.value - best) / cell_cost;
        if excess < -1e-9 {
            return Err(format!("tuple {k}: grid node beats the closed form by {:.3e}", best - grid.value));
        }
        worst_excess = worst_excess.max(excess);

        let cells = ((grid.mu - opt.mu).abs() / grid.mu_step).max((grid.rho - opt.rho).abs() / grid.rho_step);
        worst_cells = worst_cells.max(cells);
        within_axis_cell += usize::from(cells <= 1.0);
    }
    let elapsed = start.elapsed();
    let msg = format!(
        "1000 tuples, worst grid excess {worst_excess:.3} cell costs, worst residual {worst_residual:.2e}, \
         {within_axis_cell}/1000 within one cell per axis (worst {worst_cells:.1}), {elapsed:?}"
    );
    if worst_excess > 1.0 || worst_residual > 1e-10 || elapsed >= Duration::from_secs(30) {
        return Err(msg);
    }
    Ok(msg)
}

/// Ensemble MSD increments against the trace recursion.
fn model_fidelity() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for rho in [0.0, 1e-4] {
        let filter = FilterConfig::new(GroupPartition::contiguous(35, 5).unwrap(), Some(AttractorMode::grza(0.1).unwrap()))
            .unwrap()
            .fixed(0.005, rho)
            .unwrap();
        let report = validate_model_recursion(&ModelCheck {
            setup: EnsembleSetup {
                plant: paper_plants()[0].clone(),
                input: InputProcess::WhiteGaussian { variance: 1.0 },
                sigma_z2: 0.01,
                filter,
                w0: None,
                seed: 7,
            },
            horizon: 50,
            ensemble: 5000,
        })
        .map_err(|e| e.to_string())?;
        ok &= report.max_relative_deviation <= 0.05;
        parts.push(format!("rho={rho}: {:.4}", report.max_relative_deviation));
    }
    let msg = format!("max relative deviation {} (limit 0.05), {:?}", parts.join(", "), start.elapsed());
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_stream(len: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x = gen_white_gaussian(n, 1.0, seed).unwrap();
    let noise = gen_white_gaussian(n, 0.01, seed + 1).unwrap();
    let plant = &paper_plants()[0][..len];
    let mut line = TappedDelayLine::new(len);
    let mut us = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    for (xi, zi) in x.iter().zip(&noise) {
        let u = line.push(*xi).to_vec();
        ds.push(u.iter().zip(plant).map(|(a, b)| a * b).sum::<f64>() + zi);
        us.push(u);
    }
    (us, ds)
}

fn trajectory(cfg: &FilterConfig, us: &[Vec<f64>], ds: &[f64]) -> Vec<Vec<f64>> {
    run_sequence(cfg, us.iter().map(Vec::as_slice).zip(ds.iter().copied()), &mut FixedParams::from(cfg))
        .unwrap()
        .into_iter()
        .map(|s| s.w)
        .collect()
}

/// Independent elementwise zero-attracting LMS.
fn scalar_za_lms(us: &[Vec<f64>], ds: &[f64], mu: f64, rho: f64) -> Vec<Vec<f64>> {
    let len = us[0].len();
    let mut w = vec![0.0; len];
    let mut out = vec![w.clone()];
    for (u, d) in us.iter().zip(ds) {
        let mut y = 0.0;
        for i in 0..len {
            y += w[i] * u[i];
        }
        let e = d - y;
        for i in 0..len {
            let sign = if w[i] > 0.0 {
                1.0
            } else if w[i] < 0.0 {
                -1.0
            } else {
                0.0
            };
            w[i] = w[i] + mu * e * u[i] - rho * sign;
        }
        out.push(w.clone());
    }
    out
}

/// Bitwise reduction identities between the update variants.
fn reduction_identities() -> Outcome {
    let start = Instant::now();
    let (us, ds) = random_stream(35, 5000, 31);
    let p = GroupPartition::contiguous(35, 5).unwrap();
    let make = |mode: Option<AttractorMode>, mu: f64, rho: f64| {
        FilterConfig::new(p.clone(), mode).unwrap().fixed(mu, rho).unwrap()
    };
    let grza = AttractorMode::grza(0.1).unwrap();

    let lms = trajectory(&make(None, 0.01, 0.0), &us, &ds);
    let gza0 = trajectory(&make(Some(AttractorMode::Gza), 0.01, 0.0), &us, &ds);
    let grza0 = trajectory(&make(Some(grza), 0.01, 0.0), &us, &ds);
    if lms != gza0 || lms != grza0 {
        return Err("rho = 0 trajectories differ from plain LMS".into());
    }

    let gza_cfg = make(Some(AttractorMode::Gza), 0.01, 2e-4);
    let gza = trajectory(&gza_cfg, &us, &ds);
    let mut forced = FilterState::zeros(35);
    let mut forced_traj = vec![forced.w.clone()];
    for (u, d) in us.iter().zip(&ds) {
        forced.step_with_beta(&p, |_, _| 1.0, u, *d, 0.01, 2e-4).unwrap();
        forced_traj.push(forced.w.clone());
    }
    if forced_traj != gza {
        return Err("GRZA with beta = 1 differs from GZA".into());
    }
    if trajectory(&make(Some(grza), 0.01, 2e-4), &us, &ds) == gza {
        return Err("reweighting had no effect; the comparison above is vacuous".into());
    }

    let singles = FilterConfig::new(GroupPartition::singletons(35).unwrap(), Some(AttractorMode::Gza))
        .unwrap()
        .fixed(0.01, 2e-4)
        .unwrap();
    if trajectory(&singles, &us, &ds) != scalar_za_lms(&us, &ds, 0.01, 2e-4) {
        return Err("singleton GZA differs from elementwise ZA-LMS".into());
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(5) {
        return Err(format!("identities hold but took {elapsed:?}"));
    }
    Ok(format!("3 identities bitwise over 5000 iterations, {elapsed:?}"))
}

fn steady(out: &ExperimentOutput, name: &str) -> Vec<f64> {
    out.summary(name).expect("configured algorithm").steady_state_db.clone()
}

fn stage_table(out: &ExperimentOutput) -> String {
    out.summaries
        .iter()
        .map(|s| {
            let v: Vec<String> = s.steady_state_db.iter().map(|x| format!("{x:.1}")).collect();
            format!("{} [{}]", s.name, v.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Orderings of the white-input experiment.
fn experiment_one() -> Outcome {
    let start = Instant::now();
    let out = run_experiment(&ExperimentConfig::paper_exp1()).map_err(|e| e.to_string())?;
    let [lms, gza, grza, vgza, vgrza] = ["lms", "gza", "grza", "vp-gza", "vp-grza"].map(|n| steady(&out, n));
    let mut problems = Vec::new();
    for stage in [0, 2] {
        for (better, worse, what) in [
            (&vgrza, &vgza, "vp-grza < vp-gza"),
            (&vgza, &lms, "vp-gza < lms"),
            (&vgza, &gza, "vp-gza < gza"),
            (&vgrza, &grza, "vp-grza < grza"),
        ] {
            if !(better[stage] + 2.0 <= worse[stage]) {
                problems.push(format!("stage {}: {what} by >= 2 dB", stage + 1));
            }
        }
    }
    for (vp, what) in [(&vgza, "vp-gza"), (&vgrza, "vp-grza")] {
        if !(vp[1] <= lms[1]) {
            problems.push(format!("stage 2: {what} <= lms"));
        }
    }
    let msg = format!("{} ({:?})", stage_table(&out), start.elapsed());
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{}; {msg}", problems.join(", ")))
    }
}

/// Lowest steady state and decaying parameter traces with coloured input.
fn experiment_two() -> Outcome {
    let start = Instant::now();
    let out = run_experiment(&ExperimentConfig::paper_exp2()).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let best = steady(&out, "vp-grza");
    for stage in [0, 2] {
        for s in out.summaries.iter().filter(|s| s.name != "vp-grza") {
            if !(best[stage] < s.steady_state_db[stage]) {
                problems.push(format!("stage {}: vp-grza not below {}", stage + 1, s.name));
            }
        }
    }
    let mut min_ratio = f64::INFINITY;
    for name in ["vp-gza", "vp-grza"] {
        let curve = out.curve(name).expect("configured algorithm");
        for (trace, label) in [(curve.mu.as_ref(), "mu"), (curve.lambda.as_ref(), "lambda")] {
            let trace = trace.ok_or_else(|| format!("{name} has no {label} trace"))?;
            for (k, stage) in out.stages.iter().enumerate() {
                let (lo, hi) = (stage.start - 1, stage.end - 1);
                let peak = trace[lo..(lo + 500).min(hi)].iter().cloned().fold(f64::MIN, f64::max);
                let tail = &trace[hi.saturating_sub(1000).max(lo)..hi];
                let ratio = peak / (tail.iter().sum::<f64>() / tail.len() as f64);
                min_ratio = min_ratio.min(ratio);
                if !(ratio >= 3.0) {
                    problems.push(format!("{name} {label} stage {}: ratio {ratio:.2}", k + 1));
                }
            }
        }
    }
    let msg = format!("{}; smallest spike ratio {min_ratio:.1} ({:?})", stage_table(&out), start.elapsed());
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{}; {msg}", problems.join(", ")))
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Byte-identical output of the built-in run across worker counts.
fn determinism() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference = None;
    for workers in 1..=8 {
        let dir = tmp.path().join(format!("w{workers}"));
        let args = ["grza-vp", "paper-exp1", "--quiet", "--workers", &workers.to_string(), "--out", dir.to_str().unwrap()];
        let code = cli_main(args);
        if code != 0 {
            return Err(format!("paper-exp1 with {workers} workers exited with {code}"));
        }
        let files = read_dir_sorted(&dir);
        match &reference {
            None => reference = Some(files),
            Some(r) if *r == files => {}
            Some(_) => return Err(format!("{workers} workers changed the output")),
        }
    }
    let n = reference.map_or(0, |r| r.len());
    Ok(format!("{n} files identical for 1..=8 workers ({:?})", start.elapsed()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 closed-form examples", exact_examples),
        ("2 closed-form optimality", closed_form_optimality),
        ("3 transient-model fidelity", model_fidelity),
        ("4 reduction identities", reduction_identities),
        ("5 experiment 1 orderings", experiment_one),
        ("6 experiment 2 behaviour", experiment_two),
        ("7 determinism across workers", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
