//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion does.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gradsamp::minnorm::{min_norm_point, scaled_tolerance, GradientBundle};
use gradsamp::model::{
    DirectionMode, GsParams, IterationRecord, LineSearchMode, NondiffStrategy, Objective,
    SamplingMode, ScalingMode, SolveStatus, VariantConfig,
};
use gradsamp::oracle::{brute_force_min_norm, fd_gradient};
use gradsamp::problems::{corpus, helou, l1, maxq, sd_stall, Problem};
use gradsamp::sampler::{uniform_box, BallSampler};
use gradsamp::solver::{gs_step, SolveError, SolverState};
use gradsamp::vecops::{dist, dot, norm, norm_sq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Everything one run produced, kept even when it ends in a hard error.
struct Run {
    records: Vec<IterationRecord>,
    bundles: Vec<GradientBundle>,
    status: Option<SolveStatus>,
    error: Option<SolveError>,
    f_final: f64,
}

fn drive<O: Objective + ?Sized>(obj: &O, x0: &[f64], p: &GsParams) -> Run {
    let p = gradsamp::model::validate_params(p, obj.dim()).expect("valid parameters");
    let mut run = Run {
        records: vec![],
        bundles: vec![],
        status: None,
        error: None,
        f_final: f64::NAN,
    };
    let mut state = match SolverState::new(obj, x0, &p) {
        Ok(s) => s,
        Err(e) => {
            run.error = Some(e);
            return run;
        }
    };
    for _ in 0..p.max_iter {
        match gs_step(&mut state, &p, obj) {
            Ok(rec) => {
                run.bundles.push(state.last_bundle().unwrap().clone());
                let done = rec.terminal;
                run.records.push(rec);
                if done {
                    break;
                }
            }
            Err(e) => {
                run.error = Some(e);
                break;
            }
        }
    }
    run.f_final = state.eval.value;
    if run.error.is_none() {
        let last = run.records.last().unwrap();
        run.status = Some(gradsamp::model::classify_termination(last, &p));
    }
    run
}

fn params(x0: &[f64], seed: u64, variant: VariantConfig) -> GsParams {
    let mut p = GsParams::for_start(x0);
    p.seed = seed;
    p.variant = variant;
    p
}

/// Start used for the random-start criteria.
fn random_start(n: usize, seed: u64) -> Vec<f64> {
    uniform_box(n, 1.0, 1000 + seed)
}

fn trust() -> VariantConfig {
    VariantConfig {
        direction_mode: DirectionMode::TrustRegion,
        ..VariantConfig::default()
    }
}

fn bb() -> VariantConfig {
    VariantConfig {
        scaling_mode: ScalingMode::Bb {
            alpha_min: 1e-3,
            alpha_max: 1e3,
        },
        ..VariantConfig::default()
    }
}

fn adaptive() -> VariantConfig {
    VariantConfig {
        sampling_mode: SamplingMode::Adaptive { m_min: 2, m_max: 32 },
        reuse_gradients: true,
        ..VariantConfig::default()
    }
}

fn suite_variants() -> Vec<(&'static str, VariantConfig)> {
    vec![
        ("fixed", VariantConfig::default()),
        ("adaptive", adaptive()),
        ("trust", trust()),
        ("bb", bb()),
        (
            "matrix",
            VariantConfig {
                scaling_mode: ScalingMode::Matrix {
                    lambda_min: 1e-3,
                    lambda_max: 1e3,
                },
                ..VariantConfig::default()
            },
        ),
        (
            "limited",
            VariantConfig {
                line_search_mode: LineSearchMode::Limited { max_evals: 4 },
                ..VariantConfig::default()
            },
        ),
        (
            "perturb-direction",
            VariantConfig {
                nondiff_strategy: NondiffStrategy::PerturbDirection,
                ..VariantConfig::default()
            },
        ),
        (
            "nonmonotone",
            VariantConfig {
                line_search_mode: LineSearchMode::Nonmonotone { delta0: None },
                ..VariantConfig::default()
            },
        ),
        (
            "drop-center",
            VariantConfig {
                line_search_mode: LineSearchMode::Nonmonotone { delta0: None },
                nondiff_strategy: NondiffStrategy::DropCenterGradient,
                ..VariantConfig::default()
            },
        ),
    ]
}

/// The benchmark suite: every corpus problem at n = 4 from its default
/// start, l1 and maxq at n = 10 from random starts, all variants, 3 seeds.
fn suite() -> Vec<(String, VariantConfig, Run)> {
    let mut out = vec![];
    for (vname, v) in suite_variants() {
        for seed in 1..=3 {
            let mut problems: Vec<(Problem, Vec<f64>)> = corpus(4)
                .into_iter()
                .filter(|p| !p.experimental)
                .map(|p| {
                    let s = p.start.clone();
                    (p, s)
                })
                .collect();
            problems.push((l1(10), random_start(10, seed)));
            problems.push((maxq(10), random_start(10, seed)));
            for (prob, x0) in problems {
                let mut p = params(&x0, seed, v);
                p.max_iter = 3000;
                let run = drive(&prob, &x0, &p);
                out.push((format!("{}/{vname}/s{seed}", prob.name), v, run));
            }
        }
    }
    out
}

fn is_monotone(v: &VariantConfig) -> bool {
    !matches!(v.line_search_mode, LineSearchMode::Nonmonotone { .. })
}

/// Criterion 2 on one run; returns the number of records checked.
fn projection_certificate(label: &str, run: &Run) -> Result<usize, String> {
    for (r, b) in run.records.iter().zip(&run.bundles) {
        let at = || format!("{label} k={}", r.k);
        ensure(r.lambda.len() == b.len(), || format!("{}: lambda length", at()))?;
        ensure(r.lambda.iter().all(|&l| l >= -1e-12), || {
            format!("{}: negative weight {:?}", at(), r.lambda)
        })?;
        let s: f64 = r.lambda.iter().sum();
        ensure((s - 1.0).abs() <= 1e-12, || format!("{}: weights sum to {s}", at()))?;
        let combo = b.combine(&r.lambda);
        ensure(dist(&combo, &r.g_k) <= 1e-10 * (1.0 + b.max_norm()), || {
            format!("{}: g is not the stated combination", at())
        })?;
        let g_sq = norm_sq(&r.g_k);
        let worst = b
            .columns()
            .iter()
            .map(|v| dot(v, &r.g_k) - g_sq)
            .fold(f64::INFINITY, f64::min);
        ensure(worst >= -1e-8 * (1.0 + g_sq), || {
            format!("{}: min_v v'g - |g|^2 = {worst:e}", at())
        })?;
        if let (true, Some(grad)) = (r.center_in_bundle, &r.grad_x) {
            let lhs = -dot(grad, &r.g_k);
            ensure(lhs <= -g_sq + 1e-8, || {
                format!("{}: descent inequality off by {:e}", at(), lhs + g_sq)
            })?;
        }
    }
    Ok(run.records.len())
}

/// Criterion 5 on one run: violations of strict sufficient decrease.
fn decrease_violations(run: &Run, beta: f64) -> Vec<(usize, f64)> {
    run.records
        .iter()
        .filter(|r| r.t_k > 0.0)
        .filter(|r| !(r.f_next < r.f_x - beta * r.t_k * r.decrease_rate))
        .map(|r| (r.k, r.f_next - (r.f_x - beta * r.t_k * r.decrease_rate)))
        .collect()
}

fn trust_step_bound(label: &str, run: &Run) -> Result<(), String> {
    for r in run.records.iter().filter(|r| r.t_k > 0.0) {
        let step = dist(&r.x_next, &r.x);
        // Rounding of x - t·g itself, a few ulps of the iterate.
        let ulps = 4.0 * f64::EPSILON * (r.x.len() as f64).sqrt() * (1.0 + gradsamp::vecops::norm_inf(&r.x));
        ensure(step <= r.epsilon_k * (1.0 + 1e-12) + r.perturb_bound + ulps, || {
            format!("{label} k={}: step {step} > eps {} + {}", r.k, r.epsilon_k, r.perturb_bound)
        })?;
    }
    Ok(())
}

fn c1_qp_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = rng.gen_range(1..=3);
        let c = rng.gen_range(1..=5);
        let cols: Vec<Vec<f64>> = (0..c)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let b = GradientBundle::from_columns(cols);
        let sol = min_norm_point(&b, scaled_tolerance(&b, 1e-10), None).map_err(|e| e.to_string())?;
        let brute = brute_force_min_norm(&b, 200).map_err(|e| e.to_string())?;
        let d = dist(&sol.g, &brute);
        worst = worst.max(d);
        ensure(d <= 1e-3, || format!("instance {i}: distance {d:e}"))?;
    }
    Ok(format!("200 instances, worst distance {worst:.2e}"))
}

fn c2_projection() -> Check {
    let mut checked = 0;
    let runs = suite();
    for (label, _, run) in &runs {
        checked += projection_certificate(label, run)?;
    }
    Ok(format!("{checked} iterations over {} runs", runs.len()))
}

fn c3_helou() -> Check {
    let prob = helou();
    let x0 = [10.0, 10.0];
    for seed in 1..=5 {
        let mut p = params(&x0, seed, VariantConfig::default());
        p.beta = 1e-4;
        p.center_only_first_bundle = true;
        let mut st = SolverState::new(&prob, &x0, &p).map_err(|e| e.to_string())?;
        let r = gs_step(&mut st, &p, &prob).map_err(|e| e.to_string())?;
        ensure(r.grad_x.as_deref() == Some(&[10.0, 0.1][..]), || {
            format!("gradient at x0 is {:?}", r.grad_x)
        })?;
        ensure(r.bundle_size == 1, || "bundle was not reduced".into())?;
        ensure(r.t_k == 1.0, || format!("t0 = {}", r.t_k))?;
        let tent = r.x_tentative.clone().ok_or("tentative point not recorded")?;
        ensure(tent[0] == 0.0, || format!("tentative first coordinate {}", tent[0]))?;
        ensure(!prob.eval(&tent).differentiable(), || "tentative point flagged smooth".into())?;
        let e1 = prob.eval(&r.x_next);
        ensure(e1.differentiable(), || "x1 is not differentiable".into())?;
        let g_sq = norm_sq(&r.g_k);
        ensure(e1.value < r.f_x - p.beta * r.t_k * g_sq, || "x1 lacks sufficient decrease".into())?;
        let bound = r.t_k.min(r.epsilon_k) * g_sq.sqrt();
        ensure(dist(&tent, &r.x_next) <= bound, || "x1 too far from the tentative point".into())?;
    }
    Ok("t0 = 1, w1 = 0 flagged, perturbed x1 passes both tests (5 seeds)".into())
}

fn converges(prob: &Problem, v: VariantConfig, seeds: std::ops::RangeInclusive<u64>) -> Result<Vec<Run>, String> {
    let mut runs = vec![];
    for seed in seeds {
        let x0 = random_start(prob.dim, seed);
        let mut p = params(&x0, seed, v);
        p.max_iter = 5000;
        let run = drive(prob, &x0, &p);
        if let Some(e) = &run.error {
            return Err(format!("{} seed {seed}: {e}", prob.name));
        }
        ensure(run.status == Some(SolveStatus::ToleranceMet), || {
            format!("{} seed {seed}: {:?} after {}", prob.name, run.status, run.records.len())
        })?;
        ensure(run.f_final <= 1e-5, || format!("{} seed {seed}: f = {:e}", prob.name, run.f_final))?;
        runs.push(run);
    }
    Ok(runs)
}

fn c4_convergence() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut iters = 0;
    for prob in [l1(10), maxq(10)] {
        for run in converges(&prob, VariantConfig::default(), 1..=3)? {
            worst = worst.max(run.f_final);
            iters = iters.max(run.records.len());
        }
    }
    let el = start.elapsed();
    ensure(el < Duration::from_secs(60), || format!("took {el:?}"))?;
    Ok(format!("6 runs ToleranceMet, worst f {worst:.1e}, at most {iters} iterations"))
}

fn c5_monotone() -> Check {
    let runs = suite();
    let mut records = 0;
    let mut total = 0;
    let mut first = None;
    for (label, v, run) in &runs {
        if !is_monotone(v) {
            continue;
        }
        records += run.records.len();
        let bad = decrease_violations(run, 1e-4);
        if first.is_none() && !bad.is_empty() {
            first = Some(format!("{label} k={} excess {:e}", bad[0].0, bad[0].1));
        }
        total += bad.len();
    }
    ensure(total == 0, || format!("{total} violations, first {}", first.unwrap_or_default()))?;
    Ok(format!("0 violations in {records} monotone iterations"))
}

fn c6_nonmonotone() -> Check {
    let prob = maxq(5);
    let x0 = prob.start.clone();
    let delta0 = 1e-3;
    let v = VariantConfig {
        line_search_mode: LineSearchMode::Nonmonotone { delta0: Some(delta0) },
        nondiff_strategy: NondiffStrategy::DropCenterGradient,
        ..VariantConfig::default()
    };
    let bound = delta0 * std::f64::consts::PI.powi(2) / 6.0 + 1e-9;
    let mut worst: f64 = 0.0;
    for seed in 1..=3 {
        let run = drive(&prob, &x0, &params(&x0, seed, v));
        if let Some(e) = &run.error {
            return Err(format!("seed {seed}: {e}"));
        }
        let increase: f64 = run.records.iter().map(|r| (r.f_next - r.f_x).max(0.0)).sum();
        worst = worst.max(increase);
        ensure(increase <= bound, || format!("seed {seed}: increase {increase:e} > {bound:e}"))?;
        ensure(run.f_final <= 1e-4, || format!("seed {seed}: f = {:e}", run.f_final))?;
        ensure(run.records.iter().all(|r| !r.center_in_bundle), || "center gradient used".into())?;
    }
    Ok(format!("largest cumulative increase {worst:.2e} <= {bound:.2e}"))
}

fn c7_fixed_radius() -> Check {
    let prob = l1(2);
    let x0 = prob.start.clone();
    let mut p = params(&x0, 1, VariantConfig::default());
    p.epsilon0 = 0.1;
    p.epsilon_opt = 0.1;
    p.theta_eps = 1.0;
    p.nu0 = 0.0;
    p.nu_opt = 0.0;
    p.max_iter = 2000;
    let run = drive(&prob, &x0, &p);
    if let Some(e) = &run.error {
        return Err(e.to_string());
    }
    ensure(run.records.iter().all(|r| r.epsilon_k == 0.1), || "radius changed".into())?;
    let mut best = f64::INFINITY;
    for r in &run.records {
        best = best.min(r.g_norm);
    }
    ensure(best < 1e-3, || format!("running minimum of |g| is {best:e}"))?;
    Ok(format!(
        "{:?} after {} iterations, min |g| = {best:.1e}",
        run.status.unwrap(),
        run.records.len()
    ))
}

fn c8_variant_parity() -> Check {
    let mut notes = vec![];
    for (name, v) in [("trust", trust()), ("bb", bb())] {
        let mut iters = 0;
        for prob in [l1(10), maxq(10)] {
            let runs = converges(&prob, v, 1..=3).map_err(|e| format!("{name}: {e}"))?;
            for (i, run) in runs.iter().enumerate() {
                let label = format!("{name}/{}/s{}", prob.name, i + 1);
                projection_certificate(&label, run)?;
                let bad = decrease_violations(run, 1e-4);
                ensure(bad.is_empty(), || format!("{label}: {} decrease violations", bad.len()))?;
                if name == "trust" {
                    trust_step_bound(&label, run)?;
                }
                iters += run.records.len();
            }
        }
        notes.push(format!("{name} {iters} iterations clean"));
    }
    // The suite runs cover the remaining problems.
    for (label, v, run) in suite() {
        if v.direction_mode == DirectionMode::TrustRegion {
            trust_step_bound(&label, &run)?;
        }
    }
    Ok(notes.join(", "))
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        0.5 * (v[m - 1] + v[m]) as f64
    }
}

fn c9_adaptive_economy() -> Check {
    let prob = l1(10);
    let mut fixed = vec![];
    let mut adapt = vec![];
    for seed in 1..=5 {
        let x0 = random_start(10, seed);
        let mut pf = params(&x0, seed, VariantConfig::default());
        pf.sample_size = 20;
        let rf = drive(&prob, &x0, &pf);
        let ra = drive(&prob, &x0, &params(&x0, seed, adaptive()));
        for (r, name) in [(&rf, "fixed"), (&ra, "adaptive")] {
            if let Some(e) = &r.error {
                return Err(format!("{name} seed {seed}: {e}"));
            }
        }
        fixed.push(rf.records.iter().map(|r| r.n_gevals).sum());
        adapt.push(ra.records.iter().map(|r| r.n_gevals).sum());
    }
    let (mf, ma) = (median(fixed), median(adapt));
    let ratio = ma / mf;
    ensure(ratio <= 1.25, || format!("adaptive median {ma} exceeds fixed {mf} by more than 25%"))?;
    let verdict = if ratio <= 1.0 {
        "adaptive cheaper"
    } else if ratio <= 1.1 {
        "within 10%, report only"
    } else {
        "within 25%, report only"
    };
    Ok(format!("median gradient evals adaptive {ma} vs fixed {mf} ({verdict})"))
}

/// Norm of the min-norm element of gradients sampled in a small ball.
fn local_gap<O: Objective + ?Sized>(obj: &O, x: &[f64], radius: f64) -> f64 {
    let mut s = BallSampler::new(99);
    let mut b = GradientBundle::new();
    for y in s.sample_ball(x, radius, 200).unwrap() {
        if let Some(g) = obj.eval(&y).into_gradient() {
            b.push(g, gradsamp::minnorm::ColumnOrigin::Sample);
        }
    }
    let sol = min_norm_point(&b, scaled_tolerance(&b, 1e-12), None).unwrap();
    norm(&sol.g)
}

fn c10_steepest_descent_contrast() -> Check {
    let prob = sd_stall();
    let f_best = prob.f_star.unwrap();
    let x0 = prob.start.clone();

    // Plain steepest descent: center gradient only, run until it cannot go on.
    let mut p = params(&x0, 1, VariantConfig::default());
    p.center_only_always = true;
    p.max_iter = 10_000;
    let p = gradsamp::model::validate_params(&p, 2).unwrap();
    let mut st = SolverState::new(&prob, &x0, &p).map_err(|e| e.to_string())?;
    let mut steps = 0;
    let mut how = "ran 10^4 iterations".to_string();
    for _ in 0..p.max_iter {
        match gs_step(&mut st, &p, &prob) {
            Ok(r) if r.terminal => {
                how = format!("stopped at k={} ({})", r.k, if r.line_search_failed { "no step" } else { "terminal" });
                break;
            }
            Ok(_) => steps += 1,
            Err(e) => {
                how = format!("stuck at k={steps}: {e}");
                break;
            }
        }
    }
    let sd_gap = st.eval.value - f_best;
    let stationarity = local_gap(&prob, &st.x, 1e-6);
    ensure(sd_gap > 0.1, || format!("steepest descent reached f - f* = {sd_gap:e}"))?;
    ensure(stationarity > 0.1, || format!("steepest descent stall point has gap {stationarity:e}"))?;

    let mut gs_worst: f64 = 0.0;
    for seed in 1..=3 {
        let run = drive(&prob, &x0, &params(&x0, seed, VariantConfig::default()));
        if let Some(e) = &run.error {
            return Err(format!("GS seed {seed}: {e}"));
        }
        gs_worst = gs_worst.max(run.f_final - f_best);
    }
    ensure(gs_worst <= 1e-4, || format!("GS reached f - f* = {gs_worst:e}"))?;
    Ok(format!(
        "SD f - f* = {sd_gap:.3} with local gap {stationarity:.2} ({how}); GS f - f* <= {gs_worst:.1e}"
    ))
}

fn c11_sampler() -> Check {
    let n = 2;
    let count = 100_000;
    let mut s = BallSampler::new(12345);
    let pts = s.sample_ball(&[0.0; 2], 1.0, count).unwrap();
    let norms: Vec<f64> = pts.iter().map(|p| norm(p)).collect();
    ensure(norms.iter().all(|&r| r <= 1.0), || "point outside the ball".into())?;
    let mean = norms.iter().sum::<f64>() / count as f64;
    let expected = n as f64 / (n as f64 + 1.0);
    ensure((mean - expected).abs() <= 0.005, || format!("mean norm {mean}"))?;
    let mut worst_z: f64 = 0.0;
    for i in 1..10 {
        let r = i as f64 / 10.0;
        let p = r.powi(n);
        let hits = norms.iter().filter(|&&v| v <= r).count() as f64 / count as f64;
        let sigma = (p * (1.0 - p) / count as f64).sqrt();
        let z = (hits - p).abs() / sigma;
        worst_z = worst_z.max(z);
        ensure(z <= 3.0, || format!("radial CDF at {r}: {hits} vs {p} ({z:.1} sigma)"))?;
    }
    Ok(format!("mean norm {mean:.4}, worst radial CDF deviation {worst_z:.2} sigma"))
}

fn c12_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for prob in corpus(5) {
        let n = prob.dim;
        let width = 1.0 + prob.start.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut done = 0;
        let mut tries = 0;
        while done < 100 {
            tries += 1;
            ensure(tries < 100_000, || format!("{}: too few smooth points", prob.name))?;
            let x: Vec<f64> = prob
                .start
                .iter()
                .map(|c| c + rng.gen_range(-width..=width))
                .collect();
            let h = 1e-6 * (1.0 + norm(&x));
            let Some(g) = prob.eval(&x).into_gradient() else {
                continue;
            };
            // Keep points whose stencil stays on one smooth piece.
            let smooth_around = (0..n).all(|i| {
                [-2.0, 2.0].iter().all(|s| {
                    let mut y = x.clone();
                    y[i] += s * h;
                    prob.eval(&y)
                        .gradient()
                        .is_some_and(|gy| dist(gy, &g) <= 1e-3 * (1.0 + norm(&g)))
                })
            });
            if !smooth_around || norm(&g) == 0.0 {
                continue;
            }
            let fd = fd_gradient(&prob, &x, h).map_err(|e| e.to_string())?;
            let rel = dist(&fd, &g) / norm(&g);
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || format!("{} at {x:?}: relative error {rel:e}", prob.name))?;
            done += 1;
        }
        checked += done;
    }
    Ok(format!("{checked} points, worst relative error {worst:.1e}"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("C1  QP oracle equivalence", c1_qp_oracle),
        ("C2  projection certificate", c2_projection),
        ("C3  Helou reproduction", c3_helou),
        ("C4  convergence at desk scale", c4_convergence),
        ("C5  monotone decrease", c5_monotone),
        ("C6  nonmonotone budget", c6_nonmonotone),
        ("C7  fixed-radius mode", c7_fixed_radius),
        ("C8  variant parity", c8_variant_parity),
        ("C9  adaptive sampling economy", c9_adaptive_economy),
        ("C10 steepest-descent contrast", c10_steepest_descent_contrast),
        ("C11 sampler statistics", c11_sampler),
        ("C12 gradient consistency", c12_gradients),
    ];
    let limits = [10.0, f64::INFINITY, 1.0, 60.0];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, limits.get(i)) {
            (Ok(_), Some(&lim)) if secs > lim => Err(format!("runtime {secs:.2}s over {lim}s")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
