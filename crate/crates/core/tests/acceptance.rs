//! Acceptance suite A1–A10. Prints one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`):
//!
//! ```text
//! cargo test --release --test acceptance                 # A1–A8, A10
//! cargo test --release --test acceptance -- --extended   # adds A9
//! cargo test --release --test acceptance -- A3 A6        # selected criteria
//! ```

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;

use ds2lab::blowup::fit_blowup;
use ds2lab::config::{KeyValues, RunConfig};
use ds2lab::diagnostics::GuardConfig;
use ds2lab::exact::{sample_gaussian, sample_ozawa, OzawaParams};
use ds2lab::grid::{ComplexField2D, Space, SpectralGrid};
use ds2lab::harness::{exact_compare, run_experiment, ExactSolution};
use ds2lab::profile::compare_with_lump;
use ds2lab::simplex::SimplexConfig;
use ds2lab::solver::{Ds2Solver, NoObserver, Phase, Scheme, SolverParams, StopReason};
use ds2lab::tracer::{axis_slice, fit_fourier_asymptotics, fit_slice, Axis, TracerConfig};

// A1, lump propagation at N = 1024. The error bound is the measured value
// (see `a1_lump`) rounded up; the acceptance ceiling is 1e-2.
const A1_ERROR_CEILING: f64 = 1e-2;
const A1_ERROR_FROZEN: f64 = 4e-4;
const A1_L2_DRIFT: f64 = 1e-10;
const A1_DELTA_E: f64 = 1e-6;

const A2_GAMMA_TOL: f64 = 0.15;
const A2_TSTAR_TOL: f64 = 0.02;
const A2_MIN_WINDOW: usize = 500;

// A3: base step count for t in [0, 0.05]; the three runs use 10, 20 and 40 steps.
const A3_BASE_STEPS: usize = 10;
const A3_ORDER_TOL: f64 = 0.2;

const A4_L2_DRIFT: f64 = 1e-10;
const A4_STEPS: usize = 1000;
const A4_GRID_N: usize = 256;

const A5_PARAM_TOL: f64 = 1e-6;
const A5_RESIDUAL: f64 = 1e-10;

const A6_EXACT_TOL: f64 = 1e-10;
const A6_LORENTZ_REL: f64 = 0.02;

const A7_RATIO: f64 = 1e-10;

const A8_HALT: (f64, f64) = (0.27, 0.31);
const A8_TSTAR: (f64, f64) = (0.27, 0.33);
const A8_GAMMA: (f64, f64) = (-1.15, -0.80);
const A8_PROFILE_RATIO: f64 = 0.1;

const A9_GAMMA: (f64, f64) = (-1.15, -0.85);

const A10_PARSEVAL: f64 = 1e-12;
const A10_HERMITIAN: f64 = 1e-12;
const A10_REVERSIBILITY: f64 = 1e-11;
const A10_TRACER_SHIFT: f64 = 1e-9;
const A10_FIT_EQUIVARIANCE: f64 = 1e-6;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// Loads a bundled config with `overrides` applied and output sent to `out`.
fn bundled(name: &str, out: &std::path::Path, overrides: &[(&str, &str)]) -> RunConfig {
    let text = std::fs::read_to_string(configs_dir().join(format!("{name}.cfg"))).expect("bundled config");
    let mut kv = KeyValues::parse(&text).expect("parse config");
    kv.set("output.dir", out.join(name).display());
    for (k, v) in overrides {
        kv.set(k, v);
    }
    RunConfig::from_key_values(kv).expect("valid config")
}

fn a1_lump(out: &std::path::Path) -> Outcome {
    let cfg = bundled("lump_validation", out, &[]);
    let cmp = exact_compare(&cfg, ExactSolution::Lump).map_err(|e| e.to_string())?;
    let err = cmp.max_error();
    let drift = cmp.series.max_l2_drift();
    let de = cmp.series.max_abs_delta_e();
    let first = cmp.errors.first().map_or(f64::NAN, |p| p.error);
    check(
        cmp.stop == StopReason::Completed
            && first == 0.0
            && err <= A1_ERROR_CEILING
            && err <= A1_ERROR_FROZEN
            && drift <= A1_L2_DRIFT
            && de <= A1_DELTA_E,
        format!("max rel Linf error {err:.3e} (<= {A1_ERROR_FROZEN:e}), L2 drift {drift:.2e}, max |dE| {de:.2e}"),
    )
}

fn a2_ozawa(out: &std::path::Path) -> Outcome {
    let cfg = bundled("ozawa_validation", out, &[]);
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let halted = matches!(run.stop, StopReason::GuardHalt { .. });
    let halt = match run.stop {
        StopReason::GuardHalt { t, .. } => format!("guard halt at t = {t:.5}"),
        other => format!("stopped: {}", other.label()),
    };
    let fit = run.fit.as_ref().map_err(|e| format!("{halt}; fit failed: {e}"))?;
    let used = fit.window.1 - fit.window.0 + 1;
    check(
        halted
            && used >= A2_MIN_WINDOW
            && (fit.gamma + 1.0).abs() <= A2_GAMMA_TOL
            && (fit.t_star - 0.25).abs() <= A2_TSTAR_TOL,
        format!(
            "{halt}; fit over {used} records: gamma = {:.4}, t* = {:.4}, residual {:.2e}",
            fit.gamma, fit.t_star, fit.residual
        ),
    )
}

fn self_convergence_order(scheme: Scheme) -> f64 {
    let grid = SpectralGrid::new(2.0, 256).unwrap();
    let psi = sample_gaussian(&grid, 1.0);
    let mut solver = Ds2Solver::new(&grid, SolverParams { epsilon: 1.0, scheme, dealias: false }).unwrap();
    let t_end = 0.05;
    let runs: Vec<ComplexField2D> = [1, 2, 4]
        .iter()
        .map(|m| {
            let n = m * A3_BASE_STEPS;
            solver.advance(&psi, n, t_end / n as f64).unwrap()
        })
        .collect();
    let coarse = runs[0].relative_sup_distance(&runs[1]);
    let fine = runs[1].relative_sup_distance(&runs[2]);
    (coarse / fine).log2()
}

fn a3_order(_: &std::path::Path) -> Outcome {
    let p4 = self_convergence_order(Scheme::Yoshida4);
    let p2 = self_convergence_order(Scheme::Strang2);
    check(
        (p4 - 4.0).abs() <= A3_ORDER_TOL && (p2 - 2.0).abs() <= A3_ORDER_TOL,
        format!("yoshida4 order {p4:.3}, strang2 order {p2:.3}"),
    )
}

fn a4_l2(out: &std::path::Path) -> Outcome {
    let names = [
        "lump_validation",
        "ozawa_validation",
        "ozawa_small_gaussian",
        "ozawa_large_gaussian",
        "perturbed_lump",
        "semiclassical_gaussian",
    ];
    let n = A4_GRID_N.to_string();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for name in names {
        let cfg = bundled(name, out, &[("grid.N", &n)]);
        // the first 1000 steps of the configured schedule
        let mut left = A4_STEPS;
        let mut schedule = Vec::new();
        for ph in cfg.schedule().unwrap() {
            let take = ph.n_steps.min(left);
            if take > 0 {
                schedule.push(Phase::new(take, ph.dt, 1));
            }
            left -= take;
        }
        // supplement short schedules with their last step size
        if left > 0 {
            let dt = schedule.last().unwrap().dt;
            schedule.push(Phase::new(left, dt, 1));
        }
        let grid = SpectralGrid::new(cfg.d, cfg.n).unwrap();
        let psi = ds2lab::exact::build_initial_data(&grid, &cfg.initial).unwrap();
        let mut solver = Ds2Solver::new(&grid, cfg.solver).unwrap();
        let guard = GuardConfig::new(f64::MAX).unwrap();
        let outcome = match solver.evolve(&psi, cfg.t0, &schedule, &guard, &mut NoObserver) {
            Ok(o) => o,
            Err(e) => return Err(format!("{name}: {}", e.error)),
        };
        let drift = outcome.series.max_l2_drift();
        worst = worst.max(drift);
        parts.push(format!("{name} {drift:.1e}"));
    }
    check(worst <= A4_L2_DRIFT, format!("worst drift {worst:.2e} over {A4_STEPS} steps at N = {A4_GRID_N} [{}]", parts.join(", ")))
}

fn synthetic_law(alpha: f64, gamma: f64, t_star: f64) -> Vec<(f64, f64)> {
    (0..1000)
        .map(|i| {
            let t = 0.2 + i as f64 * 4e-5;
            (t, (alpha + gamma * (t_star - t).ln()).exp())
        })
        .collect()
}

fn a5_fit(_: &std::path::Path) -> Outcome {
    let series = synthetic_law(0.0, -1.0, 0.25);
    let fit = fit_blowup(&series, 1000, &SimplexConfig::default()).map_err(|e| e.to_string())?;
    check(
        fit.alpha.abs() <= A5_PARAM_TOL
            && (fit.gamma + 1.0).abs() <= A5_PARAM_TOL
            && (fit.t_star - 0.25).abs() <= A5_PARAM_TOL
            && fit.residual <= A5_RESIDUAL,
        format!(
            "alpha {:.2e}, gamma {:.9}, t* {:.9}, residual {:.1e}",
            fit.alpha, fit.gamma, fit.t_star, fit.residual
        ),
    )
}

/// Periodic sum of `1/(1 + (x + nL)²)` over all images, which keeps the poles at
/// distance 1 from the real axis: `(π/L)·sinh(2π/L)/(cosh(2π/L) − cos(2πx/L))`.
fn periodic_lorentzian(x: f64, length: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI / length;
    (std::f64::consts::PI / length) * w.sinh() / (w.cosh() - (w * x).cos())
}

fn lorentzian_delta() -> f64 {
    let grid = SpectralGrid::new(8.0, 512).unwrap();
    let length = grid.length();
    let f = ComplexField2D::from_fn(&grid, |x, _| Complex64::new(periodic_lorentzian(x, length), 0.0));
    let slice = axis_slice(&f.forward_transform().unwrap(), Axis::Xi1).unwrap();
    fit_slice(&slice, &TracerConfig::default()).unwrap().delta
}

fn a6_tracer(_: &std::path::Path) -> Outcome {
    let slice: Vec<(f64, f64)> = (1..=400)
        .map(|i| {
            let k = i as f64 * 0.25;
            (k, k.powi(-2) * (-0.5 * k).exp())
        })
        .collect();
    let cfg = TracerConfig { envelope: 1, ..TracerConfig::default() };
    let fit = fit_fourier_asymptotics(&slice, 5.0, 95.0, &cfg).map_err(|e| e.to_string())?;
    let delta = lorentzian_delta();
    check(
        (fit.mu - 1.0).abs() <= A6_EXACT_TOL
            && (fit.delta - 0.5).abs() <= A6_EXACT_TOL
            && (delta - 1.0).abs() <= A6_LORENTZ_REL,
        format!(
            "synthetic mu err {:.1e}, delta err {:.1e}; Lorentzian delta {delta:.4}",
            (fit.mu - 1.0).abs(),
            (fit.delta - 0.5).abs()
        ),
    )
}

fn a7_profile(_: &std::path::Path) -> Outcome {
    let grid = SpectralGrid::new(50.0, 2048).unwrap();
    let psi = sample_ozawa(&grid, &OzawaParams::new(1.0, -4.0).unwrap(), 0.2).map_err(|e| e.to_string())?;
    let (_, frame, res) = compare_with_lump(&psi, 1.0).map_err(|e| e.to_string())?;
    check(res.ratio <= A7_RATIO, format!("ratio {:.2e}, L = {:.15}", res.ratio, frame.l))
}

fn a8_semiclassical(out: &std::path::Path) -> Outcome {
    let cfg = bundled("semiclassical_gaussian", out, &[]);
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let halt_t = match run.stop {
        StopReason::GuardHalt { t, .. } => Some(t),
        _ => None,
    };
    let ratio = run.last_snapshot().and_then(|s| s.profile_ratio);
    let fit = run.fit.as_ref().ok();
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    let ok = halt_t.is_some_and(|t| within(t, A8_HALT))
        && fit.is_some_and(|f| within(f.t_star, A8_TSTAR) && within(f.gamma, A8_GAMMA))
        && ratio.is_some_and(|r| r <= A8_PROFILE_RATIO);
    check(
        ok,
        format!(
            "stop {} at t = {:.5}; fit {}; profile ratio {}",
            run.stop.label(),
            halt_t.unwrap_or(run.trusted_time),
            match &run.fit {
                Ok(f) => format!("t* = {:.4}, gamma = {:.4}, residual {:.2e}", f.t_star, f.gamma, f.residual),
                Err(e) => format!("failed ({e})"),
            },
            ratio.map_or("n/a".into(), |r| format!("{r:.3e}")),
        ),
    )
}

fn a9_perturbed_lump(out: &std::path::Path) -> Outcome {
    let cfg = bundled("perturbed_lump", out, &[]);
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let fit = run.fit.as_ref().map_err(|e| format!("stop {}; fit failed: {e}", run.stop.label()))?;
    check(
        !matches!(run.stop, StopReason::Completed) && fit.gamma >= A9_GAMMA.0 && fit.gamma <= A9_GAMMA.1,
        format!(
            "stop {} at t = {:.4}; t* = {:.4}, gamma = {:.4}, residual {:.2e}",
            run.stop.label(),
            run.trusted_time,
            fit.t_star,
            fit.gamma,
            fit.residual
        ),
    )
}

fn a10_invariances(_: &std::path::Path) -> Outcome {
    let grid = SpectralGrid::new(1.0, 64).unwrap();
    let n = grid.n();
    // deterministic pseudo-random field
    let mut s = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let data: Vec<Complex64> = (0..n * n).map(|_| Complex64::new(next(), next())).collect();
    let field = ComplexField2D::from_vec(&grid, data, Space::Physical).unwrap();
    let phys: f64 = field.data().iter().map(|z| z.norm_sqr()).sum();
    let spec = field.clone().forward_transform().unwrap();
    let spec_sum: f64 = spec.data().iter().map(|z| z.norm_sqr()).sum();
    let parseval = (phys / spec_sum - 1.0).abs();

    let real = ComplexField2D::from_vec(
        &grid,
        field.data().iter().map(|z| Complex64::new(z.re, 0.0)).collect(),
        Space::Physical,
    )
    .unwrap()
    .forward_transform()
    .unwrap();
    let scale = real.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut hermitian = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let z = real.data()[grid.spectral_index(a, b)];
            let w = real.data()[grid.spectral_index((n - a) % n, (n - b) % n)];
            hermitian = hermitian.max((z - w.conj()).norm() / scale);
        }
    }

    let g2 = SpectralGrid::new(2.0, 128).unwrap();
    let psi = sample_gaussian(&g2, 1.0);
    let mut solver = Ds2Solver::new(&g2, SolverParams::default()).unwrap();
    let there = solver.step(&psi, 1e-3).unwrap();
    let back = solver.step(&there, -1e-3).unwrap();
    let reversibility = back.relative_sup_distance(&psi);

    // tracer on a field and its copy shifted by whole cells
    let g3 = SpectralGrid::new(8.0, 512).unwrap();
    let n3 = g3.n();
    let lor = ComplexField2D::from_fn(&g3, |x, y| Complex64::new(1.0 / (1.0 + x * x + 0.5 * y * y), 0.0));
    let shifted_data: Vec<Complex64> = (0..g3.len())
        .map(|k| {
            let (i, j) = (k / n3, k % n3);
            lor.data()[((i + 17) % n3) * n3 + (j + 41) % n3]
        })
        .collect();
    let shifted = ComplexField2D::from_vec(&g3, shifted_data, Space::Physical).unwrap();
    let fit_of = |f: &ComplexField2D| {
        let s = axis_slice(&f.clone().forward_transform().unwrap(), Axis::Xi1).unwrap();
        fit_slice(&s, &TracerConfig::default()).unwrap()
    };
    let (f0, f1) = (fit_of(&lor), fit_of(&shifted));
    let tracer_shift = (f0.delta - f1.delta).abs().max((f0.mu - f1.mu).abs());

    let base = synthetic_law(0.3, -0.9, 0.26);
    let fit = |s: &[(f64, f64)]| fit_blowup(s, 1000, &SimplexConfig::default()).unwrap();
    let b = fit(&base);
    let shifted_t: Vec<(f64, f64)> = base.iter().map(|&(t, v)| (t + 1.5, v)).collect();
    let st = fit(&shifted_t);
    let scaled: Vec<(f64, f64)> = base.iter().map(|&(t, v)| (t, 3.0 * v)).collect();
    let sc = fit(&scaled);
    let time_shift = (st.t_star - b.t_star - 1.5)
        .abs()
        .max((st.alpha - b.alpha).abs())
        .max((st.gamma - b.gamma).abs());
    let amp = (sc.alpha - b.alpha - 3f64.ln())
        .abs()
        .max((sc.gamma - b.gamma).abs())
        .max((sc.t_star - b.t_star).abs());

    check(
        parseval <= A10_PARSEVAL
            && hermitian <= A10_HERMITIAN
            && reversibility <= A10_REVERSIBILITY
            && tracer_shift <= A10_TRACER_SHIFT
            && time_shift <= A10_FIT_EQUIVARIANCE
            && amp <= A10_FIT_EQUIVARIANCE,
        format!(
            "parseval {parseval:.1e}, hermitian {hermitian:.1e}, reversibility {reversibility:.1e}, \
             tracer shift {tracer_shift:.1e}, fit time shift {time_shift:.1e}, fit amplitude {amp:.1e}"
        ),
    )
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    extended: bool,
    run: fn(&std::path::Path) -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: "A1", title: "lump propagation", extended: false, run: a1_lump },
    Criterion { id: "A2", title: "Ozawa validation", extended: false, run: a2_ozawa },
    Criterion { id: "A3", title: "convergence order", extended: false, run: a3_order },
    Criterion { id: "A4", title: "L2 conservation", extended: false, run: a4_l2 },
    Criterion { id: "A5", title: "blow-up fit oracle", extended: false, run: a5_fit },
    Criterion { id: "A6", title: "tracer oracle", extended: false, run: a6_tracer },
    Criterion { id: "A7", title: "profile identity", extended: false, run: a7_profile },
    Criterion { id: "A8", title: "semiclassical Gaussian", extended: false, run: a8_semiclassical },
    Criterion { id: "A9", title: "perturbed lump", extended: true, run: a9_perturbed_lump },
    Criterion { id: "A10", title: "invariance suite", extended: false, run: a10_invariances },
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let extended = args.iter().any(|a| a == "--extended");
    let selected: Vec<&str> = args
        .iter()
        .filter(|a| CRITERIA.iter().any(|c| c.id == a.as_str()))
        .map(String::as_str)
        .collect();
    // `cargo test --list` probes every test binary
    if args.iter().any(|a| a == "--list") {
        for c in CRITERIA {
            println!("{}: test", c.id);
        }
        return ExitCode::SUCCESS;
    }
    let _ = ds2lab::harness::configure_threads();
    let out = tempfile::tempdir().expect("temporary output directory");
    let mut failed = 0;
    for c in CRITERIA {
        let chosen = if selected.is_empty() { !c.extended || extended } else { selected.contains(&c.id) };
        if !chosen {
            let why = if selected.is_empty() { "extended tier, pass --extended" } else { "not selected" };
            println!("{:<4} SKIP {} ({why})", c.id, c.title);
            continue;
        }
        let started = Instant::now();
        let result = (c.run)(out.path());
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{:<4} PASS {}: {detail} [{secs:.1}s]", c.id, c.title),
            Err(detail) => {
                failed += 1;
                println!("{:<4} FAIL {}: {detail} [{secs:.1}s]", c.id, c.title);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
