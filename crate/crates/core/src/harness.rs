//! The staged run protocol: evolve, halt on lost resolution, then analyze the
//! trusted part of the run and write every artifact to the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::blowup::{fit_blowup, window_sensitivity, BlowupFit};
use crate::config::RunConfig;
use crate::diagnostics::DiagnosticsSeries;
use crate::error::{Error, Result};
use crate::exact::{build_initial_data, Component};
use crate::grid::{ComplexField2D, SpectralGrid};
use crate::io::{write_series_csv, write_snapshot, Report};
use crate::profile::{compare_with_lump, PeakLocation};
use crate::simplex::SimplexConfig;
use crate::solver::{Ds2Solver, EvolveOutcome, ObserverAction, StepView, StopReason};
use crate::tracer::{axis_slice, fit_slice, singularity_reached, SingularityFit};

/// Sets the global rayon pool from `DS2_THREADS` (unset or 0 means automatic).
pub fn configure_threads() -> Result<()> {
    let threads = match std::env::var("DS2_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("DS2_THREADS must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    // a second call in the same process keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Tracer and profile results for one snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotAnalysis {
    pub seq: usize,
    pub step: usize,
    pub t: f64,
    pub path: PathBuf,
    pub tracer: std::result::Result<SingularityFit, String>,
    pub resolved: Option<bool>,
    pub peak: std::result::Result<PeakLocation, String>,
    pub profile_ratio: Option<f64>,
}

pub fn analyze_field(
    psi: &ComplexField2D,
    spectrum: &ComplexField2D,
    config: &RunConfig,
) -> (std::result::Result<SingularityFit, String>, std::result::Result<(PeakLocation, f64), String>) {
    let tracer = axis_slice(spectrum, config.tracer_axis)
        .and_then(|s| fit_slice(&s, &config.tracer))
        .map_err(|e| e.to_string());
    let profile = compare_with_lump(psi, config.solver.epsilon)
        .map(|(peak, _, res)| (peak, res.ratio))
        .map_err(|e| e.to_string());
    (tracer, profile)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub stop: StopReason,
    pub steps_taken: usize,
    /// Time of the last state used for analysis.
    pub trusted_time: f64,
    /// Error that ended the run early, if any (the partial outputs are kept).
    pub error: Option<String>,
    /// Diagnostics up to, not including, the halting record.
    pub series: DiagnosticsSeries,
    pub fit: std::result::Result<BlowupFit, String>,
    pub sensitivity: Vec<(usize, std::result::Result<BlowupFit, String>)>,
    pub snapshots: Vec<SnapshotAnalysis>,
    /// First record step at which the tracer reported `δ < m`, when tracing during the run.
    pub unresolved_at: Option<(usize, f64)>,
    pub wall_seconds: f64,
    pub seconds_per_step: f64,
    pub report: Report,
}

impl RunReport {
    pub fn last_snapshot(&self) -> Option<&SnapshotAnalysis> {
        self.snapshots.last()
    }
}

/// Series used by the analysis: everything before the halting record.
pub fn trusted_series(series: &DiagnosticsSeries, stop: &StopReason) -> DiagnosticsSeries {
    match *stop {
        StopReason::GuardHalt { step, .. } | StopReason::Overflow { step, .. } if step > 0 => {
            series.truncated_at_step(step - 1)
        }
        _ => series.clone(),
    }
}

pub fn run_experiment(config: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    let grid = SpectralGrid::new(config.d, config.n)?;
    let psi0 = build_initial_data(&grid, &config.initial)?;
    let schedule = config.schedule()?;
    let mut solver = Ds2Solver::new(&grid, config.solver)?;
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir)?;

    let mut pending: Vec<f64> = config.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let mut snapshots: Vec<SnapshotAnalysis> = Vec::new();
    let mut io_error: Option<Error> = None;
    let mut unresolved_at: Option<(usize, f64)> = None;
    let mut records_seen = 0usize;

    let mut observer = |view: &StepView<'_>| {
        let mut action = ObserverAction::Continue;
        let due = pending
            .last()
            .is_some_and(|&ts| view.t >= ts - 1e-9 * ts.abs().max(1.0));
        if due {
            while pending.last().is_some_and(|&ts| view.t >= ts - 1e-9 * ts.abs().max(1.0)) {
                pending.pop();
            }
            let psi = view.physical();
            match snapshot(out_dir, snapshots.len(), view.step, view.t, &psi, view.spectrum(), config) {
                Ok(s) => snapshots.push(s),
                Err(e) => {
                    io_error = Some(e);
                    action = ObserverAction::Stop;
                }
            }
        }
        if view.is_record() {
            records_seen += 1;
            if config.tracer_stop_every > 0 && records_seen.is_multiple_of(config.tracer_stop_every) {
                let fit = axis_slice(view.spectrum(), config.tracer_axis).and_then(|s| fit_slice(&s, &config.tracer));
                if let Ok(fit) = fit {
                    if singularity_reached(&fit, view.spectrum().grid()) {
                        unresolved_at.get_or_insert((view.step, view.t));
                        action = ObserverAction::Stop;
                    }
                }
            }
        }
        action
    };

    let (outcome, run_error) = match solver.evolve(&psi0, config.t0, &schedule, &config.guard, &mut observer) {
        Ok(o) => (o, None),
        Err(e) => match e.partial {
            Some(p) => (*p, Some(e.error.to_string())),
            None => return Err(e.error),
        },
    };
    if let Some(e) = io_error {
        return Err(e);
    }
    let elapsed = started.elapsed().as_secs_f64();

    let EvolveOutcome {
        series: full_series,
        stop,
        steps_taken,
        trusted_field,
        trusted_time,
        ..
    } = outcome;
    let trusted_step = match stop {
        StopReason::GuardHalt { step, .. } | StopReason::Overflow { step, .. } => step.saturating_sub(1),
        _ => steps_taken,
    };
    let spectrum = trusted_field.clone().forward_transform()?;
    snapshots.push(snapshot(
        out_dir,
        snapshots.len(),
        trusted_step,
        trusted_time,
        &trusted_field,
        &spectrum,
        config,
    )?);

    let series = trusted_series(&full_series, &stop);
    write_series_csv(&out_dir.join("series.csv"), &full_series)?;
    let linf = series.linf_series();
    let simplex = SimplexConfig::default();
    let window = config.fit_window.min(linf.len());
    let fit = fit_blowup(&linf, window, &simplex).map_err(|e| e.to_string());
    let sensitivity = window_sensitivity(&linf, &config.sensitivity_windows, &simplex)
        .into_iter()
        .map(|(w, r)| (w, r.map_err(|e| e.to_string())))
        .collect();

    let mut report = RunReport {
        name: config.name.clone(),
        stop,
        steps_taken,
        trusted_time,
        error: run_error,
        series,
        fit,
        sensitivity,
        snapshots,
        unresolved_at,
        wall_seconds: elapsed,
        seconds_per_step: if steps_taken > 0 { elapsed / steps_taken as f64 } else { 0.0 },
        report: Report::default(),
    };
    report.report = render_report(config, &report, window);
    report.report.write(&out_dir.join("report.txt"))?;
    Ok(report)
}

fn snapshot(
    dir: &Path,
    seq: usize,
    step: usize,
    t: f64,
    psi: &ComplexField2D,
    spectrum: &ComplexField2D,
    config: &RunConfig,
) -> Result<SnapshotAnalysis> {
    let path = dir.join(format!("snap_{seq:04}.f2d"));
    write_snapshot(&path, psi, t, config.solver.epsilon)?;
    let (tracer, profile) = analyze_field(psi, spectrum, config);
    let resolved = tracer
        .as_ref()
        .ok()
        .map(|f| !singularity_reached(f, psi.grid()));
    Ok(SnapshotAnalysis {
        seq,
        step,
        t,
        path,
        tracer,
        resolved,
        peak: profile.as_ref().map(|p| p.0).map_err(Clone::clone),
        profile_ratio: profile.ok().map(|p| p.1),
    })
}

fn render_report(config: &RunConfig, run: &RunReport, window: usize) -> Report {
    let mut r = Report::default();
    r.push("name", &run.name);
    r.push("stop.reason", run.stop.label());
    match run.stop {
        StopReason::GuardHalt { step, t, delta_e } => {
            r.push("stop.step", step);
            r.push("stop.t", t);
            r.push("stop.delta_e", delta_e);
        }
        StopReason::ObserverStop { step, t } | StopReason::Overflow { step, t } => {
            r.push("stop.step", step);
            r.push("stop.t", t);
        }
        StopReason::Completed => {}
    }
    if let Some(e) = &run.error {
        r.push("stop.error", e);
    }
    if let Some((step, t)) = run.unresolved_at {
        r.push("tracer.unresolved_step", step);
        r.push("tracer.unresolved_t", t);
    }
    r.push("steps_taken", run.steps_taken);
    r.push("trusted_time", run.trusted_time);
    r.push("records_used", run.series.len());
    r.push("l2.max_drift", run.series.max_l2_drift());
    r.push("energy.max_abs_delta_e", run.series.max_abs_delta_e());
    r.push("energy.absolute_deviation", run.series.is_absolute_deviation());
    push_fit(&mut r, "fit", &run.fit);
    r.push("fit.window_requested", config.fit_window);
    r.push("fit.window_size", window);
    for (w, f) in &run.sensitivity {
        push_fit(&mut r, &format!("sensitivity.{w}"), f);
    }
    for s in &run.snapshots {
        let p = format!("snapshot.{}", s.seq);
        r.push(format!("{p}.file"), s.path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()));
        r.push(format!("{p}.step"), s.step);
        r.push(format!("{p}.t"), s.t);
        match &s.tracer {
            Ok(f) => {
                r.push(format!("{p}.tracer.mu"), f.mu);
                r.push(format!("{p}.tracer.delta"), f.delta);
                r.push(format!("{p}.tracer.k_min"), f.k_range.0);
                r.push(format!("{p}.tracer.k_max"), f.k_range.1);
                r.push(format!("{p}.tracer.rms"), f.rms_residual);
                r.push(format!("{p}.tracer.breakdown"), f.is_breakdown());
            }
            Err(e) => r.push(format!("{p}.tracer.error"), e),
        }
        if let Some(res) = s.resolved {
            r.push(format!("{p}.tracer.resolved"), res);
        }
        match &s.peak {
            Ok(pk) => {
                r.push(format!("{p}.peak.x"), pk.x0);
                r.push(format!("{p}.peak.y"), pk.y0);
                r.push(format!("{p}.peak.value"), pk.peak);
                r.push(format!("{p}.peak.multi"), pk.multi_peak);
            }
            Err(e) => r.push(format!("{p}.peak.error"), e),
        }
        if let Some(ratio) = s.profile_ratio {
            r.push(format!("{p}.profile.ratio"), ratio);
        }
    }
    r.push("grid.m", config.d * 2.0 * std::f64::consts::PI / config.n as f64);
    r.push("timing.wall_seconds", run.wall_seconds);
    r.push("timing.seconds_per_step", run.seconds_per_step);
    for (k, v) in config.source.iter() {
        r.push(format!("config.{k}"), v);
    }
    r
}

fn push_fit(r: &mut Report, prefix: &str, fit: &std::result::Result<BlowupFit, String>) {
    match fit {
        Ok(f) => {
            r.push(format!("{prefix}.alpha"), f.alpha);
            r.push(format!("{prefix}.gamma"), f.gamma);
            r.push(format!("{prefix}.t_star"), f.t_star);
            r.push(format!("{prefix}.residual"), f.residual);
            r.push(format!("{prefix}.window"), format!("{}..{}", f.window.0, f.window.1));
        }
        Err(e) => r.push(format!("{prefix}.error"), e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactSolution {
    Lump,
    Ozawa,
}

impl std::str::FromStr for ExactSolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lump" => Ok(ExactSolution::Lump),
            "ozawa" => Ok(ExactSolution::Ozawa),
            other => Err(Error::Usage(format!("unknown exact solution '{other}', expected lump or ozawa"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactErrorPoint {
    pub step: usize,
    pub t: f64,
    /// `‖ψ_num − ψ_exact‖∞ / ‖ψ_exact‖∞`.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct ExactComparison {
    pub errors: Vec<ExactErrorPoint>,
    pub series: DiagnosticsSeries,
    pub stop: StopReason,
}

impl ExactComparison {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().map(|p| p.error).fold(0.0, f64::max)
    }
}

/// Evolves the configured data and compares with the closed form at every record point.
///
/// The initial data must be a single lump or Ozawa component with unit prefactor;
/// the closed form is evaluated at the component time shifted by `t − t0`.
pub fn exact_compare(config: &RunConfig, solution: ExactSolution) -> Result<ExactComparison> {
    let comps = &config.initial.components;
    if comps.len() != 1 || (config.initial.prefactor - num_complex::Complex64::new(1.0, 0.0)).norm() > 0.0 {
        return Err(Error::Usage("exact comparison needs a single unscaled component".into()));
    }
    let component = comps[0];
    let t_data = match (solution, component) {
        (ExactSolution::Lump, Component::Lump { t, .. }) | (ExactSolution::Ozawa, Component::Ozawa { t, .. }) => t,
        _ => {
            return Err(Error::Usage(format!(
                "initial data is not the requested {solution:?} solution"
            )))
        }
    };
    let grid = SpectralGrid::new(config.d, config.n)?;
    let psi0 = build_initial_data(&grid, &config.initial)?;
    let schedule = config.schedule()?;
    let mut solver = Ds2Solver::new(&grid, config.solver)?;
    let mut errors = Vec::new();
    let mut failure: Option<Error> = None;
    let t0 = config.t0;
    let mut observer = |view: &StepView<'_>| {
        if !view.is_record() {
            return ObserverAction::Continue;
        }
        let at = t_data + (view.t - t0);
        let exact = match component {
            Component::Lump { params, .. } => Ok(crate::exact::sample_lump(&grid, &params, at)),
            Component::Ozawa { params, .. } => crate::exact::sample_ozawa(&grid, &params, at),
            Component::Gaussian { .. } => unreachable!("checked above"),
        };
        match exact {
            Ok(e) => {
                errors.push(ExactErrorPoint {
                    step: view.step,
                    t: view.t,
                    error: view.physical().relative_sup_distance(&e),
                });
                ObserverAction::Continue
            }
            Err(e) => {
                failure = Some(e);
                ObserverAction::Stop
            }
        }
    };
    let outcome = solver.evolve(&psi0, t0, &schedule, &config.guard, &mut observer)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ExactComparison {
        errors,
        series: outcome.series,
        stop: outcome.stop,
    })
}

pub fn write_exact_csv(path: &Path, cmp: &ExactComparison) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,t,error")?;
    for p in &cmp.errors {
        writeln!(w, "{},{:.17e},{:.17e}", p.step, p.t, p.error)?;
    }
    w.flush()?;
    Ok(())
}
