//! Split-step time integration of the focusing DS II equation in the form
//!
//! ```text
//! iε ψ_t + ε²(ψ_xx − ψ_yy) + 2 [(Δ⁻¹□)|ψ|²] ψ = 0
//! ```
//!
//! The dispersive flow is integrated exactly in Fourier space and the nonlocal
//! cubic flow exactly in physical space (`|ψ|²` is invariant along it). Strang
//! steps `L(τ/2)∘N(τ)∘L(τ/2)` are composed with the triple jump to fourth order.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diagnostics::{self, DiagnosticsRecord, DiagnosticsSeries, GuardConfig, GuardDecision};
use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, Space, SpectralGrid};

/// Time-splitting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Strang2,
    Yoshida4,
}

impl Scheme {
    /// Substep weights composing one full step from Strang stages.
    pub fn stage_weights(self) -> Vec<f64> {
        match self {
            Scheme::Strang2 => vec![1.0],
            Scheme::Yoshida4 => {
                let (w1, w0) = yoshida_weights();
                vec![w1, w0, w1]
            }
        }
    }
}

/// Triple-jump weights `(w₁, w₀)` with `w₁ = 1/(2 − 2^{1/3})`, `w₀ = 1 − 2w₁`.
pub fn yoshida_weights() -> (f64, f64) {
    let w1 = 1.0 / (2.0 - 2f64.cbrt());
    (w1, 1.0 - 2.0 * w1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Semiclassical parameter; `1` gives the unscaled equation.
    pub epsilon: f64,
    pub scheme: Scheme,
    /// Zero modes beyond two thirds of the maximal wavenumber after each linear substep.
    pub dealias: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            scheme: Scheme::Yoshida4,
            dealias: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Real spectral symbols on the lattice, stored in the grid's spectral layout.
#[derive(Debug, Clone)]
pub struct SpectralMultipliers {
    /// `ξ₁² − ξ₂²`
    pub linear: Vec<f64>,
    /// `(ξ₁² − ξ₂²)/(ξ₁² + ξ₂²)`, zero at the origin.
    pub nonlocal: Vec<f64>,
    /// `−2ξ₁²/(ξ₁² + ξ₂²)`, zero at the origin; maps `|ψ|²` to the mean field Φ.
    pub poisson: Vec<f64>,
    /// `ξ₁²` and `ξ₂²`, for spectral derivatives.
    pub xi1_sq: Vec<f64>,
    pub xi2_sq: Vec<f64>,
}

impl SpectralMultipliers {
    pub fn new(grid: &SpectralGrid) -> Self {
        let len = grid.len();
        let mut linear = Vec::with_capacity(len);
        let mut nonlocal = Vec::with_capacity(len);
        let mut poisson = Vec::with_capacity(len);
        let mut xi1_sq = Vec::with_capacity(len);
        let mut xi2_sq = Vec::with_capacity(len);
        for idx in 0..len {
            let (k1, k2) = grid.wavenumber_at(idx);
            let (a, b) = (k1 * k1, k2 * k2);
            let r = a + b;
            linear.push(a - b);
            if r > 0.0 {
                nonlocal.push((a - b) / r);
                poisson.push(-2.0 * a / r);
            } else {
                nonlocal.push(0.0);
                poisson.push(0.0);
            }
            xi1_sq.push(a);
            xi2_sq.push(b);
        }
        Self {
            linear,
            nonlocal,
            poisson,
            xi1_sq,
            xi2_sq,
        }
    }
}

fn dealias_mask(grid: &SpectralGrid) -> Vec<bool> {
    let cutoff = 2.0 / 3.0 * grid.max_wavenumber();
    (0..grid.len())
        .map(|idx| {
            let (k1, k2) = grid.wavenumber_at(idx);
            k1.abs() <= cutoff && k2.abs() <= cutoff
        })
        .collect()
}

/// Integrator state bound to one grid: symbols, cached phase factors and work buffers.
pub struct Ds2Solver {
    grid: Arc<SpectralGrid>,
    params: SolverParams,
    symbols: Arc<SpectralMultipliers>,
    mask: Option<Vec<bool>>,
    phase_cache: HashMap<u64, Vec<Complex64>>,
    work: Vec<Complex64>,
}

const PHASE_CACHE_LIMIT: usize = 4;

impl Ds2Solver {
    pub fn new(grid: &Arc<SpectralGrid>, params: SolverParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid: Arc::clone(grid),
            params,
            symbols: Arc::new(SpectralMultipliers::new(grid)),
            mask: params.dealias.then(|| dealias_mask(grid)),
            phase_cache: HashMap::new(),
            work: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn symbols(&self) -> &SpectralMultipliers {
        &self.symbols
    }

    fn check_grid(&self, f: &ComplexField2D) -> Result<()> {
        if !f.grid().same_as(&self.grid) {
            return Err(Error::Usage("field lives on a different grid than the solver".into()));
        }
        Ok(())
    }

    /// Multiplies every mode by `exp(−iεh(ξ₁² − ξ₂²))`.
    pub fn linear_substep(&mut self, psi_hat: &mut ComplexField2D, h: f64) -> Result<()> {
        psi_hat.require(Space::Spectral)?;
        self.check_grid(psi_hat)?;
        self.apply_linear(psi_hat.data_mut(), h);
        Ok(())
    }

    fn apply_linear(&mut self, data: &mut [Complex64], h: f64) {
        if h == 0.0 {
            return;
        }
        let key = h.to_bits();
        if !self.phase_cache.contains_key(&key) {
            if self.phase_cache.len() >= PHASE_CACHE_LIMIT {
                self.phase_cache.clear();
            }
            let eps = self.params.epsilon;
            let mut phases: Vec<Complex64> = self
                .symbols
                .linear
                .par_iter()
                .map(|&s| Complex64::from_polar(1.0, -eps * h * s))
                .collect();
            if let Some(mask) = &self.mask {
                phases
                    .iter_mut()
                    .zip(mask)
                    .filter(|(_, &keep)| !keep)
                    .for_each(|(p, _)| *p = Complex64::new(0.0, 0.0));
            }
            self.phase_cache.insert(key, phases);
        }
        let phases = &self.phase_cache[&key];
        data.par_iter_mut()
            .zip(phases.par_iter())
            .for_each(|(z, p)| *z *= p);
    }

    /// Real potential `V = F⁻¹[E·F(|ψ|²)]` with `E = (ξ₁²−ξ₂²)/(ξ₁²+ξ₂²)`.
    pub fn nonlocal_potential(&mut self, psi: &ComplexField2D) -> Result<Vec<f64>> {
        psi.require(Space::Physical)?;
        self.check_grid(psi)?;
        self.potential_into_work(psi.data());
        Ok(self.work.iter().map(|z| z.re).collect())
    }

    /// Complex result of the potential solve before the imaginary part is dropped.
    pub fn nonlocal_potential_complex(&mut self, psi: &ComplexField2D) -> Result<Vec<Complex64>> {
        psi.require(Space::Physical)?;
        self.check_grid(psi)?;
        self.potential_into_work(psi.data());
        Ok(self.work.clone())
    }

    fn potential_into_work(&mut self, psi: &[Complex64]) {
        let work = &mut self.work;
        work.par_iter_mut()
            .zip(psi.par_iter())
            .for_each(|(w, z)| *w = Complex64::new(z.norm_sqr(), 0.0));
        self.grid.forward_in_place(work);
        work.par_iter_mut()
            .zip(self.symbols.nonlocal.par_iter())
            .for_each(|(w, e)| *w *= e);
        self.grid.inverse_in_place(work);
    }

    /// `ψ ← ψ·exp(2ihV/ε)`; the modulus of every sample is unchanged.
    pub fn nonlinear_substep(&mut self, psi: &mut ComplexField2D, h: f64) -> Result<()> {
        psi.require(Space::Physical)?;
        self.check_grid(psi)?;
        self.apply_nonlinear(psi.data_mut(), h);
        Ok(())
    }

    fn apply_nonlinear(&mut self, psi: &mut [Complex64], h: f64) {
        if h == 0.0 {
            return;
        }
        self.potential_into_work(psi);
        let factor = 2.0 * h / self.params.epsilon;
        psi.par_iter_mut()
            .zip(self.work.par_iter())
            .for_each(|(z, v)| *z *= Complex64::from_polar(1.0, factor * v.re));
    }

    /// One Strang stage `L(τ/2)∘N(τ)∘L(τ/2)` acting on spectral data in place.
    fn strang_spectral(&mut self, data: &mut [Complex64], tau: f64) {
        self.apply_linear(data, 0.5 * tau);
        self.grid.inverse_in_place(data);
        self.apply_nonlinear(data, tau);
        self.grid.forward_in_place(data);
        self.apply_linear(data, 0.5 * tau);
    }

    /// One full step of the configured scheme on spectral data.
    fn step_spectral(&mut self, data: &mut [Complex64], h: f64) {
        for w in self.params.scheme.stage_weights() {
            self.strang_spectral(data, w * h);
        }
    }

    /// One step of the configured scheme.
    pub fn step(&mut self, psi: &ComplexField2D, h: f64) -> Result<ComplexField2D> {
        psi.require(Space::Physical)?;
        self.check_grid(psi)?;
        let mut out = psi.clone();
        let data = out.data_mut();
        self.grid.forward_in_place(data);
        self.step_spectral(data, h);
        self.grid.inverse_in_place(data);
        Ok(out)
    }

    /// Fourth-order triple-jump step, regardless of the configured scheme.
    pub fn yoshida4_step(&mut self, psi: &ComplexField2D, h: f64) -> Result<ComplexField2D> {
        let saved = self.params.scheme;
        self.params.scheme = Scheme::Yoshida4;
        let out = self.step(psi, h);
        self.params.scheme = saved;
        out
    }

    /// Second-order Strang step, regardless of the configured scheme.
    pub fn strang_step(&mut self, psi: &ComplexField2D, h: f64) -> Result<ComplexField2D> {
        let saved = self.params.scheme;
        self.params.scheme = Scheme::Strang2;
        let out = self.step(psi, h);
        self.params.scheme = saved;
        out
    }

    /// Runs `n` steps of size `h` without diagnostics.
    pub fn advance(&mut self, psi: &ComplexField2D, n: usize, h: f64) -> Result<ComplexField2D> {
        psi.require(Space::Physical)?;
        self.check_grid(psi)?;
        let mut out = psi.clone();
        let data = out.data_mut();
        self.grid.forward_in_place(data);
        for _ in 0..n {
            self.step_spectral(data, h);
        }
        self.grid.inverse_in_place(data);
        Ok(out)
    }

    /// Evolves `psi0` through the phases of `schedule`, recording diagnostics and
    /// stopping early when the resolution guard fires or the observer asks to.
    pub fn evolve<O: Observer>(
        &mut self,
        psi0: &ComplexField2D,
        t0: f64,
        schedule: &[Phase],
        guard: &GuardConfig,
        observer: &mut O,
    ) -> std::result::Result<EvolveOutcome, EvolveError> {
        let fail = |error: Error| EvolveError {
            error,
            partial: None,
        };
        psi0.require(Space::Physical).map_err(fail)?;
        self.check_grid(psi0).map_err(fail)?;
        guard.validate().map_err(fail)?;
        for ph in schedule {
            if !(ph.dt.is_finite() && ph.dt > 0.0) || ph.record_every == 0 {
                return Err(fail(Error::Config(format!("invalid phase {ph:?}"))));
            }
        }

        let mut series = DiagnosticsSeries::default();
        let mut state = psi0.clone();
        let mut spectrum = psi0.clone();
        self.grid.forward_in_place(spectrum.data_mut());
        spectrum.set_space(Space::Spectral);

        let first = self.record(0, t0, &state, &spectrum);
        series.push(first);
        let mut step = 0usize;
        let mut t = t0;
        let mut stop = StopReason::Completed;

        if observer.observe(&StepView::new(0, t0, &spectrum, Some(&state))) == ObserverAction::Stop {
            stop = StopReason::ObserverStop { step, t };
        }

        let mut last_good = spectrum.data().to_vec();
        let mut last_good_t = t0;
        'phases: for (phase_index, ph) in schedule.iter().enumerate() {
            let phase_start = t;
            for k in 1..=ph.n_steps {
                if stop != StopReason::Completed {
                    break 'phases;
                }
                let h = ph.dt;
                self.step_spectral(spectrum.data_mut(), h);
                step += 1;
                t = phase_start + k as f64 * h;

                if !spectrum.is_finite() {
                    let mut last = ComplexField2D::from_vec(&self.grid, last_good, Space::Spectral)
                        .expect("buffer sized for grid");
                    self.grid.inverse_in_place(last.data_mut());
                    last.set_space(Space::Physical);
                    return Err(EvolveError {
                        error: Error::Overflow { step, t },
                        partial: Some(Box::new(EvolveOutcome {
                            trusted_field: last.clone(),
                            trusted_time: last_good_t,
                            final_field: last,
                            series,
                            stop: StopReason::Overflow { step, t },
                            steps_taken: step - 1,
                            final_time: t - h,
                        })),
                    });
                }

                let is_record = k % ph.record_every == 0 || k == ph.n_steps;
                let physical = if is_record {
                    state.data_mut().copy_from_slice(spectrum.data());
                    self.grid.inverse_in_place(state.data_mut());
                    let rec = self.record(step, t, &state, &spectrum);
                    let rec = series.push_relative(rec);
                    if let GuardDecision::Halt { .. } = diagnostics::resolution_guard(&rec, guard) {
                        stop = StopReason::GuardHalt {
                            step,
                            t,
                            delta_e: rec.delta_e,
                        };
                    }
                    Some(&state)
                } else {
                    None
                };
                let view = StepView::new(step, t, &spectrum, physical).in_phase(phase_index);
                if observer.observe(&view) == ObserverAction::Stop && stop == StopReason::Completed {
                    stop = StopReason::ObserverStop { step, t };
                }
                if !matches!(stop, StopReason::GuardHalt { .. }) {
                    last_good.copy_from_slice(spectrum.data());
                    last_good_t = t;
                }
            }
        }

        let (trusted_field, trusted_time) = if let StopReason::GuardHalt { .. } = stop {
            let mut f = ComplexField2D::from_vec(&self.grid, last_good, Space::Spectral)
                .expect("buffer sized for grid");
            self.grid.inverse_in_place(f.data_mut());
            f.set_space(Space::Physical);
            (Some(f), last_good_t)
        } else {
            (None, t)
        };
        let mut final_field = spectrum;
        self.grid.inverse_in_place(final_field.data_mut());
        final_field.set_space(Space::Physical);
        Ok(EvolveOutcome {
            trusted_field: trusted_field.unwrap_or_else(|| final_field.clone()),
            trusted_time,
            final_field,
            series,
            stop,
            steps_taken: step,
            final_time: t,
        })
    }

    fn record(&self, step: usize, t: f64, psi: &ComplexField2D, psi_hat: &ComplexField2D) -> DiagnosticsRecord {
        let linf = psi.max_modulus();
        let l2 = psi.quadrature_norm();
        let energy = diagnostics::energy_with_spectrum(psi, psi_hat, &self.symbols, self.params.epsilon);
        DiagnosticsRecord {
            step,
            t,
            linf,
            l2,
            energy,
            delta_e: 0.0,
        }
    }
}

/// One segment of the staged time-step schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub n_steps: usize,
    pub dt: f64,
    pub record_every: usize,
}

impl Phase {
    pub fn new(n_steps: usize, dt: f64, record_every: usize) -> Self {
        Self {
            n_steps,
            dt,
            record_every,
        }
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Completed,
    GuardHalt { step: usize, t: f64, delta_e: f64 },
    ObserverStop { step: usize, t: f64 },
    Overflow { step: usize, t: f64 },
}

impl StopReason {
    pub fn label(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::GuardHalt { .. } => "guard_halt",
            StopReason::ObserverStop { .. } => "observer_stop",
            StopReason::Overflow { .. } => "overflow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub final_field: ComplexField2D,
    /// State one step before a guard halt; otherwise the final state.
    pub trusted_field: ComplexField2D,
    pub trusted_time: f64,
    pub series: DiagnosticsSeries,
    pub stop: StopReason,
    pub steps_taken: usize,
    pub final_time: f64,
}

#[derive(Debug)]
pub struct EvolveError {
    pub error: Error,
    /// Series and last finite state, when the failure happened mid-run.
    pub partial: Option<Box<EvolveOutcome>>,
}

impl From<EvolveError> for Error {
    fn from(e: EvolveError) -> Self {
        e.error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverAction {
    Continue,
    Stop,
}

/// What an [`Observer`] sees after each step.
///
/// The physical field is only materialized on record steps; [`StepView::physical`]
/// computes it on demand otherwise.
pub struct StepView<'a> {
    pub step: usize,
    pub t: f64,
    pub phase: usize,
    spectrum: &'a ComplexField2D,
    physical: Option<&'a ComplexField2D>,
}

impl<'a> StepView<'a> {
    fn new(step: usize, t: f64, spectrum: &'a ComplexField2D, physical: Option<&'a ComplexField2D>) -> Self {
        Self {
            step,
            t,
            phase: 0,
            spectrum,
            physical,
        }
    }

    fn in_phase(mut self, phase: usize) -> Self {
        self.phase = phase;
        self
    }

    pub fn is_record(&self) -> bool {
        self.physical.is_some()
    }

    pub fn spectrum(&self) -> &ComplexField2D {
        self.spectrum
    }

    pub fn physical(&self) -> ComplexField2D {
        match self.physical {
            Some(f) => f.clone(),
            None => self
                .spectrum
                .clone()
                .inverse_transform()
                .expect("spectrum is in spectral space"),
        }
    }
}

pub trait Observer {
    fn observe(&mut self, view: &StepView<'_>) -> ObserverAction;
}

impl<F: FnMut(&StepView<'_>) -> ObserverAction> Observer for F {
    fn observe(&mut self, view: &StepView<'_>) -> ObserverAction {
        self(view)
    }
}

/// Observer that does nothing.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &StepView<'_>) -> ObserverAction {
        ObserverAction::Continue
    }
}
