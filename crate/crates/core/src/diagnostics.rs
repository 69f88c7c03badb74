//! Conserved quantities and the energy-based resolution guard.
//!
//! Quadratures use the rectangle rule on the periodic grid. Spectral sums rely on
//! the unitary transform, so `Σ|∂ₓψ|² = Σ ξ₁²|ψ̂|²` and `ΣΦ|ψ|² = Σ P(ξ)|ρ̂|²`
//! hold exactly with `ρ = |ψ|²` and `P` the mean-field symbol.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, Space};
use crate::solver::{SolverParams, SpectralMultipliers};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    pub energy: f64,
    /// `E(t)/E(0) − 1`, or `E(t) − E(0)` when `E(0)` vanishes.
    pub delta_e: f64,
}

/// Time-ordered diagnostics for one run.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries {
    records: Vec<DiagnosticsRecord>,
    absolute_deviation: bool,
}

impl DiagnosticsSeries {
    pub fn from_records(records: Vec<DiagnosticsRecord>) -> Self {
        let absolute_deviation = records.first().is_some_and(|r| r.energy == 0.0);
        Self {
            records,
            absolute_deviation,
        }
    }

    /// Appends the first record; later records go through [`Self::push_relative`].
    pub(crate) fn push(&mut self, mut rec: DiagnosticsRecord) {
        if self.records.is_empty() {
            self.absolute_deviation = rec.energy == 0.0;
            rec.delta_e = 0.0;
            self.records.push(rec);
        } else {
            self.push_relative(rec);
        }
    }

    /// Fills in `delta_e` relative to the first record and appends.
    pub(crate) fn push_relative(&mut self, mut rec: DiagnosticsRecord) -> DiagnosticsRecord {
        match self.records.first() {
            None => {
                self.push(rec);
                return self.records[0];
            }
            Some(first) => rec.delta_e = energy_deviation(first.energy, rec.energy),
        }
        self.records.push(rec);
        rec
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether `delta_e` is an absolute deviation because `E(0) = 0`.
    pub fn is_absolute_deviation(&self) -> bool {
        self.absolute_deviation
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }

    /// Records up to and including `step`.
    pub fn truncated_at_step(&self, step: usize) -> DiagnosticsSeries {
        DiagnosticsSeries {
            records: self.records.iter().copied().filter(|r| r.step <= step).collect(),
            absolute_deviation: self.absolute_deviation,
        }
    }

    /// First record with `|ΔE|` above `threshold`.
    pub fn first_crossing(&self, threshold: f64) -> Option<&DiagnosticsRecord> {
        self.records.iter().find(|r| r.delta_e.abs() > threshold)
    }

    pub fn max_abs_delta_e(&self) -> f64 {
        self.records.iter().map(|r| r.delta_e.abs()).fold(0.0, f64::max)
    }

    /// Largest relative deviation of the L² norm from its first value.
    pub fn max_l2_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| (r.l2 / first.l2 - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `(t, ‖ψ‖∞)` pairs, the input of the blow-up fit.
    pub fn linf_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.linf)).collect()
    }
}

fn energy_deviation(e0: f64, e: f64) -> f64 {
    if e0 == 0.0 {
        e - e0
    } else {
        e / e0 - 1.0
    }
}

/// `ΔE` for each record and whether it had to fall back to absolute deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDeviation {
    pub values: Vec<f64>,
    pub absolute: bool,
}

pub fn relative_energy_deviation(records: &[DiagnosticsRecord]) -> EnergyDeviation {
    let Some(first) = records.first() else {
        return EnergyDeviation {
            values: Vec::new(),
            absolute: false,
        };
    };
    EnergyDeviation {
        values: records.iter().map(|r| energy_deviation(first.energy, r.energy)).collect(),
        absolute: first.energy == 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardConfig {
    pub delta_e_threshold: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            delta_e_threshold: 1e-3,
        }
    }
}

impl GuardConfig {
    pub fn new(delta_e_threshold: f64) -> Result<Self> {
        let g = Self { delta_e_threshold };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_e_threshold > 0.0) {
            return Err(Error::Config(format!(
                "guard threshold must be positive, got {}",
                self.delta_e_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuardDecision {
    Continue,
    Halt { step: usize, t: f64, reason: String },
}

/// Halts once `|ΔE|` exceeds the threshold (or stops being finite).
pub fn resolution_guard(rec: &DiagnosticsRecord, guard: &GuardConfig) -> GuardDecision {
    let dev = rec.delta_e.abs();
    if dev > guard.delta_e_threshold || !dev.is_finite() {
        GuardDecision::Halt {
            step: rec.step,
            t: rec.t,
            reason: format!(
                "|delta_e| = {:.3e} exceeds {:.1e} at step {} (t = {})",
                dev, guard.delta_e_threshold, rec.step, rec.t
            ),
        }
    } else {
        GuardDecision::Continue
    }
}

pub fn l2_norm(psi: &ComplexField2D) -> Result<f64> {
    psi.require(Space::Physical)?;
    Ok(psi.quadrature_norm())
}

pub fn linf_norm(psi: &ComplexField2D) -> f64 {
    psi.max_modulus()
}

/// Energy `∫ ε²(|ψₓ|² − |ψ_y|²) + (|ψ|² + Φ)|ψ|²` of a physical field.
pub fn energy(psi: &ComplexField2D, params: &SolverParams) -> Result<f64> {
    psi.require(Space::Physical)?;
    let symbols = SpectralMultipliers::new(psi.grid());
    let spectrum = psi.clone().forward_transform()?;
    Ok(energy_with_spectrum(psi, &spectrum, &symbols, params.epsilon))
}

/// Energy from a field and its already computed spectrum.
pub(crate) fn energy_with_spectrum(
    psi: &ComplexField2D,
    psi_hat: &ComplexField2D,
    symbols: &SpectralMultipliers,
    epsilon: f64,
) -> f64 {
    let grid = psi.grid();
    let gradient: f64 = psi_hat
        .data()
        .par_iter()
        .zip(symbols.linear.par_iter())
        .map(|(z, s)| s * z.norm_sqr())
        .sum();
    let mut rho: Vec<Complex64> = psi
        .data()
        .par_iter()
        .map(|z| Complex64::new(z.norm_sqr(), 0.0))
        .collect();
    let quartic: f64 = rho.par_iter().map(|r| r.re * r.re).sum();
    grid.forward_in_place(&mut rho);
    let mean_field: f64 = rho
        .par_iter()
        .zip(symbols.poisson.par_iter())
        .map(|(r, p)| p * r.norm_sqr())
        .sum();
    (epsilon * epsilon * gradient + quartic + mean_field) * grid.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{sample_gaussian, sample_lump, LumpParams};
    use crate::grid::SpectralGrid;
    use std::f64::consts::PI;

    fn rec(step: usize, energy: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            step,
            t: step as f64,
            linf: 1.0,
            l2: 1.0,
            energy,
            delta_e: 0.0,
        }
    }

    #[test]
    fn norms() {
        let g = SpectralGrid::new(2.0, 1024).unwrap();
        let gauss = sample_gaussian(&g, 1.0);
        assert!((l2_norm(&gauss).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-8);
        let half = sample_gaussian(&g, 0.5);
        assert!((linf_norm(&half) - 0.5).abs() < 1e-15);
        let zero = ComplexField2D::zeros(&g, Space::Physical);
        assert_eq!(l2_norm(&zero).unwrap(), 0.0);
        assert_eq!(linf_norm(&zero), 0.0);
        let spectral = ComplexField2D::zeros(&g, Space::Spectral);
        assert!(l2_norm(&spectral).is_err());

        let g = SpectralGrid::new(50.0, 2048).unwrap();
        let lump = sample_lump(&g, &LumpParams::stationary(), 0.0);
        assert!((l2_norm(&lump).unwrap() - 2.0 * PI.sqrt()).abs() < 1e-2);
        assert!((linf_norm(&lump) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn energy_simple_fields() {
        let g = SpectralGrid::new(1.5, 32).unwrap();
        let p = SolverParams::default();
        let zero = ComplexField2D::zeros(&g, Space::Physical);
        assert_eq!(energy(&zero, &p).unwrap(), 0.0);
        let a = Complex64::new(0.6, -0.8) * 1.3;
        let c = ComplexField2D::from_fn(&g, |_, _| a);
        let expected = a.norm().powi(4) * g.length().powi(2);
        let e = energy(&c, &p).unwrap();
        assert!((e / expected - 1.0).abs() < 1e-13, "{e} vs {expected}");
    }

    #[test]
    fn energy_of_unit_gaussian() {
        // Radial symmetry cancels the gradient terms, and averaging ξ₁²/|ξ|² over the
        // square lattice turns ∫Φ|ψ|² into −∫|ψ|⁴ minus the mean of |ψ|², so only
        // (∫|ψ|²)²/area = (π/2)²/(4π)² = 1/64 survives.
        let g = SpectralGrid::new(2.0, 1024).unwrap();
        let e = energy(&sample_gaussian(&g, 1.0), &SolverParams::default()).unwrap();
        assert!((e - 1.0 / 64.0).abs() < 1e-10, "{e}");
    }

    #[test]
    fn energy_gradient_term_of_anisotropic_gaussian() {
        // ∫|ψₓ|² − |ψ_y|² for exp(−x² − 2y²) is π/(2√2) − π/√2
        let g = SpectralGrid::new(2.0, 512).unwrap();
        let psi = ComplexField2D::from_fn(&g, |x, y| Complex64::new((-x * x - 2.0 * y * y).exp(), 0.0));
        let at = |epsilon| energy(&psi, &SolverParams { epsilon, ..SolverParams::default() }).unwrap();
        let gradient = (at(1.0) - at(0.5)) / 0.75;
        assert!((gradient + PI / (2.0 * 2f64.sqrt())).abs() < 1e-10, "{gradient}");
    }

    #[test]
    fn delta_e_bookkeeping() {
        let mut s = DiagnosticsSeries::default();
        s.push(rec(0, 2.0));
        let r = s.push_relative(rec(1, 2.002));
        assert!((r.delta_e - 1e-3).abs() < 1e-12);
        assert_eq!(s.records()[0].delta_e, 0.0);
        assert!(!s.is_absolute_deviation());

        let mut z = DiagnosticsSeries::default();
        z.push(rec(0, 0.0));
        let r = z.push_relative(rec(1, 0.5));
        assert!(z.is_absolute_deviation());
        assert_eq!(r.delta_e, 0.5);

        let dev = relative_energy_deviation(&[rec(0, 4.0), rec(1, 5.0)]);
        assert_eq!(dev.values, vec![0.0, 0.25]);
        assert!(!dev.absolute);
        let dev = relative_energy_deviation(&[rec(0, 0.0), rec(1, 5.0)]);
        assert!(dev.absolute);
    }

    #[test]
    fn guard_thresholds() {
        let g = GuardConfig::default();
        let mut r = rec(3, 1.0);
        r.delta_e = 1e-5;
        assert_eq!(resolution_guard(&r, &g), GuardDecision::Continue);
        r.delta_e = -2e-3;
        assert!(matches!(resolution_guard(&r, &g), GuardDecision::Halt { step: 3, .. }));
        r.delta_e = f64::NAN;
        assert!(matches!(resolution_guard(&r, &g), GuardDecision::Halt { .. }));
        assert!(GuardConfig::new(0.0).is_err());
    }
}
