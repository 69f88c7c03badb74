//! Singularity tracing from the decay of Fourier coefficients.
//!
//! A singularity `(z − z₀)^μ` at distance `δ = Im z₀` from the real axis gives
//! `|f̂(k)| ∼ k^{−(μ+1)} e^{−kδ}` for large `k`. Taking logarithms turns this into a
//! linear least-squares problem in `(C, μ, δ)`.

use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, Space, SpectralGrid};

pub const DEFAULT_ENVELOPE: usize = 8;
pub const ROUNDOFF_FLOOR: f64 = 1e-13;
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Xi1,
    Xi2,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi1" => Ok(Axis::Xi1),
            "xi2" => Ok(Axis::Xi2),
            other => Err(Error::Usage(format!("unknown axis '{other}', expected xi1 or xi2"))),
        }
    }
}

/// One sample `(k, |f̂(k)|)` of a spectral slice.
pub type SlicePoint = (f64, f64);

/// Positive-wavenumber half of the chosen axis, excluding the zero and Nyquist modes.
pub fn axis_slice(spectrum: &ComplexField2D, axis: Axis) -> Result<Vec<SlicePoint>> {
    spectrum.require(Space::Spectral)?;
    let grid = spectrum.grid();
    let n = grid.n();
    Ok((1..n / 2)
        .map(|slot| {
            let (idx, k) = match axis {
                Axis::Xi1 => (grid.spectral_index(slot, 0), grid.xi1_axis()[slot]),
                Axis::Xi2 => (grid.spectral_index(0, slot), grid.xi2_axis()[slot]),
            };
            (k, spectrum.data()[idx].norm())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityFit {
    pub mu: f64,
    pub delta: f64,
    pub const_term: f64,
    pub k_range: (f64, f64),
    pub rms_residual: f64,
    pub points_used: usize,
}

impl SingularityFit {
    /// A negative δ means the exponential model does not describe the slice.
    pub fn is_breakdown(&self) -> bool {
        self.delta < 0.0
    }

    pub fn model(&self, k: f64) -> f64 {
        (self.const_term - (self.mu + 1.0) * k.ln() - self.delta * k).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracerConfig {
    /// Width of the blocks whose maxima form the envelope; 1 disables it.
    pub envelope: usize,
    /// Fit window as fractions of the largest slice wavenumber.
    pub k_fraction: (f64, f64),
    pub floor: f64,
}

impl Default for TracerConfig {
    fn default() -> Self {
        Self {
            envelope: DEFAULT_ENVELOPE,
            k_fraction: (0.4, 0.8),
            floor: ROUNDOFF_FLOOR,
        }
    }
}

impl TracerConfig {
    pub fn k_window(&self, slice: &[SlicePoint]) -> (f64, f64) {
        let k_max = slice.iter().map(|p| p.0).fold(0.0, f64::max);
        (self.k_fraction.0 * k_max, self.k_fraction.1 * k_max)
    }
}

/// Block maxima of the slice: each block of `width` samples contributes the sample
/// with the largest modulus.
pub fn envelope(slice: &[SlicePoint], width: usize) -> Vec<SlicePoint> {
    if width <= 1 {
        return slice.to_vec();
    }
    slice
        .chunks(width)
        .filter_map(|block| block.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)))
        .collect()
}

/// Least-squares fit of `ln|f̂| = C − (μ+1) ln k − δ k` on `[k_min, k_max]`.
pub fn fit_fourier_asymptotics(
    slice: &[SlicePoint],
    k_min: f64,
    k_max: f64,
    config: &TracerConfig,
) -> Result<SingularityFit> {
    if !(k_min > 0.0 && k_max > k_min) {
        return Err(Error::Fit(format!("invalid wavenumber window [{k_min}, {k_max}]")));
    }
    let peak = slice.iter().map(|p| p.1).fold(0.0, f64::max);
    let cut = config.floor * peak;
    let usable: Vec<SlicePoint> = envelope(slice, config.envelope)
        .into_iter()
        .filter(|&(k, v)| k >= k_min && k <= k_max && v > cut && v > 0.0 && v.is_finite())
        .collect();
    if usable.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "only {} usable coefficients in [{k_min}, {k_max}], need {MIN_POINTS}",
            usable.len()
        )));
    }
    let rows: Vec<[f64; 3]> = usable.iter().map(|&(k, _)| [1.0, k.ln(), k]).collect();
    let rhs: Vec<f64> = usable.iter().map(|&(_, v)| v.ln()).collect();
    let coef = least_squares3(&rows, &rhs)?;
    let rms = (rows
        .iter()
        .zip(&rhs)
        .map(|(r, b)| {
            let e = b - (coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2]);
            e * e
        })
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    Ok(SingularityFit {
        mu: -coef[1] - 1.0,
        delta: -coef[2],
        const_term: coef[0],
        k_range: (k_min, k_max),
        rms_residual: rms,
        points_used: usable.len(),
    })
}

/// Fit over the default window of [`TracerConfig`].
pub fn fit_slice(slice: &[SlicePoint], config: &TracerConfig) -> Result<SingularityFit> {
    let (lo, hi) = config.k_window(slice);
    fit_fourier_asymptotics(slice, lo, hi, config)
}

pub fn singularity_reached(fit: &SingularityFit, grid: &SpectralGrid) -> bool {
    fit.delta < grid.m()
}

/// Householder QR solve of an overdetermined system with three unknowns.
///
/// Columns are centered and scaled first so the conditioning stays close to that
/// of the underlying problem.
fn least_squares3(rows: &[[f64; 3]], rhs: &[f64]) -> Result<[f64; 3]> {
    let m = rows.len();
    // column 0 is the constant; center columns 1 and 2 around their means
    let mean = |c: usize| rows.iter().map(|r| r[c]).sum::<f64>() / m as f64;
    let (m1, m2) = (mean(1), mean(2));
    let scale = |c: usize, mc: f64| {
        rows.iter().map(|r| (r[c] - mc).powi(2)).sum::<f64>().sqrt().max(f64::MIN_POSITIVE)
    };
    let (s1, s2) = (scale(1, m1), scale(2, m2));
    let mut a: Vec<[f64; 3]> = rows
        .iter()
        .map(|r| [1.0, (r[1] - m1) / s1, (r[2] - m2) / s2])
        .collect();
    let mut b = rhs.to_vec();

    let mut diag = [0.0f64; 3];
    for col in 0..3 {
        let norm = a[col..].iter().map(|r| r[col] * r[col]).sum::<f64>().sqrt();
        if norm <= 1e-10 * (m as f64).sqrt() {
            return Err(Error::Fit("design matrix is rank deficient; widen the wavenumber window".into()));
        }
        let alpha = if a[col][col] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[col..].iter().map(|r| r[col]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in col..3 {
                let dot: f64 = v.iter().zip(&a[col..]).map(|(vi, r)| vi * r[c]).sum();
                let f = 2.0 * dot / vnorm2;
                for (vi, r) in v.iter().zip(a[col..].iter_mut()) {
                    r[c] -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[col..]).map(|(vi, bi)| vi * bi).sum();
            let f = 2.0 * dot / vnorm2;
            for (vi, bi) in v.iter().zip(b[col..].iter_mut()) {
                *bi -= f * vi;
            }
        }
        diag[col] = a[col][col];
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for j in i + 1..3 {
            s -= a[i][j] * x[j];
        }
        x[i] = s / diag[i];
    }
    // undo the centering and scaling
    let c1 = x[1] / s1;
    let c2 = x[2] / s2;
    Ok([x[0] - c1 * m1 - c2 * m2, c1, c2])
}
