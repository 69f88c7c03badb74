//! Periodic computational grid, wavenumber lattice and the 2-D transform pair.
//!
//! The physical domain is `D·[-π, π)` along each axis, sampled on `N` equispaced
//! nodes. Physical fields are stored row-major with index `(i, j)` mapping to
//! `(y_i, x_j)`. The forward transform leaves its output transposed, so spectral
//! index `(a, b)` maps to `(ξ₁_a, ξ₂_b)`; this saves one transpose per transform.
//! Use [`SpectralGrid::spectral_index`] rather than hand-computing offsets. Wavenumbers are kept
//! in FFT order (`0, 1, …, N/2-1, -N/2, …, -1` divided by `D`); code that applies
//! spectral multipliers reads them from the axis arrays and never assumes an order.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const TRANSPOSE_BLOCK: usize = 32;

/// Which representation a [`ComplexField2D`] currently holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Physical,
    Spectral,
}

/// Immutable description of the periodic grid together with its FFT plans.
pub struct SpectralGrid {
    d: f64,
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    xi1: Vec<f64>,
    xi2: Vec<f64>,
    integer_k: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("d", &self.d)
            .field("n", &self.n)
            .finish()
    }
}

impl SpectralGrid {
    /// Builds the grid for domain factor `d` and `n` points per axis.
    ///
    /// `n` must be a power of two no smaller than 8 and `d` must be positive.
    pub fn new(d: f64, n: usize) -> Result<Arc<Self>> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Config(format!("domain factor D must be positive, got {d}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size N must be a power of two >= 8, got {n}"
            )));
        }
        let m = 2.0 * PI * d / n as f64;
        let x: Vec<f64> = (0..n).map(|j| -PI * d + j as f64 * m).collect();
        let integer_k: Vec<i64> = (0..n)
            .map(|j| {
                let j = j as i64;
                if j < n as i64 / 2 {
                    j
                } else {
                    j - n as i64
                }
            })
            .collect();
        let xi: Vec<f64> = integer_k.iter().map(|&k| k as f64 / d).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Arc::new(Self {
            d,
            n,
            y: x.clone(),
            x,
            xi2: xi.clone(),
            xi1: xi,
            integer_k,
            forward,
            inverse,
        }))
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing, which is also the minimal resolved distance `2πD/N`.
    pub fn m(&self) -> f64 {
        2.0 * PI * self.d / self.n as f64
    }

    pub fn dx(&self) -> f64 {
        self.m()
    }

    /// Area element of the rectangle-rule quadrature.
    pub fn cell_area(&self) -> f64 {
        self.m() * self.m()
    }

    /// Side length `2πD` of the periodic box.
    pub fn length(&self) -> f64 {
        2.0 * PI * self.d
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_axis(&self) -> &[f64] {
        &self.x
    }

    pub fn y_axis(&self) -> &[f64] {
        &self.y
    }

    /// Wavenumbers dual to `x`, in FFT order.
    pub fn xi1_axis(&self) -> &[f64] {
        &self.xi1
    }

    /// Wavenumbers dual to `y`, in FFT order.
    pub fn xi2_axis(&self) -> &[f64] {
        &self.xi2
    }

    /// Integer lattice index `k` of each FFT slot (`ξ = k/D`).
    pub fn integer_wavenumbers(&self) -> &[i64] {
        &self.integer_k
    }

    /// Largest wavenumber magnitude on the lattice, `N/(2D)`.
    pub fn max_wavenumber(&self) -> f64 {
        self.n as f64 / (2.0 * self.d)
    }

    /// FFT slot holding integer wavenumber `k`, if it is on the lattice.
    pub fn slot_of(&self, k: i64) -> Option<usize> {
        let half = self.n as i64 / 2;
        if k < -half || k >= half {
            return None;
        }
        Some(k.rem_euclid(self.n as i64) as usize)
    }

    /// Flat offset of the spectral mode at FFT slots `(slot1, slot2)` along `(ξ₁, ξ₂)`.
    pub fn spectral_index(&self, slot1: usize, slot2: usize) -> usize {
        slot1 * self.n + slot2
    }

    /// `(ξ₁, ξ₂)` of the spectral value stored at flat offset `idx`.
    pub fn wavenumber_at(&self, idx: usize) -> (f64, f64) {
        (self.xi1[idx / self.n], self.xi2[idx % self.n])
    }

    /// Whether two grids describe the same lattice.
    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        self.n == other.n && self.d == other.d
    }

    /// Unitary forward 2-D DFT of a row-major `N×N` buffer, in place.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Unitary inverse 2-D DFT of a row-major `N×N` buffer, in place.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid size");
        let n = self.n;
        rows_fft(data, n, plan, None);
        transpose_in_place(data, n);
        rows_fft(data, n, plan, Some(1.0 / n as f64));
    }
}

fn rows_fft(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>, scale: Option<f64>) {
    let rows_per_task = (n / rayon::current_num_threads().max(1)).clamp(1, n);
    data.par_chunks_mut(n * rows_per_task).for_each_init(
        || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
        |scratch, chunk| {
            for row in chunk.chunks_exact_mut(n) {
                plan.process_with_scratch(row, scratch);
                if let Some(s) = scale {
                    row.iter_mut().for_each(|z| *z *= s);
                }
            }
        },
    );
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for bi in (0..n).step_by(TRANSPOSE_BLOCK) {
        for bj in (bi..n).step_by(TRANSPOSE_BLOCK) {
            for i in bi..(bi + TRANSPOSE_BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + TRANSPOSE_BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// `N×N` complex samples on a [`SpectralGrid`], tagged with their representation.
#[derive(Clone)]
pub struct ComplexField2D {
    grid: Arc<SpectralGrid>,
    data: Vec<Complex64>,
    space: Space,
}

impl fmt::Debug for ComplexField2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexField2D")
            .field("grid", &self.grid)
            .field("space", &self.space)
            .finish()
    }
}

impl ComplexField2D {
    pub fn zeros(grid: &Arc<SpectralGrid>, space: Space) -> Self {
        Self {
            grid: Arc::clone(grid),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
            space,
        }
    }

    pub fn from_vec(grid: &Arc<SpectralGrid>, data: Vec<Complex64>, space: Space) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field data has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            data,
            space,
        })
    }

    /// Samples `f(x, y)` at every physical node.
    pub fn from_fn<F>(grid: &Arc<SpectralGrid>, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let n = grid.n();
        let x = grid.x_axis();
        let y = grid.y_axis();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let yi = y[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(x[j], yi);
            }
        });
        Self {
            grid: Arc::clone(grid),
            data,
            space: Space::Physical,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.grid.n() + j]
    }

    pub(crate) fn set_space(&mut self, space: Space) {
        self.space = space;
    }

    pub fn require(&self, space: Space) -> Result<()> {
        if self.space != space {
            return Err(Error::Usage(format!(
                "expected a {space:?} field, got {:?}",
                self.space
            )));
        }
        Ok(())
    }

    /// Forward transform; fails unless the field is in physical space.
    pub fn forward_transform(mut self) -> Result<Self> {
        self.require(Space::Physical)?;
        self.grid.forward_in_place(&mut self.data);
        self.space = Space::Spectral;
        Ok(self)
    }

    /// Inverse transform; fails unless the field is in spectral space.
    pub fn inverse_transform(mut self) -> Result<Self> {
        self.require(Space::Spectral)?;
        self.grid.inverse_in_place(&mut self.data);
        self.space = Space::Physical;
        Ok(self)
    }

    /// Scales every sample by `s`.
    pub fn scale(&mut self, s: Complex64) {
        self.data.par_iter_mut().for_each(|z| *z *= s);
    }

    /// Rectangle-rule `sqrt(Σ|f|²·dx·dy)`; valid in either space for the unitary pair.
    pub fn quadrature_norm(&self) -> f64 {
        let sum: f64 = self.data.par_iter().map(|z| z.norm_sqr()).sum();
        (sum * self.grid.cell_area()).sqrt()
    }

    /// Largest pointwise modulus.
    pub fn max_modulus(&self) -> f64 {
        self.data
            .par_iter()
            .map(|z| z.norm())
            .reduce(|| 0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.par_iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Relative sup-norm distance `max|a-b| / max|b|` (absolute when `b` vanishes).
    pub fn relative_sup_distance(&self, reference: &ComplexField2D) -> f64 {
        let diff = self
            .data
            .par_iter()
            .zip(reference.data.par_iter())
            .map(|(a, b)| (a - b).norm())
            .reduce(|| 0.0, f64::max);
        let scale = reference.max_modulus();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}
