//! Closed-form solutions and initial data: lumps, the Ozawa blow-up solution,
//! Gaussians and their weighted sums.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, SpectralGrid};

/// Parameters of the lump solitary wave.
///
/// The lump travels with velocity `(-4ξ, -4η)` and has peak modulus `2/|c|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpParams {
    pub xi: f64,
    pub eta: f64,
    pub z0: Complex64,
    pub c: Complex64,
}

impl LumpParams {
    pub fn new(xi: f64, eta: f64, z0: Complex64, c: Complex64) -> Result<Self> {
        if !(c.norm() > 0.0) {
            return Err(Error::Config("lump parameter c must be nonzero".into()));
        }
        Ok(Self { xi, eta, z0, c })
    }

    /// The stationary lump `2/(1 + x² + y²)`.
    pub fn stationary() -> Self {
        Self {
            xi: 0.0,
            eta: 0.0,
            z0: Complex64::new(0.0, 0.0),
            c: Complex64::new(1.0, 0.0),
        }
    }

    pub fn velocity(&self) -> (f64, f64) {
        (-4.0 * self.xi, -4.0 * self.eta)
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> Complex64 {
        let (xi, eta) = (self.xi, self.eta);
        let phase = -2.0 * (xi * x - eta * y + 2.0 * (xi * xi - eta * eta) * t);
        let z = Complex64::new(x + 4.0 * xi * t, y + 4.0 * eta * t) + self.z0;
        2.0 * self.c * Complex64::from_polar(1.0, phase) / (z.norm_sqr() + self.c.norm_sqr())
    }
}

/// Parameters `(a, b)` of the Ozawa solution; blow-up happens at `t* = -a/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OzawaParams {
    pub a: f64,
    pub b: f64,
}

impl OzawaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a * b < 0.0) {
            return Err(Error::Config(format!("Ozawa parameters need a*b < 0, got a={a}, b={b}")));
        }
        Ok(Self { a, b })
    }

    pub fn t_star(&self) -> f64 {
        -self.a / self.b
    }

    /// Scaling factor `a + b t` (the `L(t)` of the self-similar form).
    pub fn scale(&self, t: f64) -> f64 {
        self.a + self.b * t
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> Result<Complex64> {
        let s = self.scale(t);
        if s == 0.0 || !s.is_finite() {
            return Err(Error::Singular(format!("Ozawa solution evaluated at its blow-up time t = {t}")));
        }
        Ok(ozawa_unchecked(self.b, s, x, y))
    }
}

fn ozawa_unchecked(b: f64, s: f64, x: f64, y: f64) -> Complex64 {
    let phase = b * (x * x - y * y) / (4.0 * s);
    Complex64::from_polar(lump_profile(x / s, y / s) / s, phase)
}

/// Radial profile `v(X, Y) = 2/(1 + X² + Y²)` shared by the lump and the Ozawa solution.
pub fn lump_profile(x: f64, y: f64) -> f64 {
    2.0 / (1.0 + x * x + y * y)
}

pub fn gaussian_value(amplitude: f64, x: f64, y: f64) -> f64 {
    amplitude * (-x * x - y * y).exp()
}

pub fn sample_lump(grid: &Arc<SpectralGrid>, p: &LumpParams, t: f64) -> ComplexField2D {
    ComplexField2D::from_fn(grid, |x, y| p.value(x, y, t))
}

pub fn sample_ozawa(grid: &Arc<SpectralGrid>, p: &OzawaParams, t: f64) -> Result<ComplexField2D> {
    let s = p.scale(t);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Singular(format!("Ozawa solution sampled at its blow-up time t = {t}")));
    }
    let b = p.b;
    Ok(ComplexField2D::from_fn(grid, move |x, y| ozawa_unchecked(b, s, x, y)))
}

pub fn sample_gaussian(grid: &Arc<SpectralGrid>, amplitude: f64) -> ComplexField2D {
    ComplexField2D::from_fn(grid, |x, y| Complex64::new(gaussian_value(amplitude, x, y), 0.0))
}

/// One additive piece of an initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Lump { params: LumpParams, t: f64 },
    Ozawa { params: OzawaParams, t: f64 },
    Gaussian { amplitude: f64 },
}

impl Component {
    fn value(&self, x: f64, y: f64) -> Result<Complex64> {
        match self {
            Component::Lump { params, t } => Ok(params.value(x, y, *t)),
            Component::Ozawa { params, t } => params.value(x, y, *t),
            Component::Gaussian { amplitude } => Ok(Complex64::new(gaussian_value(*amplitude, x, y), 0.0)),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Component::Ozawa { params, t } if params.scale(*t) == 0.0 => Err(Error::Singular(
                format!("Ozawa component requested at its blow-up time t = {t}"),
            )),
            _ => Ok(()),
        }
    }
}

/// `prefactor · Σ components`, sampled pointwise.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSpec {
    pub components: Vec<Component>,
    pub prefactor: Complex64,
}

impl InitialDataSpec {
    pub fn single(component: Component) -> Self {
        Self {
            components: vec![component],
            prefactor: Complex64::new(1.0, 0.0),
        }
    }

    pub fn with_prefactor(mut self, prefactor: Complex64) -> Self {
        self.prefactor = prefactor;
        self
    }

    pub fn plus(mut self, component: Component) -> Self {
        self.components.push(component);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("initial data needs at least one component".into()));
        }
        self.components.iter().try_for_each(Component::check)
    }

    pub fn value(&self, x: f64, y: f64) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for c in &self.components {
            sum += c.value(x, y)?;
        }
        Ok(self.prefactor * sum)
    }
}

pub fn build_initial_data(grid: &Arc<SpectralGrid>, spec: &InitialDataSpec) -> Result<ComplexField2D> {
    spec.validate()?;
    // validate() rules out every singular evaluation, so value() cannot fail here.
    Ok(ComplexField2D::from_fn(grid, |x, y| {
        spec.value(x, y).expect("validated initial data")
    }))
}

/// Pseudoconformal image of a solution value: given `ψ(x/t, y/t, 1/t)` returns
/// `t⁻¹·exp(i(x² − y²)/(4t))·ψ(x/t, y/t, 1/t)`.
///
/// The `1/t` amplitude factor keeps the image L²-normalized; with it the image of
/// the stationary lump is exactly the Ozawa solution with `a = -1, b = 1` at `t + 1`.
pub fn pseudoconformal_map(value: Complex64, x: f64, y: f64, t: f64) -> Result<Complex64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Singular("pseudoconformal map needs t != 0".into()));
    }
    Ok(Complex64::from_polar(1.0 / t, (x * x - y * y) / (4.0 * t)) * value)
}
