//! Comparison of `|ψ|` near blow-up with a dynamically rescaled lump `P(X, Y)/L`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::lump_profile;
use crate::grid::{ComplexField2D, Space, SpectralGrid};
use crate::solver::{Ds2Solver, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakLocation {
    pub x0: f64,
    pub y0: f64,
    pub peak: f64,
    /// Grid index `(i, j)` of the sample maximum, row `i` along `y`.
    pub index: (usize, usize),
    /// Another sample away from the chosen one attains the same maximum.
    pub multi_peak: bool,
}

/// Grid argmax of `|ψ|`, refined by a quadratic fit over the periodic 3×3
/// neighbourhood. Ties go to the lowest flat index.
pub fn locate_maximum(psi: &ComplexField2D) -> Result<PeakLocation> {
    psi.require(Space::Physical)?;
    let grid = psi.grid();
    let n = grid.n();
    let modulus: Vec<f64> = psi.data().par_iter().map(|z| z.norm()).collect();
    let (mut best, mut vmax, mut vmin) = (0usize, f64::NEG_INFINITY, f64::INFINITY);
    for (k, &v) in modulus.iter().enumerate() {
        if v > vmax {
            vmax = v;
            best = k;
        }
        vmin = vmin.min(v);
    }
    if !(vmax > 0.0) || !vmax.is_finite() || vmax - vmin <= 1e-14 * vmax {
        return Err(Error::NoPeak("field modulus is flat; no maximum to locate".into()));
    }
    let (i, j) = (best / n, best % n);
    let wrap = |a: usize, d: isize| (a as isize + d).rem_euclid(n as isize) as usize;
    let near = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(n - d) <= 1
    };
    let multi_peak = modulus.iter().enumerate().any(|(k, &v)| {
        v >= vmax * (1.0 - 1e-12) && !(near(k / n, i) && near(k % n, j))
    });

    let f = |di: isize, dj: isize| modulus[wrap(i, di) * n + wrap(j, dj)];
    let c = f(0, 0);
    // gradient and Hessian in units of cells; x runs along j, y along i
    let gx = 0.5 * (f(0, 1) - f(0, -1));
    let gy = 0.5 * (f(1, 0) - f(-1, 0));
    let hxx = f(0, 1) - 2.0 * c + f(0, -1);
    let hyy = f(1, 0) - 2.0 * c + f(-1, 0);
    let hxy = 0.25 * (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1));
    let det = hxx * hyy - hxy * hxy;
    let (mut sx, mut sy, mut peak) = (0.0, 0.0, c);
    if hxx < 0.0 && det > 0.0 {
        let ox = -(hyy * gx - hxy * gy) / det;
        let oy = -(hxx * gy - hxy * gx) / det;
        if ox.abs() <= 1.0 && oy.abs() <= 1.0 {
            sx = ox;
            sy = oy;
            peak = c + 0.5 * (gx * ox + gy * oy);
        }
    }
    let dx = grid.dx();
    Ok(PeakLocation {
        x0: grid.x_axis()[j] + sx * dx,
        y0: grid.y_axis()[i] + sy * dx,
        peak: peak.max(c),
        index: (i, j),
        multi_peak,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleFrame {
    pub center: (f64, f64),
    pub l: f64,
    /// Spatial scale of the equation; the lump of the `ε` equation is `P(x/ε, y/ε)`.
    pub epsilon: f64,
}

impl RescaleFrame {
    pub fn new(center: (f64, f64), l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Config(format!("scaling factor L must be positive, got {l}")));
        }
        Ok(Self { center, l, epsilon: 1.0 })
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon, ..self })
    }

    /// Frame whose lump peak `2/L` equals the located maximum.
    pub fn from_peak(peak: &PeakLocation, epsilon: f64) -> Result<Self> {
        Self::new((peak.x0, peak.y0), 2.0 / peak.peak)?.with_epsilon(epsilon)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let w = self.epsilon * self.l;
        lump_profile((x - self.center.0) / w, (y - self.center.1) / w) / self.l
    }
}

/// Samples `P((x−x₀)/εL, (y−y₀)/εL)/L`, stored like a physical field.
pub fn rescaled_lump(grid: &SpectralGrid, frame: &RescaleFrame) -> Vec<f64> {
    let n = grid.n();
    let (xs, ys) = (grid.x_axis(), grid.y_axis());
    (0..n * n)
        .into_par_iter()
        .map(|k| frame.value(xs[k % n], ys[k / n]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResidual {
    /// `|ψ| − P/L` at every node.
    pub residual: Vec<f64>,
    /// `‖residual‖∞ / ‖ψ‖∞`.
    pub ratio: f64,
}

pub fn profile_residual(psi: &ComplexField2D, frame: &RescaleFrame) -> Result<ProfileResidual> {
    psi.require(Space::Physical)?;
    let lump = rescaled_lump(psi.grid(), frame);
    let residual: Vec<f64> = psi
        .data()
        .par_iter()
        .zip(lump.par_iter())
        .map(|(z, p)| z.norm() - p)
        .collect();
    let sup = residual.par_iter().map(|r| r.abs()).reduce(|| 0.0, f64::max);
    let scale = psi.max_modulus();
    let ratio = if scale > 0.0 { sup / scale } else { sup };
    Ok(ProfileResidual { residual, ratio })
}

/// Locates the peak, builds the frame and returns both with the residual.
pub fn compare_with_lump(
    psi: &ComplexField2D,
    epsilon: f64,
) -> Result<(PeakLocation, RescaleFrame, ProfileResidual)> {
    let peak = locate_maximum(psi)?;
    let frame = RescaleFrame::from_peak(&peak, epsilon)?;
    let res = profile_residual(psi, &frame)?;
    Ok((peak, frame, res))
}

/// Relative sup residual of `□P + 2(Δ⁻¹□P²)P` for the unit lump `P` on `grid`.
///
/// The lump is the stationary state of the rescaled equation in the limit where
/// the rescaling terms vanish, so this is bounded by the truncation error of the
/// periodic box.
pub fn stationary_residual(grid: &std::sync::Arc<SpectralGrid>) -> Result<f64> {
    let p = ComplexField2D::from_fn(grid, |x, y| Complex64::new(lump_profile(x, y), 0.0));
    let mut solver = Ds2Solver::new(grid, SolverParams::default())?;
    let v = solver.nonlocal_potential(&p)?;
    let mut boxed = p.clone().forward_transform()?;
    let symbols = &solver.symbols().linear;
    boxed
        .data_mut()
        .par_iter_mut()
        .zip(symbols.par_iter())
        .for_each(|(z, s)| *z *= -s);
    let boxed = boxed.inverse_transform()?;
    let sup = boxed
        .data()
        .par_iter()
        .zip(p.data().par_iter())
        .zip(v.par_iter())
        .map(|((b, q), vv)| (b + 2.0 * vv * q).norm())
        .reduce(|| 0.0, f64::max);
    Ok(sup / p.max_modulus())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{sample_lump, sample_ozawa, LumpParams, OzawaParams};
    use proptest::prelude::*;

    #[test]
    fn centered_lump() {
        let g = SpectralGrid::new(50.0, 256).unwrap();
        let lump = sample_lump(&g, &LumpParams::stationary(), 0.0);
        let p = locate_maximum(&lump).unwrap();
        assert_eq!((p.x0, p.y0), (0.0, 0.0));
        assert!((p.peak - 2.0).abs() < 1e-14);
        assert!(!p.multi_peak);
        let frame = RescaleFrame::from_peak(&p, 1.0).unwrap();
        assert!((frame.l - 1.0).abs() < 1e-14);
        assert!(profile_residual(&lump, &frame).unwrap().ratio <= 1e-12);
    }

    #[test]
    fn unit_frame_peak() {
        let f = RescaleFrame::new((0.0, 0.0), 1.0).unwrap();
        assert_eq!(f.value(0.0, 0.0), 2.0);
        assert!(RescaleFrame::new((0.0, 0.0), 0.0).is_err());
        assert!(RescaleFrame::new((0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn ozawa_identity() {
        let g = SpectralGrid::new(50.0, 512).unwrap();
        let oz = OzawaParams::new(1.0, -4.0).unwrap();
        for t in [0.0, 0.1, 0.2, 0.24] {
            let psi = sample_ozawa(&g, &oz, t).unwrap();
            let (_, frame, res) = compare_with_lump(&psi, 1.0).unwrap();
            assert!((frame.l - oz.scale(t)).abs() < 1e-13);
            assert!(res.ratio <= 1e-12, "t = {t}: {}", res.ratio);
        }
    }

    #[test]
    fn semiclassical_ozawa_identity() {
        let eps = 0.1;
        let g = SpectralGrid::new(2.0, 512).unwrap();
        let oz = OzawaParams::new(1.0, -4.0).unwrap();
        let psi = ComplexField2D::from_fn(&g, |x, y| oz.value(x / eps, y / eps, 0.2).unwrap());
        let (_, frame, res) = compare_with_lump(&psi, eps).unwrap();
        assert!((frame.l - 0.2).abs() < 1e-13);
        assert!(res.ratio <= 1e-12, "{}", res.ratio);
        assert!(compare_with_lump(&psi, 1.0).unwrap().2.ratio > 0.5);
        assert!(RescaleFrame::new((0.0, 0.0), 1.0).unwrap().with_epsilon(0.0).is_err());
    }

    #[test]
    fn off_grid_peak_is_refined() {
        let g = SpectralGrid::new(2.0, 128).unwrap();
        let (cx, cy) = (0.3 * g.dx(), -0.2 * g.dx());
        let psi = ComplexField2D::from_fn(&g, |x, y| {
            Complex64::new((-(x - cx).powi(2) - (y - cy).powi(2)).exp(), 0.0)
        });
        let p = locate_maximum(&psi).unwrap();
        assert!((p.x0 - cx).abs() < 1e-3 * g.dx(), "{p:?}");
        assert!((p.y0 - cy).abs() < 1e-3 * g.dx(), "{p:?}");
        assert!((p.peak - 1.0).abs() < 1e-4);
    }

    #[test]
    fn two_equal_peaks() {
        let g = SpectralGrid::new(1.0, 32).unwrap();
        let mut f = ComplexField2D::zeros(&g, Space::Physical);
        f.data_mut()[5 * 32 + 7] = Complex64::new(1.0, 0.0);
        f.data_mut()[20 * 32 + 3] = Complex64::new(0.0, 1.0);
        let p = locate_maximum(&f).unwrap();
        assert_eq!(p.index, (5, 7));
        assert!(p.multi_peak);
    }

    #[test]
    fn flat_field_has_no_peak() {
        let g = SpectralGrid::new(1.0, 16).unwrap();
        let f = ComplexField2D::from_fn(&g, |_, _| Complex64::new(0.0, 3.0));
        assert!(matches!(locate_maximum(&f), Err(Error::NoPeak(_))));
        let z = ComplexField2D::zeros(&g, Space::Physical);
        assert!(matches!(locate_maximum(&z), Err(Error::NoPeak(_))));
    }

    #[test]
    fn lump_is_nearly_stationary() {
        let g = SpectralGrid::new(50.0, 1024).unwrap();
        let r = stationary_residual(&g).unwrap();
        assert!(r < 5e-3, "{r}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn moving_lump_peak(eta in -1.0f64..1.0, xi in -1.0f64..1.0, t in 0.0f64..2.0) {
            let g = SpectralGrid::new(50.0, 256).unwrap();
            let p = LumpParams::new(xi, eta, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
            let lump = sample_lump(&g, &p, t);
            let loc = locate_maximum(&lump).unwrap();
            let (vx, vy) = p.velocity();
            prop_assert!((loc.x0 - vx * t).abs() <= g.dx());
            prop_assert!((loc.y0 - vy * t).abs() <= g.dx());
            let frame = RescaleFrame::new((vx * t, vy * t), 1.0).unwrap();
            prop_assert!(profile_residual(&lump, &frame).unwrap().ratio <= 1e-12);
        }
    }
}
