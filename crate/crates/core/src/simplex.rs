//! Nelder–Mead downhill simplex minimization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Converged when every vertex is within `x_tolerance` (max-norm) of the best
    /// vertex and the objective spread is below `f_tolerance`.
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub max_iterations: usize,
    /// Edge lengths of the initial simplex per coordinate. `None` uses 5% of each
    /// nonzero coordinate and 0.00025 for zero coordinates.
    pub initial_steps: Option<Vec<f64>>,
    /// Number of times to rebuild the simplex around the converged point.
    pub restarts: usize,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            x_tolerance: 1e-10,
            f_tolerance: 1e-10,
            max_iterations: 10_000,
            initial_steps: None,
            restarts: 2,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.expansion > self.reflection
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.x_tolerance > 0.0
            && self.f_tolerance > 0.0
            && self.max_iterations > 0;
        if !ok {
            return Err(Error::Config(format!("invalid simplex configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Simplex<'f, F> {
    f: &'f mut F,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Simplex<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = order.iter().map(|&i| self.points[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    fn converged(&self, cfg: &SimplexConfig) -> bool {
        let best = &self.points[0];
        let x_spread = self.points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let f_spread = self.values[1..]
            .iter()
            .map(|v| (v - self.values[0]).abs())
            .fold(0.0, f64::max);
        x_spread <= cfg.x_tolerance && f_spread <= cfg.f_tolerance
    }
}

fn affine(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    // a + s (a - b)
    a.iter().zip(b).map(|(ai, bi)| ai + s * (ai - bi)).collect()
}

fn simplex_around(x0: &[f64], cfg: &SimplexConfig) -> Vec<Vec<f64>> {
    let mut pts = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        let step = match &cfg.initial_steps {
            Some(steps) => steps[i],
            None if x0[i] != 0.0 => 0.05 * x0[i],
            None => 0.00025,
        };
        p[i] += step;
        pts.push(p);
    }
    pts
}

/// Minimizes `f` starting from `x0`.
///
/// Deterministic for a given configuration. NaN objective values are treated as
/// `+∞`, which is also how callers express constraints.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], cfg: &SimplexConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::Optimizer("cannot minimize over zero dimensions".into()));
    }
    if let Some(steps) = &cfg.initial_steps {
        if steps.len() != n || steps.iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::Config("initial simplex steps must be nonzero, one per coordinate".into()));
        }
    }

    let mut total_iterations = 0;
    let mut total_evaluations = 0;
    let mut start = x0.to_vec();
    let mut best: Option<Minimum> = None;

    for _ in 0..=cfg.restarts {
        let mut s = Simplex {
            f: &mut f,
            points: simplex_around(&start, cfg),
            values: Vec::new(),
            evaluations: 0,
        };
        let pts = s.points.clone();
        s.values = pts.iter().map(|p| s.eval(p)).collect();
        if s.values.iter().all(|v| !v.is_finite()) {
            return Err(Error::Optimizer("objective is not finite at any initial vertex".into()));
        }
        s.sort();

        let budget = cfg.max_iterations.saturating_sub(total_iterations);
        let mut iterations = 0;
        let mut converged = s.converged(cfg);
        while !converged && iterations < budget {
            iterations += 1;
            let worst = s.points[n].clone();
            let centroid: Vec<f64> = (0..n)
                .map(|j| s.points[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
                .collect();

            let xr = affine(&centroid, &worst, cfg.reflection);
            let fr = s.eval(&xr);
            if fr < s.values[0] {
                let xe = affine(&centroid, &worst, cfg.reflection * cfg.expansion);
                let fe = s.eval(&xe);
                if fe < fr {
                    s.points[n] = xe;
                    s.values[n] = fe;
                } else {
                    s.points[n] = xr;
                    s.values[n] = fr;
                }
            } else if fr < s.values[n - 1] {
                s.points[n] = xr;
                s.values[n] = fr;
            } else {
                let outside = fr < s.values[n];
                let (xc, fc) = if outside {
                    let xc = affine(&centroid, &worst, cfg.reflection * cfg.contraction);
                    let fc = s.eval(&xc);
                    (xc, fc)
                } else {
                    let xc = affine(&centroid, &worst, -cfg.contraction);
                    let fc = s.eval(&xc);
                    (xc, fc)
                };
                let accept = if outside { fc <= fr } else { fc < s.values[n] };
                if accept {
                    s.points[n] = xc;
                    s.values[n] = fc;
                } else {
                    let best_pt = s.points[0].clone();
                    for i in 1..=n {
                        let p: Vec<f64> = best_pt
                            .iter()
                            .zip(&s.points[i])
                            .map(|(b, q)| b + cfg.shrink * (q - b))
                            .collect();
                        s.values[i] = s.eval(&p);
                        s.points[i] = p;
                    }
                }
            }
            s.sort();
            converged = s.converged(cfg);
        }

        total_iterations += iterations;
        total_evaluations += s.evaluations;
        let stalled = best
            .as_ref()
            .is_some_and(|b| b.value - s.values[0] <= cfg.f_tolerance);
        if best.as_ref().is_none_or(|b| s.values[0] < b.value) {
            start.clone_from(&s.points[0]);
            best = Some(Minimum {
                x: s.points[0].clone(),
                value: s.values[0],
                iterations: 0,
                evaluations: 0,
                converged,
            });
        }
        if stalled || !converged {
            break;
        }
    }
    let mut best = best.expect("at least one round ran");
    best.iterations = total_iterations;
    best.evaluations = total_evaluations;
    Ok(best)
}
