//! Run configuration in a flat `key = value` format with dotted section prefixes.
//!
//! ```text
//! # Ozawa data deformed by a Gaussian
//! grid.D = 50
//! grid.N = 1024
//! initial.0.kind = ozawa
//! initial.0.a = 1
//! initial.0.b = -4
//! initial.1.kind = gaussian
//! initial.1.amplitude = 0.1
//! phase.0.steps = 2000
//! phase.0.end = 0.225
//! phase.0.record_every = 10
//! phase.1.steps = 2000
//! phase.1.dt = 1e-5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::diagnostics::GuardConfig;
use crate::error::{Error, Result};
use crate::exact::{Component, InitialDataSpec, LumpParams, OzawaParams};
use crate::solver::{Phase, Scheme, SolverParams};
use crate::tracer::{Axis, TracerConfig};

/// Ordered key/value pairs as read from a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected 'key = value'", lineno + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("'{key}': cannot parse '{v}'"))),
        }
    }

    fn num_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.num(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let Some(v) = self.get(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Config(format!("'{key}': cannot parse '{s}'"))))
            .collect()
    }

    /// Sorted numeric indices `i` for which some key starts with `prefix.i.`.
    fn indices(&self, prefix: &str) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = Vec::new();
        for k in self.0.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            let Some(rest) = k.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) else {
                continue;
            };
            let idx = rest.split('.').next().unwrap_or("");
            let i: usize = idx
                .parse()
                .map_err(|_| Error::Config(format!("'{k}': expected a numeric index after '{prefix}.'")))?;
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "grid.D",
    "grid.N",
    "solver.epsilon",
    "solver.scheme",
    "solver.dealias",
    "initial.prefactor",
    "initial.prefactor_im",
    "time.start",
    "guard.threshold",
    "snapshots.times",
    "fit.window",
    "fit.sensitivity",
    "tracer.axis",
    "tracer.kmin_fraction",
    "tracer.kmax_fraction",
    "tracer.envelope",
    "tracer.stop_every",
    "output.dir",
];

const COMPONENT_KEYS: &[&str] = &[
    "kind", "xi", "eta", "z0", "z0_im", "c", "c_im", "t", "a", "b", "amplitude",
];

const PHASE_KEYS: &[&str] = &["steps", "dt", "end", "record_every"];

fn check_keys(kv: &KeyValues) -> Result<()> {
    for (k, _) in kv.iter() {
        let ok = KNOWN_KEYS.contains(&k)
            || indexed_key_ok(k, "initial", COMPONENT_KEYS)
            || indexed_key_ok(k, "phase", PHASE_KEYS);
        if !ok {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
    }
    Ok(())
}

fn indexed_key_ok(key: &str, prefix: &str, fields: &[&str]) -> bool {
    let mut parts = key.split('.');
    parts.next() == Some(prefix)
        && parts.next().is_some_and(|i| i.parse::<usize>().is_ok())
        && parts.next().is_some_and(|f| fields.contains(&f))
        && parts.next().is_none()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpec {
    pub steps: usize,
    pub step: PhaseStep,
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseStep {
    Dt(f64),
    /// Step size derived from the phase end time and the step count.
    EndTime(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub d: f64,
    pub n: usize,
    pub solver: SolverParams,
    pub initial: InitialDataSpec,
    pub t0: f64,
    pub phases: Vec<PhaseSpec>,
    pub guard: GuardConfig,
    pub snapshot_times: Vec<f64>,
    pub fit_window: usize,
    pub sensitivity_windows: Vec<usize>,
    pub tracer_axis: Axis,
    pub tracer: TracerConfig,
    /// Run the tracer every this many record points and stop once `δ < m`; 0 disables.
    pub tracer_stop_every: usize,
    pub output_dir: PathBuf,
    /// The key/value pairs the configuration was built from, for the report.
    pub source: KeyValues,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if cfg.source.get("name").is_none() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                cfg.name = stem.to_string();
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    pub fn from_key_values(kv: KeyValues) -> Result<Self> {
        check_keys(&kv)?;
        let scheme = match kv.get("solver.scheme").unwrap_or("yoshida4") {
            "yoshida4" => Scheme::Yoshida4,
            "strang2" => Scheme::Strang2,
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        };
        let solver = SolverParams {
            epsilon: kv.num_or("solver.epsilon", 1.0)?,
            scheme,
            dealias: kv.num_or("solver.dealias", false)?,
        };
        solver.validate()?;

        let mut initial: Option<InitialDataSpec> = None;
        for i in kv.indices("initial")? {
            let c = component(&kv, i)?;
            initial = Some(match initial {
                None => InitialDataSpec::single(c),
                Some(s) => s.plus(c),
            });
        }
        let prefactor = Complex64::new(
            kv.num_or("initial.prefactor", 1.0)?,
            kv.num_or("initial.prefactor_im", 0.0)?,
        );
        let initial = initial
            .ok_or_else(|| Error::Config("no initial data components (initial.0.kind = ...)".into()))?
            .with_prefactor(prefactor);
        initial.validate()?;

        let mut phases = Vec::new();
        for i in kv.indices("phase")? {
            let key = |f: &str| format!("phase.{i}.{f}");
            let steps: usize = kv.required(&key("steps"))?;
            let step = match (kv.num::<f64>(&key("dt"))?, kv.num::<f64>(&key("end"))?) {
                (Some(dt), None) => PhaseStep::Dt(dt),
                (None, Some(end)) => PhaseStep::EndTime(end),
                _ => {
                    return Err(Error::Config(format!(
                        "phase {i}: give exactly one of 'dt' and 'end'"
                    )))
                }
            };
            phases.push(PhaseSpec {
                steps,
                step,
                record_every: kv.num_or(&key("record_every"), 1)?,
            });
        }

        let tracer = TracerConfig {
            envelope: kv.num_or("tracer.envelope", crate::tracer::DEFAULT_ENVELOPE)?,
            k_fraction: (
                kv.num_or("tracer.kmin_fraction", 0.4)?,
                kv.num_or("tracer.kmax_fraction", 0.8)?,
            ),
            ..TracerConfig::default()
        };
        let name = kv.get("name").unwrap_or("run").to_string();
        let cfg = Self {
            d: kv.required("grid.D")?,
            n: kv.required("grid.N")?,
            solver,
            initial,
            t0: kv.num_or("time.start", 0.0)?,
            phases,
            guard: GuardConfig::new(kv.num_or("guard.threshold", GuardConfig::default().delta_e_threshold)?)?,
            snapshot_times: kv.list("snapshots.times")?,
            fit_window: kv.num_or("fit.window", crate::blowup::DEFAULT_WINDOW)?,
            sensitivity_windows: match kv.get("fit.sensitivity") {
                Some(_) => kv.list("fit.sensitivity")?,
                None => vec![500, 1000, 1500],
            },
            tracer_axis: kv.get("tracer.axis").unwrap_or("xi1").parse()?,
            tracer,
            tracer_stop_every: kv.num_or("tracer.stop_every", 0)?,
            output_dir: PathBuf::from(kv.get("output.dir").map_or_else(|| format!("out/{name}"), String::from)),
            name,
            source: kv,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::Config("schedule needs at least one phase".into()));
        }
        let mut t = self.t0;
        for (i, ph) in self.schedule()?.iter().enumerate() {
            if ph.record_every == 0 {
                return Err(Error::Config(format!("phase {i}: record_every must be positive")));
            }
            t += ph.duration();
        }
        let tol = 1e-9 * t.abs().max(1.0);
        for &ts in &self.snapshot_times {
            if ts < self.t0 - tol || ts > t + tol {
                return Err(Error::Config(format!(
                    "snapshot time {ts} outside the simulated range [{}, {t}]",
                    self.t0
                )));
            }
        }
        let (lo, hi) = self.tracer.k_fraction;
        if !(lo > 0.0 && hi > lo && hi <= 1.0) {
            return Err(Error::Config(format!("tracer window fractions ({lo}, {hi}) must satisfy 0 < lo < hi <= 1")));
        }
        Ok(())
    }

    /// Phases with their step sizes resolved.
    pub fn schedule(&self) -> Result<Vec<Phase>> {
        let mut t = self.t0;
        let mut out = Vec::with_capacity(self.phases.len());
        for (i, spec) in self.phases.iter().enumerate() {
            let dt = match spec.step {
                PhaseStep::Dt(dt) => dt,
                PhaseStep::EndTime(end) => {
                    if spec.steps == 0 {
                        return Err(Error::Config(format!("phase {i}: end time needs a positive step count")));
                    }
                    (end - t) / spec.steps as f64
                }
            };
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("phase {i}: step size must be positive, got {dt}")));
            }
            let ph = Phase::new(spec.steps, dt, spec.record_every);
            t += ph.duration();
            out.push(ph);
        }
        Ok(out)
    }

    pub fn end_time(&self) -> Result<f64> {
        Ok(self.t0 + self.schedule()?.iter().map(Phase::duration).sum::<f64>())
    }
}

fn component(kv: &KeyValues, i: usize) -> Result<Component> {
    let key = |f: &str| format!("initial.{i}.{f}");
    let kind = kv
        .get(&key("kind"))
        .ok_or_else(|| Error::Config(format!("missing '{}'", key("kind"))))?;
    match kind {
        "lump" => {
            let params = LumpParams::new(
                kv.num_or(&key("xi"), 0.0)?,
                kv.num_or(&key("eta"), 0.0)?,
                Complex64::new(kv.num_or(&key("z0"), 0.0)?, kv.num_or(&key("z0_im"), 0.0)?),
                Complex64::new(kv.num_or(&key("c"), 1.0)?, kv.num_or(&key("c_im"), 0.0)?),
            )?;
            Ok(Component::Lump {
                params,
                t: kv.num_or(&key("t"), 0.0)?,
            })
        }
        "ozawa" => Ok(Component::Ozawa {
            params: OzawaParams::new(kv.required(&key("a"))?, kv.required(&key("b"))?)?,
            t: kv.num_or(&key("t"), 0.0)?,
        }),
        "gaussian" => Ok(Component::Gaussian {
            amplitude: kv.num_or(&key("amplitude"), 1.0)?,
        }),
        other => Err(Error::Config(format!("unknown initial data kind '{other}'"))),
    }
}
