//! File formats: the diagnostics CSV, binary field snapshots and the text report.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSeries};
use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, Space, SpectralGrid};

pub const SERIES_HEADER: &str = "step,t,linf,l2,energy,delta_e";
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"DS2F";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_series_csv(path: &Path, series: &DiagnosticsSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SERIES_HEADER}")?;
    for r in series.records() {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.step, r.t, r.linf, r.l2, r.energy, r.delta_e
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<DiagnosticsSeries> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format(format!("{}: empty series file", path.display())))?;
    if header.trim() != SERIES_HEADER {
        return Err(Error::Format(format!(
            "{}: expected header '{SERIES_HEADER}', found '{}'",
            path.display(),
            header.trim()
        )));
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("{}: malformed row {}", path.display(), n + 2));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(bad());
        }
        let f = |i: usize| cols[i].parse::<f64>().map_err(|_| bad());
        records.push(DiagnosticsRecord {
            step: cols[0].parse().map_err(|_| bad())?,
            t: f(1)?,
            linf: f(2)?,
            l2: f(3)?,
            energy: f(4)?,
            delta_e: f(5)?,
        });
    }
    Ok(DiagnosticsSeries::from_records(records))
}

/// Header of a snapshot file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub n: usize,
    pub d: f64,
    pub t: f64,
    pub epsilon: f64,
}

/// Writes a physical field; samples are stored row by row (rows along `y`).
pub fn write_snapshot(path: &Path, psi: &ComplexField2D, t: f64, epsilon: f64) -> Result<()> {
    psi.require(Space::Physical)?;
    let grid = psi.grid();
    let n = u32::try_from(grid.n()).map_err(|_| Error::Format("grid too large for snapshot".into()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    for v in [grid.d(), t, epsilon] {
        w.write_all(&v.to_le_bytes())?;
    }
    for z in psi.data() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(ComplexField2D, SnapshotMeta)> {
    let mut r = BufReader::new(File::open(path)?);
    let fmt = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| fmt("truncated header"))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(fmt("not a snapshot file (bad magic)"));
    }
    let mut u = [0u8; 4];
    r.read_exact(&mut u).map_err(|_| fmt("truncated header"))?;
    let version = u32::from_le_bytes(u);
    if version != SNAPSHOT_VERSION {
        return Err(fmt(&format!("unsupported snapshot version {version}")));
    }
    r.read_exact(&mut u).map_err(|_| fmt("truncated header"))?;
    let n = u32::from_le_bytes(u) as usize;
    let mut f = [0u8; 8];
    let mut next_f64 = |r: &mut BufReader<File>| -> Result<f64> {
        r.read_exact(&mut f).map_err(|_| fmt("truncated data"))?;
        Ok(f64::from_le_bytes(f))
    };
    let d = next_f64(&mut r)?;
    let t = next_f64(&mut r)?;
    let epsilon = next_f64(&mut r)?;
    let grid: Arc<SpectralGrid> = SpectralGrid::new(d, n)?;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re = next_f64(&mut r)?;
        let im = next_f64(&mut r)?;
        data.push(Complex64::new(re, im));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(fmt("trailing bytes after field data"));
    }
    let field = ComplexField2D::from_vec(&grid, data, Space::Physical)?;
    Ok((field, SnapshotMeta { n, d, t, epsilon }))
}

/// `key = value` lines in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Report::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Format(format!("report line {}: expected 'key = value'", n + 1)))?;
            r.push(k.trim(), v.trim());
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
