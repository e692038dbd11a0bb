//! CSV and JSON file formats.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) in CSV files and
//! in shortest round-trip form in JSON, so every value reads back bit-exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use roughstruct_core::grid_paths::{SampledPath, TimeGrid};
use roughstruct_core::modelled_distributions::ControlledPath;
use roughstruct_core::rde_solver::SolveDiagnostics;
use roughstruct_core::reconstruction::CertificateEntry;
use roughstruct_core::rough_core::{RoughPath, SecondOrderProcess};
use roughstruct_core::wavelets::CoefficientTable;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] roughstruct_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FormatError::Invalid(msg.into()))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<W: Write>(
    out: W,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt))?;
    }
    w.flush().map_err(|source| FormatError::Io {
        path: PathBuf::from("<csv>"),
        source,
    })?;
    Ok(())
}

/// Reads a header and numeric rows.
fn read_rows<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| FormatError::Invalid(format!("row {}: {f:?}: {e}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return invalid(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                row.len(),
                header.len()
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Recovers the dyadic grid from a time column `0, T/2^J, ..., T`.
fn grid_from_times(times: &[f64]) -> Result<TimeGrid> {
    let intervals = times.len().saturating_sub(1);
    if intervals == 0 || !intervals.is_power_of_two() {
        return invalid(format!(
            "{} rows; a dyadic grid has 2^J + 1 nodes",
            times.len()
        ));
    }
    let grid = TimeGrid::new(times[intervals], intervals.trailing_zeros())?;
    for (k, &t) in times.iter().enumerate() {
        let want = grid.node(k);
        if (t - want).abs() > 1e-12 * grid.horizon() {
            return invalid(format!(
                "time {t} at row {} is off the grid ({want})",
                k + 1
            ));
        }
    }
    Ok(grid)
}

fn header(prefixes: &[(&str, usize)]) -> Vec<String> {
    let mut h = vec!["t".to_owned()];
    for &(p, count) in prefixes {
        h.extend((1..=count).map(|i| format!("{p}{i}")));
    }
    h
}

/// `t,x1,...,xn`, one row per node.
pub fn write_path_csv<W: Write>(path: &SampledPath, out: W) -> Result<()> {
    let grid = *path.grid();
    write_rows(
        out,
        &header(&[("x", path.dim())]),
        (0..grid.len()).map(|k| {
            let mut row = vec![grid.node(k)];
            row.extend_from_slice(path.value(k));
            row
        }),
    )
}

pub fn read_path_csv<R: Read>(input: R) -> Result<SampledPath> {
    let (header, rows) = read_rows(input)?;
    if header.len() < 2 || header[0] != "t" {
        return invalid("path CSV header must be t,x1,...,xn");
    }
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = grid_from_times(&times)?;
    let values = rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    Ok(SampledPath::new(grid, header.len() - 1, values)?)
}

pub fn load_path(file: &Path) -> Result<SampledPath> {
    read_path_csv(read_file(file)?.as_slice())
}

/// `t,y1..yd,yp11..ypdn` with `yp_{aj}` in column `a n + j`.
pub fn write_controlled_csv<W: Write>(cp: &ControlledPath, out: W) -> Result<()> {
    let grid = *cp.grid();
    let (d, n) = (cp.dim(), cp.driver_dim());
    let mut h = header(&[("y", d)]);
    for a in 1..=d {
        for j in 1..=n {
            h.push(format!("yp{a}{j}"));
        }
    }
    write_rows(
        out,
        &h,
        (0..grid.len()).map(|k| {
            let mut row = vec![grid.node(k)];
            row.extend_from_slice(cp.y.value(k));
            row.extend_from_slice(cp.y_prime.value(k));
            row
        }),
    )
}

/// Reads a controlled path written by [`write_controlled_csv`]; `n` is the
/// driver dimension.
pub fn read_controlled_csv<R: Read>(input: R, n: usize) -> Result<ControlledPath> {
    let (header, rows) = read_rows(input)?;
    let cols = header.len().saturating_sub(1);
    if header.first().map(String::as_str) != Some("t") || n == 0 || cols % (1 + n) != 0 {
        return invalid(format!(
            "controlled-path CSV needs t, d values and d x {n} derivatives"
        ));
    }
    let d = cols / (1 + n);
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = grid_from_times(&times)?;
    let y = rows
        .iter()
        .flat_map(|r| r[1..1 + d].iter().copied())
        .collect();
    let yp = rows
        .iter()
        .flat_map(|r| r[1 + d..].iter().copied())
        .collect();
    Ok(ControlledPath::new(
        SampledPath::new(grid, d, y)?,
        SampledPath::new(grid, d * n, yp)?,
        n,
    )?)
}

/// Rough-path file: the path lives in a separate CSV, the second-order
/// process is stored per finest interval plus, when present, every coarse
/// dyadic block as `[level, block, tensor]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoughPathFile {
    pub alpha: f64,
    pub path_csv: String,
    pub second_order: Vec<(usize, Vec<f64>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dyadic_blocks: Vec<(u32, usize, Vec<f64>)>,
}

fn tensors(flat: &[f64], q: usize) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
    flat.chunks(q).enumerate().map(|(k, c)| (k, c.to_vec()))
}

impl RoughPathFile {
    pub fn from_rough_path(rp: &RoughPath, path_csv: String) -> Self {
        let n = rp.dim();
        let second = rp.second();
        let dyadic_blocks = second
            .pyramid()
            .iter()
            .enumerate()
            .flat_map(|(m, level)| tensors(level, n * n).map(move |(b, t)| (m as u32, b, t)))
            .collect();
        Self {
            alpha: rp.alpha(),
            path_csv,
            second_order: tensors(second.intervals(), n * n).collect(),
            dyadic_blocks,
        }
    }

    pub fn into_rough_path(self, path: SampledPath) -> Result<RoughPath> {
        let grid = *path.grid();
        let n = path.dim();
        let q = n * n;
        let mut finest = vec![f64::NAN; grid.intervals() * q];
        for (k, t) in &self.second_order {
            if *k >= grid.intervals() || t.len() != q {
                return invalid(format!("second_order entry {k} does not fit the path"));
            }
            finest[k * q..(k + 1) * q].copy_from_slice(t);
        }
        if finest.iter().any(|v| v.is_nan()) {
            return invalid("second_order must cover every finest interval");
        }
        let second = if self.dyadic_blocks.is_empty() {
            SecondOrderProcess::new(grid, n, finest)?
        } else {
            let mut pyramid: Vec<Vec<f64>> = (0..grid.level())
                .map(|m| vec![f64::NAN; (1usize << m) * q])
                .collect();
            for (m, b, t) in &self.dyadic_blocks {
                let Some(level) = pyramid.get_mut(*m as usize) else {
                    return invalid(format!(
                        "dyadic block level {m} is not coarser than the grid"
                    ));
                };
                if *b >= 1usize << m || t.len() != q {
                    return invalid(format!("dyadic block ({m}, {b}) does not fit the path"));
                }
                level[b * q..(b + 1) * q].copy_from_slice(t);
            }
            if pyramid.iter().flatten().any(|v| v.is_nan()) {
                return invalid("dyadic_blocks must cover every coarse block");
            }
            SecondOrderProcess::with_pyramid(grid, n, finest, pyramid)?
        };
        Ok(RoughPath::new(path, second, self.alpha)?)
    }
}

/// Writes the rough path as JSON to `json` and its path as CSV to `csv`;
/// the JSON refers to the CSV by file name when both share a directory.
pub fn save_rough_path(rp: &RoughPath, json: &Path, csv: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_path_csv(rp.path(), &mut buf)?;
    write_file(csv, &buf)?;
    let reference = if json.parent() == csv.parent() {
        csv.file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        csv.to_string_lossy().into_owned()
    };
    let file = RoughPathFile::from_rough_path(rp, reference);
    write_file(json, &to_json(&file)?)
}

/// Loads a rough-path JSON; a relative `path_csv` is resolved against the
/// JSON's directory.
pub fn load_rough_path(json: &Path) -> Result<RoughPath> {
    let file: RoughPathFile = serde_json::from_slice(&read_file(json)?)?;
    let csv = Path::new(&file.path_csv);
    let csv = if csv.is_relative() {
        json.parent().unwrap_or(Path::new(".")).join(csv)
    } else {
        csv.to_owned()
    };
    let path = load_path(&csv)?;
    file.into_rough_path(path)
}

/// `{"l": base level, "phi": [[k, value]...], "psi": [[j, k, value]...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub l: u32,
    pub phi: Vec<(i64, f64)>,
    pub psi: Vec<(u32, i64, f64)>,
}

impl From<&CoefficientTable> for CoefficientFile {
    fn from(t: &CoefficientTable) -> Self {
        Self {
            l: t.base_level(),
            phi: t.scaling.iter().collect(),
            psi: t
                .wavelet
                .iter()
                .flat_map(|b| b.iter().map(move |(k, v)| (b.level, k, v)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowRecord {
    pub t0: f64,
    pub t1: f64,
    pub iters: usize,
    pub ratio: f64,
    pub working_box: Vec<(f64, f64)>,
}

/// `{windows: [{t0, t1, iters, ratio, working_box}], residual}` plus the
/// number of window halvings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub windows: Vec<WindowRecord>,
    pub halvings: usize,
    pub residual: f64,
}

impl From<&SolveDiagnostics> for DiagnosticsFile {
    fn from(d: &SolveDiagnostics) -> Self {
        Self {
            windows: d
                .windows
                .iter()
                .map(|w| WindowRecord {
                    t0: w.t0,
                    t1: w.t1,
                    iters: w.iters,
                    ratio: w.ratio,
                    working_box: w.working_box.clone(),
                })
                .collect(),
            halvings: d.halvings,
            residual: d.residual,
        }
    }
}

/// `lambda,s,ratio`.
pub fn write_certificate_csv<W: Write>(entries: &[CertificateEntry], out: W) -> Result<()> {
    let h = ["lambda", "s", "ratio"].map(String::from);
    write_rows(
        out,
        &h,
        entries.iter().map(|e| vec![e.lambda, e.s, e.ratio]),
    )
}

/// `scale,error`.
pub fn write_convergence_csv<W: Write>(samples: &[(f64, f64)], out: W) -> Result<()> {
    let h = ["scale", "error"].map(String::from);
    write_rows(out, &h, samples.iter().map(|&(a, b)| vec![a, b]))
}

/// `t` then one column per component, named `prefix{i}`.
pub fn write_series_csv<W: Write>(path: &SampledPath, prefix: &str, out: W) -> Result<()> {
    let grid = *path.grid();
    write_rows(
        out,
        &header(&[(prefix, path.dim())]),
        (0..grid.len()).map(|k| {
            let mut row = vec![grid.node(k)];
            row.extend_from_slice(path.value(k));
            row
        }),
    )
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}
