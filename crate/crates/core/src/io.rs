//! File formats and report generation behind the command-line tool.
//!
//! Configurations and mode sets are JSON; bulk numeric output is CSV with
//! every float written to 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmt_solver::{self, ScatteringResult, Truncation};
use crate::coupling::{block_name, CouplingBlock, CouplingData, Provenance};
use crate::error::{Error, Result};
use crate::exact_reference;
use crate::interior_expansion::bessel_target_fit;
use crate::model::complex_list::ComplexRecord;
use crate::model::{Background, FictitiousDisk, IncidentField, MediumSpec};
use crate::specfun::{cyl_zeros, ZeroKind};
use crate::waveguide::{self, WaveguideSystem};

/// Version written to and required of mode-set files.
pub const FORMAT_VERSION: u32 = 1;

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// Reads and parses a JSON file.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// One block of a mode-set file. Matrices are stored as lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    pub l_values: Vec<i32>,
    pub omega_neumann: Vec<f64>,
    pub omega_dirichlet: Vec<f64>,
    /// `N_N` rows of `l_values.len()` entries `{"re": x, "im": y}`.
    pub gamma: Vec<Vec<ComplexRecord>>,
    /// `N_N` rows of `N_D` entries.
    pub h: Vec<Vec<f64>>,
    /// `N_N` rows of `N_D` entries.
    pub l: Vec<Vec<f64>>,
}

/// Serialized coupling data of a whole medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSetFile {
    pub format_version: u32,
    pub radius: f64,
    pub background: Background,
    pub provenance: String,
    pub blocks: Vec<BlockRecord>,
}

fn rows_f64(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows<T: Clone + nalgebra::Scalar>(
    rows: &[Vec<T>],
    ncols: usize,
    label: &str,
    location: &str,
) -> Result<DMatrix<T>> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Schema {
                location: location.to_string(),
                message: format!("{label} row {i} has {} entries, expected {ncols}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().cloned()))
}

impl ModeSetFile {
    pub fn from_coupling(data: &CouplingData) -> Self {
        let blocks = data
            .blocks
            .iter()
            .map(|b| BlockRecord {
                order: b.order,
                l_values: b.l_values.clone(),
                omega_neumann: b.omega_n.clone(),
                omega_dirichlet: b.omega_d.clone(),
                gamma: (0..b.gamma.nrows())
                    .map(|i| b.gamma.row(i).iter().map(|&c| c.into()).collect())
                    .collect(),
                h: rows_f64(&b.h),
                l: rows_f64(&b.l),
            })
            .collect();
        let provenance = match data.provenance {
            Provenance::Analytic => "analytic",
            Provenance::Ingested => "ingested",
        };
        Self {
            format_version: FORMAT_VERSION,
            radius: data.radius,
            background: data.background,
            provenance: provenance.into(),
            blocks,
        }
    }

    /// Validates the file and converts it to coupling data marked as
    /// ingested.
    pub fn into_coupling(self) -> Result<CouplingData> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Schema {
                location: "format_version".into(),
                message: format!("version {} is not supported (expected {FORMAT_VERSION})", self.format_version),
            });
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, rec) in self.blocks.into_iter().enumerate() {
            let location = format!("block {i}{}", rec.order.map(|n| format!(" (order {n})")).unwrap_or_default());
            let (nn, nd, nl) = (rec.omega_neumann.len(), rec.omega_dirichlet.len(), rec.l_values.len());
            for (label, rows) in [("gamma", rec.gamma.len()), ("H", rec.h.len()), ("L", rec.l.len())] {
                if rows != nn {
                    return Err(Error::Schema {
                        location,
                        message: format!("{label} has {rows} rows, expected {nn} (one per Neumann mode)"),
                    });
                }
            }
            let gamma_rows: Vec<Vec<Complex64>> =
                rec.gamma.iter().map(|r| r.iter().map(|&c| c.into()).collect()).collect();
            let gamma = matrix_from_rows(&gamma_rows, nl, "gamma", &location)?;
            let h = matrix_from_rows(&rec.h, nd, "H", &location)?;
            let l = matrix_from_rows(&rec.l, nd, "L", &location)?;
            let block = CouplingBlock {
                order: rec.order,
                l_values: rec.l_values,
                omega_n: rec.omega_neumann,
                omega_d: rec.omega_dirichlet,
                gamma,
                h,
                l,
            };
            block.check(&block_name(i, &block))?;
            blocks.push(block);
        }
        let data = CouplingData { radius: self.radius, background: self.background, blocks, provenance: Provenance::Ingested };
        data.check()?;
        Ok(data)
    }
}

pub fn write_mode_set(data: &CouplingData, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&ModeSetFile::from_coupling(data))?;
    text.push('\n');
    emit(&text, path)
}

pub fn parse_mode_set(text: &str) -> Result<CouplingData> {
    serde_json::from_str::<ModeSetFile>(text)?.into_coupling()
}

pub fn read_mode_set(path: &Path) -> Result<CouplingData> {
    parse_mode_set(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Unit of the grid bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariable {
    /// Angular frequency.
    #[default]
    Omega,
    /// `omega L / (2 pi c)` for the problem's reference length.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default)]
    pub variable: GridVariable,
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::Config(format!("grid count must be at least 2, got {}", self.count)));
        }
        if !(self.min > 0.0 && self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::Config(format!("grid needs 0 < min < max, got [{}, {}]", self.min, self.max)));
        }
        Ok(())
    }

    /// Grid values in the configured variable.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.count - 1;
        Ok((0..self.count)
            .map(|i| {
                let t = i as f64 / n as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                    Spacing::Log => self.min * (self.max / self.min).powf(t),
                }
            })
            .collect())
    }

    /// Angular frequencies; `length` and `sound_speed` convert scaled values.
    pub fn omegas(&self, length: f64, sound_speed: f64) -> Result<Vec<f64>> {
        let factor = match self.variable {
            GridVariable::Omega => 1.0,
            GridVariable::Scaled => 2.0 * std::f64::consts::PI * sound_speed / length,
        };
        Ok(self.values()?.into_iter().map(|v| v * factor).collect())
    }
}

/// Optional acceptance thresholds; a violated threshold fails the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub unitarity: Option<f64>,
    #[serde(default)]
    pub optical: Option<f64>,
    /// Bound on the relative error against the closed form.
    #[serde(default)]
    pub exact: Option<f64>,
    #[serde(default)]
    pub solve: Option<f64>,
}

fn default_constant() -> f64 {
    1.5
}

fn default_incident() -> Option<IncidentField> {
    Some(IncidentField::PlaneWave { direction: [1.0, 0.0] })
}

/// Configuration of the `spectrum`, `exact` and `modes` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub medium: MediumSpec,
    #[serde(default)]
    pub disk: FictitiousDisk,
    /// Defaults to a plane wave along `x1`; `null` disables incidence.
    #[serde(default = "default_incident")]
    pub incident: Option<IncidentField>,
    pub grid: FrequencyGrid,
    #[serde(default = "default_constant")]
    pub truncation_constant: f64,
    /// Angular orders to retain; all orders up to the angular truncation
    /// when absent.
    #[serde(default)]
    pub orders: Option<Vec<u32>>,
    #[serde(default)]
    pub compare_exact: bool,
    /// Mode-set file to ingest instead of computing the coupling.
    #[serde(default)]
    pub mode_set: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.truncation_constant > 0.0 && self.truncation_constant.is_finite()) {
            return Err(Error::Config(format!("truncation constant must be positive, got {}", self.truncation_constant)));
        }
        if !(self.disk.radius > 0.0 && self.disk.radius.is_finite()) {
            return Err(Error::Config("disk radius must be positive".into()));
        }
        self.medium.validate(&self.disk)
    }

    pub fn omegas(&self) -> Result<Vec<f64>> {
        self.grid.omegas(self.disk.radius, self.medium.background.sound_speed())
    }

    /// Loads a configuration; a relative `mode_set` path is resolved
    /// against the configuration's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_json(path)?;
        if let (Some(ms), Some(dir)) = (&cfg.mode_set, path.parent()) {
            if ms.is_relative() {
                cfg.mode_set = Some(dir.join(ms));
            }
        }
        Ok(cfg)
    }
}

/// Coupling data for a sweep, either ingested or computed analytically.
pub fn sweep_coupling(config: &SweepConfig) -> Result<(Option<Truncation>, CouplingData)> {
    config.validate()?;
    match &config.mode_set {
        Some(path) => {
            let data = read_mode_set(path)?;
            if (data.radius - config.disk.radius).abs() > 1e-12 * config.disk.radius {
                return Err(Error::Config(format!(
                    "mode set radius {} differs from disk radius {}",
                    data.radius, config.disk.radius
                )));
            }
            Ok((None, data))
        }
        None => {
            let max_omega = *config.omegas()?.last().expect("grid has two points");
            let (t, data) = cmt_solver::concentric_coupling(
                config.truncation_constant,
                config.disk.radius,
                &config.medium,
                max_omega,
                config.orders.as_deref(),
            )?;
            Ok((Some(t), data))
        }
    }
}

/// One sweep row; `Err` holds the diagnostic of a failed frequency.
#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub omega: f64,
    pub result: std::result::Result<SpectrumValues, String>,
}

#[derive(Debug, Clone)]
pub struct SpectrumValues {
    pub diagonal: Vec<Complex64>,
    pub offdiag_norm: f64,
    pub sigma: f64,
    pub unitarity: f64,
    pub optical: f64,
    pub solve: f64,
    pub exact: Option<(Vec<Complex64>, f64)>,
}

/// Summary written next to the spectrum CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub rows: usize,
    pub failed_rows: usize,
    pub failures: Vec<String>,
    pub l_values: Vec<i32>,
    pub n_neumann: usize,
    pub n_dirichlet: usize,
    pub l_max: Option<u32>,
    pub omega_threshold: Option<f64>,
    /// `(order, radial Neumann count, radial Dirichlet count)`.
    pub counts: Vec<(u32, usize, usize)>,
    pub provenance: Provenance,
    pub max_unitarity_residual: f64,
    pub max_optical_residual: f64,
    pub max_solve_residual: f64,
    pub max_exact_error: Option<f64>,
    pub tolerance_violations: Vec<String>,
    pub elapsed_seconds: f64,
}

impl SpectrumSummary {
    pub fn passed(&self) -> bool {
        self.failed_rows == 0 && self.tolerance_violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub l_values: Vec<i32>,
    pub compare_exact: bool,
    pub disk_radius: f64,
    pub sound_speed: f64,
    pub rows: Vec<SpectrumRow>,
    pub summary: SpectrumSummary,
}

fn offdiag_norm(s: &DMatrix<Complex64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            if i != j {
                sum += s[(i, j)].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

fn spectrum_values(
    config: &SweepConfig,
    coupling: &CouplingData,
    omega: f64,
) -> Result<SpectrumValues> {
    let r: ScatteringResult = cmt_solver::solve(coupling, omega, config.incident.as_ref())?;
    let diagonal = r.diagonal();
    let exact = if config.compare_exact {
        let e = exact_reference::exact_diagonal(&config.medium, &r.l_values, omega)?;
        let err = diagonal
            .iter()
            .zip(&e)
            .map(|(s, x)| (s - x).norm() / x.norm())
            .fold(0.0f64, f64::max);
        Some((e, err))
    } else {
        None
    };
    Ok(SpectrumValues {
        offdiag_norm: offdiag_norm(&r.s),
        diagonal,
        sigma: r.sigma,
        unitarity: r.unitarity_residual,
        optical: r.optical_residual.unwrap_or(f64::NAN),
        solve: r.solve_residual,
        exact,
    })
}

fn check_tolerance(violations: &mut Vec<String>, label: &str, value: f64, bound: Option<f64>) {
    if let Some(b) = bound {
        if !(value <= b) {
            violations.push(format!("{label} {value:e} exceeds {b:e}"));
        }
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.filter(|v| !v.is_nan()).fold(0.0f64, f64::max)
}

/// Solves the coupled-mode equation over the configured grid.
pub fn run_spectrum(config: &SweepConfig) -> Result<SpectrumReport> {
    let start = Instant::now();
    let (truncation, coupling) = sweep_coupling(config)?;
    let omegas = config.omegas()?;
    let rows: Vec<SpectrumRow> = omegas
        .par_iter()
        .map(|&omega| SpectrumRow {
            omega,
            result: spectrum_values(config, &coupling, omega).map_err(|e| format!("omega = {omega}: {e}")),
        })
        .collect();

    let ok: Vec<&SpectrumValues> = rows.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let failures: Vec<String> = rows.iter().filter_map(|r| r.result.as_ref().err().cloned()).collect();
    for f in &failures {
        log::error!("{f}");
    }
    let max_unitarity = max_of(ok.iter().map(|v| v.unitarity));
    let max_optical = max_of(ok.iter().map(|v| v.optical));
    let max_solve = max_of(ok.iter().map(|v| v.solve));
    let max_exact = config.compare_exact.then(|| max_of(ok.iter().filter_map(|v| v.exact.as_ref().map(|e| e.1))));
    let mut violations = Vec::new();
    let tol = &config.tolerances;
    check_tolerance(&mut violations, "unitarity residual", max_unitarity, tol.unitarity);
    check_tolerance(&mut violations, "optical residual", max_optical, tol.optical);
    check_tolerance(&mut violations, "solve residual", max_solve, tol.solve);
    if let Some(e) = max_exact {
        check_tolerance(&mut violations, "exact error", e, tol.exact);
    } else if tol.exact.is_some() {
        violations.push("exact tolerance given without compare_exact".into());
    }

    let summary = SpectrumSummary {
        rows: rows.len(),
        failed_rows: failures.len(),
        failures,
        l_values: coupling.l_values(),
        n_neumann: coupling.n_neumann(),
        n_dirichlet: coupling.n_dirichlet(),
        l_max: truncation.as_ref().map(|t| t.l_max),
        omega_threshold: truncation.as_ref().map(|t| t.omega_threshold),
        counts: truncation.map(|t| t.counts).unwrap_or_default(),
        provenance: coupling.provenance,
        max_unitarity_residual: max_unitarity,
        max_optical_residual: max_optical,
        max_solve_residual: max_solve,
        max_exact_error: max_exact,
        tolerance_violations: violations,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(SpectrumReport {
        l_values: coupling.l_values(),
        compare_exact: config.compare_exact,
        disk_radius: config.disk.radius,
        sound_speed: config.medium.background.sound_speed(),
        rows,
        summary,
    })
}

impl SpectrumReport {
    /// Columns: `omega, scaled, re_S_l, im_S_l` for each retained `l`,
    /// `offdiag_norm, sigma, unitarity_residual, optical_residual,
    /// solve_residual`, then `re_exact_l, im_exact_l` per `l` and
    /// `exact_rel_error` when comparing. Failed rows hold `NaN`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["omega".to_string(), "scaled".to_string()];
        for l in &self.l_values {
            header.push(format!("re_S_{l}"));
            header.push(format!("im_S_{l}"));
        }
        for h in ["offdiag_norm", "sigma", "unitarity_residual", "optical_residual", "solve_residual"] {
            header.push(h.into());
        }
        if self.compare_exact {
            for l in &self.l_values {
                header.push(format!("re_exact_{l}"));
                header.push(format!("im_exact_{l}"));
            }
            header.push("exact_rel_error".into());
        }
        let width = header.len();
        let mut out = csv_line(&header);
        let scale = self.disk_radius / (2.0 * std::f64::consts::PI * self.sound_speed);
        for row in &self.rows {
            let mut f = vec![fmt_float(row.omega), fmt_float(row.omega * scale)];
            match &row.result {
                Ok(v) => {
                    for s in &v.diagonal {
                        f.push(fmt_float(s.re));
                        f.push(fmt_float(s.im));
                    }
                    for x in [v.offdiag_norm, v.sigma, v.unitarity, v.optical, v.solve] {
                        f.push(fmt_float(x));
                    }
                    if let Some((e, err)) = &v.exact {
                        for s in e {
                            f.push(fmt_float(s.re));
                            f.push(fmt_float(s.im));
                        }
                        f.push(fmt_float(*err));
                    }
                }
                Err(_) => f.resize(width, fmt_float(f64::NAN)),
            }
            out.push_str(&csv_line(&f));
        }
        out
    }
}

/// Analytic coupling data selected by a sweep configuration.
pub fn run_modes(config: &SweepConfig) -> Result<CouplingData> {
    let (_, data) = sweep_coupling(config)?;
    Ok(data)
}

/// Closed-form scattering over the grid: columns `omega, scaled`, then
/// `re_S_l, im_S_l` per harmonic and `sigma`. Harmonics run over
/// `-L..=L` with `L` from the configured orders or the angular truncation
/// at the largest frequency.
pub fn run_exact(config: &SweepConfig) -> Result<(String, usize)> {
    config.validate()?;
    let omegas = config.omegas()?;
    let background = config.medium.background;
    let l_max = match &config.orders {
        Some(o) => o.iter().copied().max().unwrap_or(0),
        None => cmt_solver::rokhlin_order(background.wavenumber(*omegas.last().expect("grid")) * config.disk.radius),
    } as i32;
    let l_values: Vec<i32> = (-l_max..=l_max).collect();
    let mut header = vec!["omega".to_string(), "scaled".to_string()];
    for l in &l_values {
        header.push(format!("re_S_{l}"));
        header.push(format!("im_S_{l}"));
    }
    header.push("sigma".into());
    let width = header.len();
    let scale = config.disk.radius / (2.0 * std::f64::consts::PI * background.sound_speed());
    let rows: Vec<std::result::Result<Vec<String>, String>> = omegas
        .par_iter()
        .map(|&omega| {
            let row = || -> Result<Vec<String>> {
                let s = exact_reference::exact_diagonal(&config.medium, &l_values, omega)?;
                let alpha = match &config.incident {
                    Some(inc) => inc.coefficients(&l_values)?,
                    None => vec![Complex64::new(0.0, 0.0); l_values.len()],
                };
                let f: Vec<Complex64> = s.iter().zip(&alpha).map(|(s, a)| (s - 1.0) * a).collect();
                let mut out = vec![fmt_float(omega), fmt_float(omega * scale)];
                for v in &s {
                    out.push(fmt_float(v.re));
                    out.push(fmt_float(v.im));
                }
                out.push(fmt_float(cmt_solver::cross_section(&f, background.wavenumber(omega))));
                Ok(out)
            };
            row().map_err(|e| format!("omega = {omega}: {e}"))
        })
        .collect();
    let mut out = csv_line(&header);
    let mut failed = 0;
    for (omega, row) in omegas.iter().zip(rows) {
        let fields = row.unwrap_or_else(|e| {
            log::error!("{e}");
            failed += 1;
            let mut f = vec![fmt_float(*omega), fmt_float(omega * scale)];
            f.resize(width, fmt_float(f64::NAN));
            f
        });
        out.push_str(&csv_line(&fields));
    }
    Ok((out, failed))
}

fn default_zero_orders() -> Vec<u32> {
    vec![0]
}

fn default_zero_count() -> usize {
    10
}

/// Configuration of the `zeros` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZerosConfig {
    #[serde(default = "default_zero_orders")]
    pub orders: Vec<u32>,
    #[serde(default = "default_zero_count")]
    pub count: usize,
}

impl Default for ZerosConfig {
    fn default() -> Self {
        Self { orders: default_zero_orders(), count: default_zero_count() }
    }
}

/// Columns `kind, order, index, z, z_over_2pi`: zeros of `J_n'` (kind
/// `J'`, Neumann) then zeros of `J_n` (kind `J`, Dirichlet) for each order.
pub fn run_zeros(config: &ZerosConfig) -> Result<String> {
    let mut out = csv_line(&["kind", "order", "index", "z", "z_over_2pi"].map(String::from));
    for &n in &config.orders {
        for kind in [ZeroKind::JPrime, ZeroKind::J] {
            let table = cyl_zeros(kind, n, config.count)?;
            for (i, z) in table.zeros.iter().enumerate() {
                out.push_str(&csv_line(&[
                    kind.to_string(),
                    n.to_string(),
                    (i + 1).to_string(),
                    fmt_float(*z),
                    fmt_float(z / (2.0 * std::f64::consts::PI)),
                ]));
            }
        }
    }
    Ok(out)
}

fn default_radius() -> f64 {
    1.0
}

/// Configuration of the `expand` subcommand: fits of `J_0(k r)` on the
/// homogeneous disk with `(N_N, N_D)` modes per case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandConfig {
    pub kr: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub cases: Vec<(usize, usize)>,
}

/// Columns `n_neumann, n_dirichlet, kr, linf_rel_error`.
pub fn run_expand(config: &ExpandConfig) -> Result<String> {
    if !(config.kr > 0.0 && config.kr.is_finite()) {
        return Err(Error::Config(format!("kR must be positive, got {}", config.kr)));
    }
    if config.cases.is_empty() {
        return Err(Error::Config("no expansion cases given".into()));
    }
    let errors = config
        .cases
        .par_iter()
        .map(|&(nn, nd)| bessel_target_fit(config.kr, config.radius, nn, nd).map(|(_, e)| e))
        .collect::<Result<Vec<_>>>()?;
    let mut out = csv_line(&["n_neumann", "n_dirichlet", "kr", "linf_rel_error"].map(String::from));
    for (&(nn, nd), e) in config.cases.iter().zip(errors) {
        out.push_str(&csv_line(&[nn.to_string(), nd.to_string(), fmt_float(config.kr), fmt_float(e)]));
    }
    Ok(out)
}

/// Configuration of the `waveguide` subcommand. Scaled grid values are
/// `omega W / (2 pi c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    pub system: WaveguideSystem,
    pub grid: FrequencyGrid,
    /// Bound on `| |alpha+_0| - 1 |`.
    #[serde(default)]
    pub unitarity_tolerance: Option<f64>,
    /// Bound on `|alpha+_0 - r_oracle|`.
    #[serde(default)]
    pub oracle_tolerance: Option<f64>,
}

/// Columns `omega, re_alpha_out, im_alpha_out, abs_alpha_out, re_oracle,
/// im_oracle, error` for unit incidence in the fundamental mode. The
/// oracle columns are `NaN` where more than one mode propagates. Returns
/// the CSV and the list of violated tolerances or failures.
pub fn run_waveguide(config: &WaveguideConfig) -> Result<(String, Vec<String>)> {
    config.system.validate()?;
    let omegas = config.grid.omegas(config.system.stub_depth, config.system.background.sound_speed())?;
    let rows: Vec<(f64, std::result::Result<(Complex64, Option<Complex64>), String>)> = omegas
        .par_iter()
        .map(|&omega| {
            let r = waveguide::solve_waveguide_cme(&config.system, omega, &[Complex64::new(1.0, 0.0)])
                .map(|s| (s.alpha_out[0], waveguide::stub_reflection_oracle(&config.system, omega).ok()))
                .map_err(|e| format!("omega = {omega}: {e}"));
            (omega, r)
        })
        .collect();
    let header = ["omega", "re_alpha_out", "im_alpha_out", "abs_alpha_out", "re_oracle", "im_oracle", "error"];
    let mut out = csv_line(&header.map(String::from));
    let mut problems = Vec::new();
    let nan = f64::NAN;
    for (omega, row) in rows {
        let values = match row {
            Ok((a, oracle)) => {
                let (o, err) = match oracle {
                    Some(o) => (o, (a - o).norm()),
                    None => (Complex64::new(nan, nan), nan),
                };
                if let Some(t) = config.unitarity_tolerance {
                    if !((a.norm() - 1.0).abs() <= t) {
                        problems.push(format!("omega = {omega}: |alpha+| = {}", a.norm()));
                    }
                }
                if let (Some(t), false) = (config.oracle_tolerance, err.is_nan()) {
                    if err > t {
                        problems.push(format!("omega = {omega}: oracle error {err:e} exceeds {t:e}"));
                    }
                }
                [a.re, a.im, a.norm(), o.re, o.im, err]
            }
            Err(e) => {
                problems.push(e);
                [nan; 6]
            }
        };
        let mut fields = vec![fmt_float(omega)];
        fields.extend(values.iter().map(|&v| fmt_float(v)));
        out.push_str(&csv_line(&fields));
    }
    Ok((out, problems))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bubble_coupling() -> CouplingData {
        let medium = MediumSpec::air_bubble(0.5);
        cmt_solver::concentric_coupling(1.5, 1.0, &medium, 2.0, Some(&[0, 1])).unwrap().1
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn mode_set_round_trip_is_exact() {
        let data = bubble_coupling();
        let text = serde_json::to_string(&ModeSetFile::from_coupling(&data)).unwrap();
        let back = parse_mode_set(&text).unwrap();
        assert_eq!(back.provenance, Provenance::Ingested);
        assert_eq!(back.blocks, data.blocks);
        assert_eq!(back.radius, data.radius);
        let again = serde_json::to_string(&ModeSetFile::from_coupling(&back)).unwrap();
        assert_eq!(again.replace("ingested", "analytic"), text);
    }

    #[test]
    fn complex_entries_are_re_im_objects() {
        let text = serde_json::to_string(&ModeSetFile::from_coupling(&bubble_coupling())).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let entry = &v["blocks"][0]["gamma"][0][0];
        assert!(entry["re"].is_f64() && entry["im"].is_f64());
    }

    #[test]
    fn truncated_block_names_the_block() {
        let mut file = ModeSetFile::from_coupling(&bubble_coupling());
        file.blocks[1].h.pop();
        let err = file.into_coupling().unwrap_err().to_string();
        assert!(err.contains("block 1 (order 1)") && err.contains("H has"), "{err}");

        let mut file = ModeSetFile::from_coupling(&bubble_coupling());
        file.blocks[0].gamma[2].clear();
        let err = file.into_coupling().unwrap_err().to_string();
        assert!(err.contains("block 0 (order 0)") && err.contains("gamma row 2"), "{err}");
    }

    #[test]
    fn version_and_ordering_are_checked() {
        let mut file = ModeSetFile::from_coupling(&bubble_coupling());
        file.format_version = 7;
        assert!(file.into_coupling().unwrap_err().to_string().contains("format_version"));

        let mut file = ModeSetFile::from_coupling(&bubble_coupling());
        file.blocks[0].omega_dirichlet.swap(0, 1);
        assert!(file.into_coupling().unwrap_err().to_string().contains("not ascending"));
    }

    #[test]
    fn parse_errors_report_position() {
        let err = parse_mode_set("{\"format_version\": 1,\n \"radius\": }").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn grid_spacing() {
        let g = FrequencyGrid { min: 1.0, max: 100.0, count: 3, spacing: Spacing::Log, variable: GridVariable::Omega };
        let v = g.values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[2] == 100.0);
        let g = FrequencyGrid { count: 1, ..g };
        assert!(g.values().is_err());
        let g = FrequencyGrid { min: 0.5, max: 1.0, count: 2, spacing: Spacing::Linear, variable: GridVariable::Scaled };
        let w = g.omegas(2.0, 1.0).unwrap();
        assert!((w[0] - std::f64::consts::PI / 2.0).abs() < 1e-15);
    }

    fn homogeneous_sweep() -> SweepConfig {
        serde_json::from_str(
            r#"{"medium": {}, "grid": {"min": 0.05, "max": 0.5, "count": 6, "variable": "scaled"},
                "compare_exact": true, "tolerances": {"exact": 1e-8, "unitarity": 1e-8}}"#,
        )
        .unwrap()
    }

    #[test]
    fn homogeneous_spectrum_is_identity() {
        let report = run_spectrum(&homogeneous_sweep()).unwrap();
        assert!(report.summary.passed(), "{:?}", report.summary);
        assert!(report.summary.max_exact_error.unwrap() <= 1e-8);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
        assert_eq!(csv, run_spectrum(&homogeneous_sweep()).unwrap().to_csv());
    }

    #[test]
    fn violated_tolerance_fails_the_run() {
        let mut cfg = homogeneous_sweep();
        cfg.tolerances.exact = Some(0.0);
        cfg.grid.max = 1.0;
        let report = run_spectrum(&cfg).unwrap();
        assert!(!report.summary.passed());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = homogeneous_sweep();
        cfg.truncation_constant = 0.0;
        assert!(matches!(run_spectrum(&cfg), Err(Error::Config(_))));
        assert!(serde_json::from_str::<SweepConfig>(r#"{"medium": {}, "grid": {"min": 1, "max": 2, "count": 2}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn zeros_csv_reproduces_table_values() {
        let csv = run_zeros(&ZerosConfig::default()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 21);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[0], "J'");
        assert!((first[4].parse::<f64>().unwrap() - 0.60983).abs() < 5e-6);
    }

    #[test]
    fn exact_csv_for_sound_hard_disk() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"medium": {"sound_hard_core_radius": 0.5}, "grid": {"min": 1, "max": 2, "count": 2}}"#,
        )
        .unwrap();
        let (csv, failed) = run_exact(&cfg).unwrap();
        assert_eq!(failed, 0);
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!(*row.last().unwrap() > 0.0);
    }

    #[test]
    fn waveguide_csv_flags_multimode_oracle() {
        let cfg = WaveguideConfig {
            system: WaveguideSystem { duct_width: 1.0, stub_depth: 1.0, background: Background::default(), n_cavity: 10 },
            grid: FrequencyGrid { min: 1.0, max: 4.0, count: 2, spacing: Spacing::Linear, variable: GridVariable::Omega },
            unitarity_tolerance: Some(1e-6),
            oracle_tolerance: None,
        };
        let (csv, problems) = run_waveguide(&cfg).unwrap();
        assert!(problems.is_empty(), "{problems:?}");
        let last: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(last[6], "NaN");
    }
}
