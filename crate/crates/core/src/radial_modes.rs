//! Neumann and Dirichlet normal modes of the fictitious disk for concentric
//! piecewise-constant media.
//!
//! In every shell the radial profile is `b J_n(k r) + c Y_n(k r)`; the
//! innermost shell keeps only `J_n` unless a sound-hard core replaces the
//! origin by a Neumann wall. Eigenfrequencies are the sign changes of the
//! characteristic determinant; the null vector follows by shooting outwards
//! from the innermost shell, matching `u` and `(1/rho) du/dr` at each
//! interface.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MediumSpec, Region};
use crate::quadrature::{self, Tolerance};
use crate::roots;
use crate::specfun::{bessel_j, bessel_jy};

/// Auxiliary boundary condition imposed on the disk boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    Neumann,
    Dirichlet,
}

/// Angular factor of a real mode: `cos(n theta)` or `sin(n theta)`.
/// Order-zero modes are pure radial and always use `Cos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

impl Parity {
    pub fn factor(self, n: u32, theta: f64) -> f64 {
        match self {
            Parity::Cos => (n as f64 * theta).cos(),
            Parity::Sin => (n as f64 * theta).sin(),
        }
    }
}

/// Fraction of one scan step used as the starting frequency.
const SCAN_START_FRACTION: f64 = 1e-6;
/// Base scan step in units of phase accumulated across the disk.
pub const SCAN_PHASE_STEP: f64 = PI / 40.0;

/// `(J, Y)` coefficients of one shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellCoefficients {
    pub region: Region,
    pub wavenumber: f64,
    pub j_coeff: f64,
    pub y_coeff: f64,
}

/// One real normal mode with its radial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMode {
    pub kind: ModeKind,
    pub order: u32,
    /// Radial index `m >= 1`.
    pub index: usize,
    pub omega: f64,
    /// Normalized coefficients, innermost shell first.
    pub shells: Vec<ShellCoefficients>,
    /// Factor that scaled the raw shooting solution to unit norm.
    pub normalization: f64,
    /// Radial profile at `r = R`.
    pub trace_value: f64,
    /// Radial derivative at `r = R`.
    pub trace_derivative: f64,
    pub radius: f64,
}

impl RadialMode {
    /// Angular integral of the squared trigonometric factor.
    pub fn angular_weight(&self) -> f64 {
        angular_weight(self.order)
    }

    /// Radial profile and its derivative inside one shell.
    pub fn profile_in_shell(&self, shell: usize, r: f64) -> (f64, f64) {
        profile(&self.shells[shell], self.order, r)
    }

    /// Radial profile `f(r)` and `f'(r)`.
    pub fn profile(&self, r: f64) -> Result<(f64, f64)> {
        let inner = self.shells[0].region.inner;
        if !(r >= inner && r <= self.radius * (1.0 + 1e-14)) {
            return Err(Error::Domain(format!("radius {r} outside [{inner}, {}]", self.radius)));
        }
        let idx = self
            .shells
            .iter()
            .position(|s| r <= s.region.outer)
            .unwrap_or(self.shells.len() - 1);
        Ok(self.profile_in_shell(idx, r))
    }

    /// Mode value at polar position `(r, theta)` with the given parity.
    pub fn value(&self, r: f64, theta: f64, parity: Parity) -> Result<f64> {
        Ok(self.profile(r)?.0 * parity.factor(self.order, theta))
    }
}

/// `2 pi` for order zero, `pi` for the cos/sin modes of higher order.
pub fn angular_weight(order: u32) -> f64 {
    if order == 0 {
        2.0 * PI
    } else {
        PI
    }
}

fn profile(shell: &ShellCoefficients, n: u32, r: f64) -> (f64, f64) {
    let k = shell.wavenumber;
    if k == 0.0 {
        // Zero-frequency mode: constant profile.
        return (shell.j_coeff, 0.0);
    }
    if shell.y_coeff == 0.0 {
        let (j, jp) = bessel_j(n, k * r).expect("order validated when the mode was built");
        return (shell.j_coeff * j, shell.j_coeff * k * jp);
    }
    let p = bessel_jy(n, k * r).expect("shell radius is positive when Y is present");
    (
        shell.j_coeff * p.j + shell.y_coeff * p.y,
        k * (shell.j_coeff * p.jp + shell.y_coeff * p.yp),
    )
}

/// Evaluates `mode` at `(r, theta)` with the cosine angular factor.
pub fn evaluate_mode(mode: &RadialMode, r: f64, theta: f64) -> Result<f64> {
    mode.value(r, theta, Parity::Cos)
}

/// All modes of one kind and angular order, ascending in frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub kind: ModeKind,
    pub order: u32,
    pub modes: Vec<RadialMode>,
    pub medium: MediumSpec,
    pub radius: f64,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.omega).collect()
    }

    /// Real modes in coupling order: each radial mode once for order zero,
    /// otherwise its cos partner followed by its sin partner.
    pub fn real_modes(&self) -> Vec<(&RadialMode, Parity)> {
        let mut out = Vec::new();
        for m in &self.modes {
            out.push((m, Parity::Cos));
            if self.order > 0 {
                out.push((m, Parity::Sin));
            }
        }
        out
    }
}

/// Characteristic matrix of the radial eigenproblem at `omega`.
///
/// Unknowns are the innermost coefficient(s) followed by `(B, C)` of each
/// outer shell. Rows: the core wall (if any), value and scaled flux
/// continuity at each interface, and the boundary condition at `R`.
pub fn characteristic_matrix(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    omega: f64,
) -> Result<DMatrix<f64>> {
    let regions = medium.regions(radius);
    let has_core = medium.sound_hard_core_radius.is_some();
    let inner_unknowns = if has_core { 2 } else { 1 };
    let size = inner_unknowns + 2 * (regions.len() - 1);
    let mut m = DMatrix::<f64>::zeros(size, size);
    let mut row = 0;

    // Column offset of each region's unknowns.
    let offset = |i: usize| if i == 0 { 0 } else { inner_unknowns + 2 * (i - 1) };
    let columns = |i: usize| if i == 0 { inner_unknowns } else { 2 };

    // Value and derivative of the basis functions of region `i` at `r`.
    let basis = |i: usize, r: f64| -> Result<Vec<(f64, f64)>> {
        let k = regions[i].wavenumber(omega);
        if i == 0 && !has_core {
            let (j, jp) = bessel_j(n, k * r)?;
            Ok(vec![(j, jp)])
        } else {
            let p = bessel_jy(n, k * r)?;
            Ok(vec![(p.j, p.jp), (p.y, p.yp)])
        }
    };

    if let Some(core) = medium.sound_hard_core_radius {
        for (c, (_, d)) in basis(0, core)?.into_iter().enumerate() {
            m[(row, c)] = d;
        }
        row += 1;
    }
    for i in 0..regions.len() - 1 {
        let r = regions[i].outer;
        let flux_ratio = regions[i + 1].impedance() / regions[i].impedance();
        for (c, (v, d)) in basis(i, r)?.into_iter().enumerate() {
            m[(row, offset(i) + c)] = v;
            m[(row + 1, offset(i) + c)] = flux_ratio * d;
        }
        for (c, (v, d)) in basis(i + 1, r)?.into_iter().enumerate() {
            m[(row, offset(i + 1) + c)] = -v;
            m[(row + 1, offset(i + 1) + c)] = -d;
        }
        row += 2;
    }
    let last = regions.len() - 1;
    for (c, (v, d)) in basis(last, radius)?.into_iter().enumerate() {
        m[(row, offset(last) + c)] = match kind {
            ModeKind::Neumann => d,
            ModeKind::Dirichlet => v,
        };
    }
    debug_assert_eq!(row + 1, size);
    debug_assert_eq!(offset(last) + columns(last), size);
    Ok(m)
}

/// Row-scaled characteristic determinant; its sign changes bracket the
/// eigenfrequencies.
///
/// Rows whose largest entry exceeds one are divided by it, which keeps the
/// determinant finite at large arguments without disturbing its sign.
/// `omega = 0` is evaluated as the limit from above.
pub fn characteristic_determinant(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    omega: f64,
) -> Result<f64> {
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("omega must be nonnegative, got {omega}")));
    }
    let omega = if omega == 0.0 {
        1e-12 / medium.travel_time(radius)
    } else {
        omega
    };
    let mut m = characteristic_matrix(kind, medium, radius, n, omega)?;
    for mut row in m.row_iter_mut() {
        let scale = row.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        row /= scale;
    }
    Ok(m.determinant())
}

/// Scan step in angular frequency: a phase increment of `pi / 40` across the
/// slowest path from the centre to `R`, divided by `refinement`.
pub fn scan_step(medium: &MediumSpec, radius: f64, refinement: u32) -> f64 {
    SCAN_PHASE_STEP / medium.travel_time(radius) / refinement.max(1) as f64
}

/// Positive eigenfrequencies in increasing order until `done` is satisfied.
fn scan_eigenfrequencies<D>(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    budget: f64,
    mut done: D,
) -> Result<Vec<f64>>
where
    D: FnMut(&[f64]) -> bool,
{
    let step = scan_step(medium, radius, 1);
    let det = |w: f64| characteristic_determinant(kind, medium, radius, n, w).unwrap_or(f64::NAN);
    let mut roots_found = Vec::new();
    let mut lo = step * SCAN_START_FRACTION;
    let mut f_lo = det(lo);
    while !done(&roots_found) {
        if lo > budget {
            return Err(Error::RootNotFound {
                lo: step * SCAN_START_FRACTION,
                hi: budget,
                reason: format!(
                    "scan budget exhausted for {kind:?} order {n} after {} eigenfrequencies",
                    roots_found.len()
                ),
            });
        }
        let hi = lo + step;
        let f_hi = det(hi);
        if !f_hi.is_finite() {
            return Err(Error::RootNotFound {
                lo,
                hi,
                reason: "characteristic determinant is not finite".into(),
            });
        }
        if f_hi == 0.0 {
            roots_found.push(hi);
        } else if f_lo != 0.0 && f_lo.signum() != f_hi.signum() {
            let root = roots::brent(det, lo, hi, 1e-15 * hi, 200)?;
            roots_found.push(root);
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(roots_found)
}

/// Eigenfrequencies in `(0, omega_max]` found with the scan step divided
/// by `refinement`. The Neumann order-zero zero mode is not included.
pub fn eigenfrequencies_below(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    omega_max: f64,
    refinement: u32,
) -> Result<Vec<f64>> {
    let step = scan_step(medium, radius, refinement);
    let det = |w: f64| characteristic_determinant(kind, medium, radius, n, w).unwrap_or(f64::NAN);
    roots::scan_roots(det, step * SCAN_START_FRACTION, omega_max, step, 1e-15 * omega_max, usize::MAX)
}

/// Builds a normalized mode from an eigenfrequency.
pub fn build_mode(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    index: usize,
    omega: f64,
) -> Result<RadialMode> {
    let regions = medium.regions(radius);
    let mut shells = Vec::with_capacity(regions.len());
    if omega == 0.0 {
        if n != 0 || kind != ModeKind::Neumann {
            return Err(Error::Domain("only the order-zero Neumann set has a zero-frequency mode".into()));
        }
        for region in &regions {
            shells.push(ShellCoefficients { region: *region, wavenumber: 0.0, j_coeff: 1.0, y_coeff: 0.0 });
        }
    } else {
        // Innermost shell.
        let k0 = regions[0].wavenumber(omega);
        let (b0, c0) = match medium.sound_hard_core_radius {
            Some(core) => {
                let p = bessel_jy(n, k0 * core)?;
                (p.yp, -p.jp)
            }
            None => (1.0, 0.0),
        };
        shells.push(ShellCoefficients { region: regions[0], wavenumber: k0, j_coeff: b0, y_coeff: c0 });
        for i in 1..regions.len() {
            let r = regions[i].inner;
            let (u, du) = profile(&shells[i - 1], n, r);
            let flux = du / regions[i - 1].density;
            let k = regions[i].wavenumber(omega);
            let rho = regions[i].density;
            let p = bessel_jy(n, k * r)?;
            let det = 2.0 / (PI * rho * r);
            let b = (u * (k / rho) * p.yp - p.y * flux) / det;
            let c = (p.j * flux - u * (k / rho) * p.jp) / det;
            shells.push(ShellCoefficients { region: regions[i], wavenumber: k, j_coeff: b, y_coeff: c });
        }
    }

    let weight = angular_weight(n);
    let breaks: Vec<f64> = std::iter::once(regions[0].inner)
        .chain(regions.iter().map(|r| r.outer))
        .collect();
    let tol = Tolerance { abs: 0.0, rel: 1e-14 };
    let norm_sq = weight
        * quadrature::integrate_many(
            |r, out| {
                let idx = shells.iter().position(|s| r <= s.region.outer).unwrap_or(shells.len() - 1);
                let (f, _) = profile(&shells[idx], n, r);
                out[0] = f * f * r / shells[idx].region.bulk_modulus;
            },
            1,
            &breaks,
            tol,
        )?[0];
    if !(norm_sq > 0.0 && norm_sq.is_finite()) {
        return Err(Error::Domain(format!("mode at omega = {omega} has norm {norm_sq}")));
    }
    let normalization = 1.0 / norm_sq.sqrt();
    for s in &mut shells {
        s.j_coeff *= normalization;
        s.y_coeff *= normalization;
    }
    let last = shells.last().expect("at least one shell");
    let (trace_value, trace_derivative) = profile(last, n, radius);
    Ok(RadialMode {
        kind,
        order: n,
        index,
        omega,
        shells,
        normalization,
        trace_value,
        trace_derivative,
        radius,
    })
}

fn scan_budget(medium: &MediumSpec, radius: f64, n: u32, count: usize) -> f64 {
    // Generous upper bound: the m-th eigenvalue of order n sits near
    // (n + m pi) / travel_time.
    4.0 * (n as f64 + 20.0 + PI * (count as f64 + 2.0)) / medium.travel_time(radius)
}

fn assemble(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    frequencies: &[f64],
) -> Result<ModeSet> {
    let mut modes = Vec::with_capacity(frequencies.len());
    for (i, &w) in frequencies.iter().enumerate() {
        modes.push(build_mode(kind, medium, radius, n, i + 1, w)?);
    }
    Ok(ModeSet { kind, order: n, modes, medium: medium.clone(), radius })
}

fn has_zero_mode(kind: ModeKind, n: u32) -> bool {
    kind == ModeKind::Neumann && n == 0
}

fn check_inputs(medium: &MediumSpec, radius: f64) -> Result<()> {
    medium.validate(&crate::model::FictitiousDisk { radius })
}

/// First `count` modes of the given kind and angular order. For the
/// order-zero Neumann set the constant zero-frequency mode is `m = 1`.
pub fn solve_modes(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    count: usize,
) -> Result<ModeSet> {
    check_inputs(medium, radius)?;
    if count == 0 {
        return Err(Error::Domain("mode count must be at least 1".into()));
    }
    let zero = has_zero_mode(kind, n);
    let wanted = if zero { count - 1 } else { count };
    let budget = scan_budget(medium, radius, n, count);
    let mut freqs = if zero { vec![0.0] } else { Vec::new() };
    if wanted > 0 {
        freqs.extend(scan_eigenfrequencies(kind, medium, radius, n, budget, |r| r.len() >= wanted)?);
    }
    assemble(kind, medium, radius, n, &freqs)
}

/// All modes up to and including the first whose eigenfrequency exceeds
/// `omega_threshold`.
pub fn solve_modes_through(
    kind: ModeKind,
    medium: &MediumSpec,
    radius: f64,
    n: u32,
    omega_threshold: f64,
) -> Result<ModeSet> {
    check_inputs(medium, radius)?;
    let zero = has_zero_mode(kind, n);
    let budget = 4.0 * omega_threshold + scan_budget(medium, radius, n, 1);
    let mut freqs = if zero { vec![0.0] } else { Vec::new() };
    if !(zero && omega_threshold < 0.0) {
        let found = scan_eigenfrequencies(kind, medium, radius, n, budget, |r| {
            r.last().is_some_and(|&w| w > omega_threshold)
        })?;
        freqs.extend(found);
    }
    assemble(kind, medium, radius, n, &freqs)
}
