//! Assembly and solution of the coupled-mode equation, the scattering
//! matrix it induces, and far-field quantities.
//!
//! For one block with Neumann modes `xi^N` and Dirichlet modes `xi^D` the
//! system at frequency `omega` reads
//!
//! ```text
//! [ Lambda^N - w^2 - gamma G gamma^H   H (Lambda^D - w^2) + L ] [xi^N]   [B alpha^-]
//! [ H^T (Lambda^N - w^2)               Lambda^D - w^2         ] [xi^D] = [    0    ]
//! ```
//!
//! and `alpha^+ = S^BG alpha^- + A xi^N`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::coupling::{CouplingBlock, CouplingData};
use crate::error::{Error, Result};
use crate::model::{polar_angle, IncidentField, MediumSpec};
use crate::radial_modes::{solve_modes_through, ModeKind, ModeSet};
use crate::specfun::{bessel_jy_signed, MAX_ORDER};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Frequency-dependent exterior blocks and the assembled system of one
/// coupling block.
#[derive(Debug, Clone)]
pub struct CmeBlock {
    pub omega: f64,
    pub l_values: Vec<i32>,
    /// Diagonal of `G(omega)`.
    pub g: Vec<Complex64>,
    /// `N_N x n_l`.
    pub b: DMatrix<Complex64>,
    /// Diagonal of `S^BG(omega)`.
    pub s_bg: Vec<Complex64>,
    /// `n_l x N_N`.
    pub a: DMatrix<Complex64>,
    /// The full block matrix.
    pub matrix: DMatrix<Complex64>,
    pub n_neumann: usize,
}

impl CmeBlock {
    /// Right-hand side `[B alpha^-; 0]`.
    pub fn rhs(&self, alpha: &[Complex64]) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.matrix.nrows());
        let forcing = &self.b * DVector::from_column_slice(alpha);
        out.rows_mut(0, self.n_neumann).copy_from(&forcing);
        out
    }
}

/// Assembles the coupled-mode system of one block at `omega`.
pub fn assemble_block(block: &CouplingBlock, coupling: &CouplingData, omega: f64) -> Result<CmeBlock> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    let bg = &coupling.background;
    let kr = bg.wavenumber(omega) * coupling.radius;
    let rho0 = bg.density;
    let nl = block.l_values.len();
    let (nn, nd) = (block.n_neumann(), block.n_dirichlet());

    let mut g = Vec::with_capacity(nl);
    let mut s_bg = Vec::with_capacity(nl);
    let mut h1 = Vec::with_capacity(nl);
    for &l in &block.l_values {
        let p = bessel_jy_signed(l, kr)?;
        g.push(kr * p.h1p() / (2.0 * PI * rho0 * p.h1()));
        s_bg.push(-p.h2() / p.h1());
        h1.push(p.h1());
    }
    let b = DMatrix::from_fn(nn, nl, |m, j| -4.0 * I * block.gamma[(m, j)] / (PI * rho0 * h1[j]));
    let a = DMatrix::from_fn(nl, nn, |j, m| block.gamma[(m, j)].conj() / (2.0 * PI * h1[j]));

    let w2 = omega * omega;
    let dn: Vec<f64> = block.lambda_n().iter().map(|x| x - w2).collect();
    let dd: Vec<f64> = block.lambda_d().iter().map(|x| x - w2).collect();
    let gamma_g = DMatrix::from_fn(nn, nl, |m, j| block.gamma[(m, j)] * g[j]);
    let radiation = &gamma_g * block.gamma.adjoint();

    let mut matrix = DMatrix::<Complex64>::zeros(nn + nd, nn + nd);
    for i in 0..nn {
        for j in 0..nn {
            matrix[(i, j)] = -radiation[(i, j)];
        }
        matrix[(i, i)] += dn[i];
        for j in 0..nd {
            matrix[(i, nn + j)] = Complex64::new(block.h[(i, j)] * dd[j] + block.l[(i, j)], 0.0);
        }
    }
    for i in 0..nd {
        for j in 0..nn {
            matrix[(nn + i, j)] = Complex64::new(block.h[(j, i)] * dn[j], 0.0);
        }
        matrix[(nn + i, nn + i)] = Complex64::new(dd[i], 0.0);
    }
    Ok(CmeBlock { omega, l_values: block.l_values.clone(), g, b, s_bg, a, matrix, n_neumann: nn })
}

/// Assembles every block of `coupling` at `omega`.
pub fn assemble_blocks(coupling: &CouplingData, omega: f64) -> Result<Vec<CmeBlock>> {
    coupling.blocks.iter().map(|b| assemble_block(b, coupling, omega)).collect()
}

/// Solution of one block for a set of right-hand sides.
#[derive(Debug, Clone)]
struct BlockSolve {
    /// Columns solve `M X = [B e_j; 0]` for each harmonic `j` of the block.
    x: DMatrix<Complex64>,
    /// Squared Frobenius norms of `M X - R` and `R`.
    residual_sq: f64,
    rhs_sq: f64,
}

fn solve_block(block: &CmeBlock) -> Result<BlockSolve> {
    let nl = block.l_values.len();
    let mut rhs = DMatrix::<Complex64>::zeros(block.matrix.nrows(), nl);
    rhs.view_mut((0, 0), (block.n_neumann, nl)).copy_from(&block.b);
    let lu = block.matrix.clone().lu();
    let x = lu.solve(&rhs).ok_or(Error::Singular { omega: block.omega })?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular { omega: block.omega });
    }
    let residual_sq = (&block.matrix * &x - &rhs).norm_squared();
    Ok(BlockSolve { x, residual_sq, rhs_sq: rhs.norm_squared() })
}

/// Interior coefficients `(xi^N, xi^D)` of one block for incident `alpha`.
pub fn solve_cme(block: &CmeBlock, alpha: &[Complex64]) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let rhs = block.rhs(alpha);
    let xi = block
        .matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular { omega: block.omega })?;
    let nn = block.n_neumann;
    let nd = xi.len() - nn;
    Ok((xi.rows(0, nn).into_owned(), xi.rows(nn, nd).into_owned()))
}

/// Scattering matrix of one block, `S^BG + A (top of M^{-1} [B; 0])`.
fn block_s(block: &CmeBlock, solve: &BlockSolve) -> DMatrix<Complex64> {
    let top = solve.x.rows(0, block.n_neumann);
    let mut s = &block.a * top;
    for (j, v) in block.s_bg.iter().enumerate() {
        s[(j, j)] += v;
    }
    s
}

/// Full scattering matrix over `coupling.l_values()`.
pub fn scattering_matrix(coupling: &CouplingData, omega: f64) -> Result<DMatrix<Complex64>> {
    Ok(solve(coupling, omega, None)?.s)
}

/// Outgoing scattered coefficients `F = S alpha^- - alpha^+_in`; for fields
/// regular at the origin the incident outgoing part equals `alpha^-`.
pub fn scattered_coefficients(s: &DMatrix<Complex64>, alpha: &[Complex64]) -> Vec<Complex64> {
    let out = s * DVector::from_column_slice(alpha);
    out.iter().zip(alpha).map(|(o, a)| o - a).collect()
}

/// Far-field pattern `i sqrt(2/(pi k)) sum_l F_l e^{i l (theta - pi/2)}`.
pub fn far_field(f: &[Complex64], l_values: &[i32], k: f64, angles: &[f64]) -> Result<Vec<Complex64>> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let pre = I * (2.0 / (PI * k)).sqrt();
    Ok(angles
        .iter()
        .map(|&t| {
            pre * f
                .iter()
                .zip(l_values)
                .map(|(fl, &l)| fl * Complex64::from_polar(1.0, l as f64 * (t - PI / 2.0)))
                .sum::<Complex64>()
        })
        .collect())
}

/// `sigma = (4/k) sum |F_l|^2`.
pub fn cross_section(f: &[Complex64], k: f64) -> f64 {
    4.0 / k * f.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// Relative mismatch between `sigma` and `Im[-sqrt(8 pi/k) A(p)]`.
pub fn optical_theorem_residual(f: &[Complex64], l_values: &[i32], k: f64, direction: [f64; 2]) -> Result<f64> {
    let sigma = cross_section(f, k);
    let forward = far_field(f, l_values, k, &[polar_angle(direction)])?[0];
    let rhs = (-(8.0 * PI / k).sqrt() * forward).im;
    Ok((sigma - rhs).abs() / sigma.max(f64::EPSILON))
}

/// `||S^H S - I||_F`.
pub fn unitarity_residual(s: &DMatrix<Complex64>) -> f64 {
    let n = s.ncols();
    (s.adjoint() * s - DMatrix::<Complex64>::identity(n, n)).norm()
}

/// Everything computed at one frequency.
#[derive(Debug, Clone)]
pub struct ScatteringResult {
    pub omega: f64,
    pub l_values: Vec<i32>,
    pub s: DMatrix<Complex64>,
    /// Incoming coefficients used (zero when no field was given).
    pub incoming: Vec<Complex64>,
    pub xi_n: DVector<Complex64>,
    pub xi_d: DVector<Complex64>,
    /// Outgoing scattered coefficients.
    pub f: Vec<Complex64>,
    pub sigma: f64,
    pub unitarity_residual: f64,
    /// Present for plane-wave incidence.
    pub optical_residual: Option<f64>,
    /// Relative residual `||M X - R|| / ||R||` of the whole block-diagonal
    /// system, where the columns of `R` are `[B e_l; 0]`.
    pub solve_residual: f64,
}

impl ScatteringResult {
    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.s.nrows()).map(|i| self.s[(i, i)]).collect()
    }

    /// `S_ll` for a retained harmonic.
    pub fn s_entry(&self, l: i32) -> Option<Complex64> {
        self.l_values.iter().position(|&x| x == l).map(|i| self.s[(i, i)])
    }
}

/// Solves the coupled-mode equation at `omega` and, if `incident` is given,
/// the response to it.
pub fn solve(coupling: &CouplingData, omega: f64, incident: Option<&IncidentField>) -> Result<ScatteringResult> {
    let l_values = coupling.l_values();
    let nl = l_values.len();
    let incoming = match incident {
        Some(field) => field.coefficients(&l_values)?,
        None => vec![Complex64::new(0.0, 0.0); nl],
    };
    let blocks = assemble_blocks(coupling, omega)?;
    let solves = blocks.iter().map(solve_block).collect::<Result<Vec<_>>>()?;

    let mut s = DMatrix::<Complex64>::zeros(nl, nl);
    let mut xi_n = Vec::new();
    let mut xi_d = Vec::new();
    let (mut residual_sq, mut rhs_sq) = (0.0, 0.0);
    for (block, sol) in blocks.iter().zip(&solves) {
        let idx: Vec<usize> = block
            .l_values
            .iter()
            .map(|l| l_values.binary_search(l).expect("retained harmonic"))
            .collect();
        let sb = block_s(block, sol);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                s[(ia, ib)] = sb[(a, b)];
            }
        }
        let alpha = DVector::from_iterator(idx.len(), idx.iter().map(|&i| incoming[i]));
        let xi = &sol.x * alpha;
        xi_n.extend(xi.rows(0, block.n_neumann).iter().copied());
        xi_d.extend(xi.rows(block.n_neumann, xi.len() - block.n_neumann).iter().copied());
        residual_sq += sol.residual_sq;
        rhs_sq += sol.rhs_sq;
    }

    let solve_residual = if rhs_sq > 0.0 { (residual_sq / rhs_sq).sqrt() } else { 0.0 };
    let f = scattered_coefficients(&s, &incoming);
    let k = coupling.background.wavenumber(omega);
    let optical_residual = match incident.and_then(|i| i.direction()) {
        Some(p) => Some(optical_theorem_residual(&f, &l_values, k, p)?),
        None => None,
    };
    Ok(ScatteringResult {
        omega,
        sigma: cross_section(&f, k),
        unitarity_residual: unitarity_residual(&s),
        l_values,
        s,
        incoming,
        xi_n: DVector::from_vec(xi_n),
        xi_d: DVector::from_vec(xi_d),
        f,
        optical_residual,
        solve_residual,
    })
}

/// Moves `omega` off any retained eigenfrequency by a relative `1e-9`.
pub fn nudge_frequency(coupling: &CouplingData, omega: f64) -> f64 {
    let hit = coupling
        .blocks
        .iter()
        .flat_map(|b| b.omega_n.iter().chain(&b.omega_d))
        .any(|&w| (w - omega).abs() <= 1e-12 * omega);
    if hit {
        omega * (1.0 + 1e-9)
    } else {
        omega
    }
}

/// Truncation of the interior and exterior expansions.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// Largest retained angular order.
    pub l_max: u32,
    /// Modes are kept up to the first with eigenfrequency above this value.
    pub omega_threshold: f64,
    /// `(order, radial Neumann count, radial Dirichlet count)`.
    pub counts: Vec<(u32, usize, usize)>,
}

impl Truncation {
    /// Total real Neumann and Dirichlet mode counts.
    pub fn totals(&self) -> (usize, usize) {
        self.counts.iter().fold((0, 0), |(a, b), &(n, cn, cd)| {
            let mult = if n == 0 { 1 } else { 2 };
            (a + mult * cn, b + mult * cd)
        })
    }
}

/// `ceil(kR + 5 (kR)^{1/3} + 4)`.
pub fn rokhlin_order(kr: f64) -> u32 {
    (kr + 5.0 * kr.cbrt() + 4.0).ceil() as u32
}

/// Eigenfrequency threshold of the truncation rule `omega R / (2 pi c) > 2 C`.
pub fn truncation_threshold(constant: f64, radius: f64, sound_speed: f64) -> f64 {
    2.0 * constant * 2.0 * PI * sound_speed / radius
}

/// Mode sets for the orders in `orders`, each truncated at `omega_threshold`.
pub fn truncated_mode_sets(
    medium: &MediumSpec,
    radius: f64,
    orders: &[u32],
    omega_threshold: f64,
) -> Result<Vec<(ModeSet, ModeSet)>> {
    orders
        .par_iter()
        .map(|&n| {
            Ok((
                solve_modes_through(ModeKind::Neumann, medium, radius, n, omega_threshold)?,
                solve_modes_through(ModeKind::Dirichlet, medium, radius, n, omega_threshold)?,
            ))
        })
        .collect()
}

/// Angular and radial truncation for a sweep up to `max_omega` with
/// constant `C`, together with the mode sets it selects.
pub fn truncate(
    constant: f64,
    radius: f64,
    medium: &MediumSpec,
    max_omega: f64,
    orders: Option<&[u32]>,
) -> Result<(Truncation, Vec<(ModeSet, ModeSet)>)> {
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::Config(format!("truncation constant must be positive, got {constant}")));
    }
    let kr = medium.background.wavenumber(max_omega) * radius;
    let l_max = rokhlin_order(kr);
    if l_max > MAX_ORDER {
        return Err(Error::Capability(format!("angular order {l_max} needed at kR = {kr} exceeds {MAX_ORDER}")));
    }
    let all: Vec<u32> = (0..=l_max).collect();
    let orders = orders.unwrap_or(&all);
    let omega_threshold = truncation_threshold(constant, radius, medium.background.sound_speed());
    let sets = truncated_mode_sets(medium, radius, orders, omega_threshold)?;
    let counts = sets.iter().map(|(n, d)| (n.order, n.len(), d.len())).collect();
    Ok((Truncation { l_max, omega_threshold, counts }, sets))
}

/// `(N_N, N_D, L_max)` selected by the truncation rule, counting real modes.
pub fn truncation_counts(constant: f64, radius: f64, medium: &MediumSpec, max_omega: f64) -> Result<(usize, usize, u32)> {
    let (t, _) = truncate(constant, radius, medium, max_omega, None)?;
    let (nn, nd) = t.totals();
    Ok((nn, nd, t.l_max))
}

/// Analytic coupling data for a concentric medium under the truncation rule.
pub fn concentric_coupling(
    constant: f64,
    radius: f64,
    medium: &MediumSpec,
    max_omega: f64,
    orders: Option<&[u32]>,
) -> Result<(Truncation, CouplingData)> {
    medium.validate(&crate::model::FictitiousDisk { radius })?;
    let (t, sets) = truncate(constant, radius, medium, max_omega, orders)?;
    let data = CouplingData::from_mode_sets(medium.background, radius, &sets)?;
    Ok((t, data))
}
