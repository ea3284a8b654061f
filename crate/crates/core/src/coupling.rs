//! Frequency-independent coupling data of the interior problem: eigenvalue
//! diagonals, the trace matrix `gamma`, and the mixed Gram and boundary
//! matrices `H` and `L`.
//!
//! Concentric media decouple by angular order, so the data is stored as a
//! list of blocks. Each block carries its own real modes (cos before sin)
//! and the exterior harmonics `l` it couples to.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Background;
use crate::quadrature::{self, Tolerance};
use crate::radial_modes::{ModeSet, Parity, RadialMode};

/// Where the coupling matrices came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Ingested,
}

/// Coupling data of one independent block of the coupled-mode system.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    /// Angular order for concentric blocks.
    pub order: Option<u32>,
    /// Exterior harmonics coupled to this block.
    pub l_values: Vec<i32>,
    /// Neumann eigenfrequencies, one per real mode.
    pub omega_n: Vec<f64>,
    /// Dirichlet eigenfrequencies, one per real mode.
    pub omega_d: Vec<f64>,
    /// `N_N x l_values.len()`.
    pub gamma: DMatrix<Complex64>,
    /// `N_N x N_D`.
    pub h: DMatrix<f64>,
    /// `N_N x N_D`.
    pub l: DMatrix<f64>,
}

impl CouplingBlock {
    pub fn n_neumann(&self) -> usize {
        self.omega_n.len()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.omega_d.len()
    }

    /// Squared Neumann eigenfrequencies.
    pub fn lambda_n(&self) -> Vec<f64> {
        self.omega_n.iter().map(|w| w * w).collect()
    }

    /// Squared Dirichlet eigenfrequencies.
    pub fn lambda_d(&self) -> Vec<f64> {
        self.omega_d.iter().map(|w| w * w).collect()
    }

    /// Checks dimensions, finiteness and ordering. `name` labels diagnostics.
    pub fn check(&self, name: &str) -> Result<()> {
        let schema = |message: String| Error::Schema { location: name.to_string(), message };
        let (nn, nd, nl) = (self.n_neumann(), self.n_dirichlet(), self.l_values.len());
        if self.gamma.shape() != (nn, nl) {
            return Err(schema(format!(
                "gamma is {}x{}, expected {nn}x{nl}",
                self.gamma.nrows(),
                self.gamma.ncols()
            )));
        }
        for (label, m) in [("H", &self.h), ("L", &self.l)] {
            if m.shape() != (nn, nd) {
                return Err(schema(format!("{label} is {}x{}, expected {nn}x{nd}", m.nrows(), m.ncols())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(schema(format!("{label} has non-finite entries")));
            }
        }
        if self.gamma.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(schema("gamma has non-finite entries".into()));
        }
        for (label, w) in [("neumann eigenfrequencies", &self.omega_n), ("dirichlet eigenfrequencies", &self.omega_d)] {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(schema(format!("{label} must be finite and nonnegative")));
            }
            if w.windows(2).any(|p| p[1] < p[0]) {
                return Err(schema(format!("{label} are not ascending")));
            }
        }
        let mut seen = self.l_values.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|p| p[0] == p[1]) {
            return Err(schema("duplicate harmonic in l_values".into()));
        }
        Ok(())
    }
}

/// The interior block of the coupled-mode equation for a whole medium.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingData {
    pub radius: f64,
    pub background: Background,
    pub blocks: Vec<CouplingBlock>,
    pub provenance: Provenance,
}

impl CouplingData {
    /// Builds analytic coupling from paired Neumann and Dirichlet mode sets,
    /// one pair per angular order.
    pub fn from_mode_sets(background: Background, radius: f64, sets: &[(ModeSet, ModeSet)]) -> Result<Self> {
        let blocks = sets
            .par_iter()
            .map(|(n, d)| block_from_sets(n, d, &background, radius))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { radius, background, blocks, provenance: Provenance::Analytic })
    }

    /// Validates every block and that no harmonic appears in two blocks.
    pub fn check(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::Schema { location: "radius".into(), message: "must be positive".into() });
        }
        let mut all = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            b.check(&block_name(i, b))?;
            all.extend_from_slice(&b.l_values);
        }
        all.sort_unstable();
        if all.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Schema {
                location: "blocks".into(),
                message: "a harmonic is coupled to more than one block".into(),
            });
        }
        Ok(())
    }

    /// All retained harmonics in ascending order.
    pub fn l_values(&self) -> Vec<i32> {
        let mut all: Vec<i32> = self.blocks.iter().flat_map(|b| b.l_values.iter().copied()).collect();
        all.sort_unstable();
        all
    }

    pub fn n_neumann(&self) -> usize {
        self.blocks.iter().map(|b| b.n_neumann()).sum()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.blocks.iter().map(|b| b.n_dirichlet()).sum()
    }

    /// Dense `(Lambda^N, Lambda^D, gamma, H, L)` over all blocks, with gamma
    /// columns ordered as [`CouplingData::l_values`].
    pub fn dense(&self) -> DenseCoupling {
        let l_values = self.l_values();
        let (nn, nd) = (self.n_neumann(), self.n_dirichlet());
        let mut gamma = DMatrix::zeros(nn, l_values.len());
        let mut h = DMatrix::zeros(nn, nd);
        let mut l = DMatrix::zeros(nn, nd);
        let mut lambda_n = Vec::with_capacity(nn);
        let mut lambda_d = Vec::with_capacity(nd);
        let (mut rn, mut rd) = (0, 0);
        for b in &self.blocks {
            for (j, lv) in b.l_values.iter().enumerate() {
                let col = l_values.binary_search(lv).expect("harmonic listed");
                for i in 0..b.n_neumann() {
                    gamma[(rn + i, col)] = b.gamma[(i, j)];
                }
            }
            h.view_mut((rn, rd), (b.n_neumann(), b.n_dirichlet())).copy_from(&b.h);
            l.view_mut((rn, rd), (b.n_neumann(), b.n_dirichlet())).copy_from(&b.l);
            lambda_n.extend(b.lambda_n());
            lambda_d.extend(b.lambda_d());
            rn += b.n_neumann();
            rd += b.n_dirichlet();
        }
        DenseCoupling { l_values, lambda_n, lambda_d, gamma, h, l }
    }
}

/// Full coupling matrices, mainly for inspection and export.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCoupling {
    pub l_values: Vec<i32>,
    pub lambda_n: Vec<f64>,
    pub lambda_d: Vec<f64>,
    pub gamma: DMatrix<Complex64>,
    pub h: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

pub(crate) fn block_name(index: usize, block: &CouplingBlock) -> String {
    match block.order {
        Some(n) => format!("block {index} (order {n})"),
        None => format!("block {index}"),
    }
}

/// Exterior harmonics that couple to modes of angular order `n`.
pub fn harmonics_for_order(n: u32) -> Vec<i32> {
    if n == 0 {
        vec![0]
    } else {
        vec![-(n as i32), n as i32]
    }
}

fn block_from_sets(neumann: &ModeSet, dirichlet: &ModeSet, background: &Background, radius: f64) -> Result<CouplingBlock> {
    if neumann.order != dirichlet.order {
        return Err(Error::Domain("paired mode sets must share the angular order".into()));
    }
    let order = neumann.order;
    let l_values = harmonics_for_order(order);
    let expand = |set: &ModeSet| set.real_modes().iter().map(|(m, _)| m.omega).collect::<Vec<_>>();
    Ok(CouplingBlock {
        order: Some(order),
        gamma: gamma_matrix(neumann, &l_values)?,
        h: gram_h(neumann, dirichlet)?,
        l: boundary_l(neumann, dirichlet, background, radius),
        omega_n: expand(neumann),
        omega_d: expand(dirichlet),
        l_values,
    })
}

/// Angular integral of `cos(n theta)` or `sin(n theta)` against `e^{i l theta}`.
fn angular_projection(n: u32, parity: Parity, l: i32) -> Complex64 {
    let n = n as i32;
    match (n, parity) {
        (0, _) if l == 0 => Complex64::new(2.0 * PI, 0.0),
        (0, _) => Complex64::new(0.0, 0.0),
        (_, Parity::Cos) if l.abs() == n => Complex64::new(PI, 0.0),
        (_, Parity::Sin) if l == n => Complex64::new(0.0, PI),
        (_, Parity::Sin) if l == -n => Complex64::new(0.0, -PI),
        _ => Complex64::new(0.0, 0.0),
    }
}

/// `gamma_ml = int_0^{2 pi} u^N_m(R, theta) e^{i l theta} d theta` for the
/// real Neumann modes of `set` (cos before sin) and the given harmonics.
pub fn gamma_matrix(set: &ModeSet, l_values: &[i32]) -> Result<DMatrix<Complex64>> {
    if l_values.is_empty() {
        return Err(Error::Domain("harmonic range is empty".into()));
    }
    let real = set.real_modes();
    Ok(DMatrix::from_fn(real.len(), l_values.len(), |i, j| {
        let (mode, parity) = real[i];
        angular_projection(mode.order, parity, l_values[j]) * mode.trace_value
    }))
}

/// Radial integral `int f_a f_b r / kappa dr` for every pair of modes.
fn radial_products(a: &[RadialMode], b: &[RadialMode]) -> Result<DMatrix<f64>> {
    if a.is_empty() || b.is_empty() {
        return Ok(DMatrix::zeros(a.len(), b.len()));
    }
    let shells = &a[0].shells;
    let breaks: Vec<f64> = std::iter::once(shells[0].region.inner)
        .chain(shells.iter().map(|s| s.region.outer))
        .collect();
    let (na, nb) = (a.len(), b.len());
    let mut fa = vec![0.0; na];
    let mut fb = vec![0.0; nb];
    let tol = Tolerance { abs: 1e-13, rel: 1e-12 };
    let values = quadrature::integrate_many(
        |r, out| {
            let idx = shells.iter().position(|s| r <= s.region.outer).unwrap_or(shells.len() - 1);
            let weight = r / shells[idx].region.bulk_modulus;
            for (f, m) in fa.iter_mut().zip(a) {
                *f = m.profile_in_shell(idx, r).0;
            }
            for (f, m) in fb.iter_mut().zip(b) {
                *f = m.profile_in_shell(idx, r).0 * weight;
            }
            for i in 0..na {
                for j in 0..nb {
                    out[i * nb + j] = fa[i] * fb[j];
                }
            }
        },
        na * nb,
        &breaks,
        tol,
    )?;
    Ok(DMatrix::from_row_slice(na, nb, &values))
}

/// Expands a radial matrix over real modes: equal parities share the radial
/// value times the angular weight, mixed parities vanish.
fn expand_real(radial: &DMatrix<f64>, order: u32) -> DMatrix<f64> {
    let weight = crate::radial_modes::angular_weight(order);
    if order == 0 {
        return radial * weight;
    }
    DMatrix::from_fn(2 * radial.nrows(), 2 * radial.ncols(), |i, j| {
        if i % 2 == j % 2 {
            weight * radial[(i / 2, j / 2)]
        } else {
            0.0
        }
    })
}

/// `H_mm' = int_{B_R} (1/kappa) u^N_m u^D_m' dx` over real modes.
pub fn gram_h(neumann: &ModeSet, dirichlet: &ModeSet) -> Result<DMatrix<f64>> {
    gram_between(neumann, dirichlet)
}

/// Weighted Gram matrix between the real modes of any two mode sets on the
/// same medium and disk.
pub fn gram_between(a: &ModeSet, b: &ModeSet) -> Result<DMatrix<f64>> {
    let rows = a.real_modes().len();
    let cols = b.real_modes().len();
    if a.order != b.order {
        return Ok(DMatrix::zeros(rows, cols));
    }
    Ok(expand_real(&radial_products(&a.modes, &b.modes)?, a.order))
}

/// `L_mm' = int_{|x|=R} (1/rho0) d_r u^D_m' u^N_m ds` over real modes.
pub fn boundary_l(neumann: &ModeSet, dirichlet: &ModeSet, background: &Background, radius: f64) -> DMatrix<f64> {
    let rows = neumann.real_modes().len();
    let cols = dirichlet.real_modes().len();
    if neumann.order != dirichlet.order {
        return DMatrix::zeros(rows, cols);
    }
    let radial = DMatrix::from_fn(neumann.len(), dirichlet.len(), |i, j| {
        radius * neumann.modes[i].trace_value * dirichlet.modes[j].trace_derivative / background.density
    });
    expand_real(&radial, neumann.order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MediumSpec;
    use crate::radial_modes::{solve_modes, ModeKind};

    fn sets(medium: &MediumSpec, radius: f64, n: u32, count: usize) -> (ModeSet, ModeSet) {
        (
            solve_modes(ModeKind::Neumann, medium, radius, n, count).unwrap(),
            solve_modes(ModeKind::Dirichlet, medium, radius, n, count).unwrap(),
        )
    }

    /// Fixed composite 15-point rule on equal panels, independent of the
    /// adaptive driver.
    fn composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| quadrature::gauss_kronrod_15(&mut f, a + i as f64 * h, a + (i + 1) as f64 * h).0)
            .sum()
    }

    fn composite_shells<F: FnMut(f64, usize) -> f64>(mode: &RadialMode, mut f: F, panels: usize) -> f64 {
        mode.shells
            .iter()
            .enumerate()
            .map(|(i, s)| composite(|r| f(r, i), s.region.inner, s.region.outer, panels))
            .sum()
    }

    #[test]
    fn zero_mode_gamma() {
        let m = MediumSpec::homogeneous(Background::default());
        let (n, _) = sets(&m, 1.0, 0, 2);
        let g = gamma_matrix(&n, &[0, 1]).unwrap();
        assert!((g[(0, 0)].re - 2.0 * PI * (1.0 / PI).sqrt()).abs() < 1e-13);
        assert_eq!(g[(0, 1)], Complex64::new(0.0, 0.0));
        assert!(matches!(gamma_matrix(&n, &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_matches_theta_quadrature() {
        let m = MediumSpec::air_bubble(1.0);
        for order in [0u32, 2] {
            let (n, _) = sets(&m, 2.0, order, 3);
            let ls: Vec<i32> = (-3..=3).collect();
            let g = gamma_matrix(&n, &ls).unwrap();
            let samples = 256;
            for (i, (mode, parity)) in n.real_modes().into_iter().enumerate() {
                for (j, &l) in ls.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s in 0..samples {
                        let t = 2.0 * PI * s as f64 / samples as f64;
                        acc += mode.value(2.0, t, parity).unwrap() * Complex64::from_polar(1.0, l as f64 * t);
                    }
                    acc *= 2.0 * PI / samples as f64;
                    assert!((acc - g[(i, j)]).norm() < 1e-10, "order {order} mode {i} l {l}");
                }
            }
        }
    }

    #[test]
    fn modes_are_orthonormal_by_independent_quadrature() {
        let m = MediumSpec::air_bubble(1.0);
        for kind in [ModeKind::Neumann, ModeKind::Dirichlet] {
            for order in [0u32, 1, 3] {
                let set = solve_modes(kind, &m, 2.0, order, 6).unwrap();
                for a in &set.modes {
                    for b in &set.modes {
                        let v = crate::radial_modes::angular_weight(order)
                            * composite_shells(
                                a,
                                |r, i| a.profile_in_shell(i, r).0 * b.profile_in_shell(i, r).0 * r / a.shells[i].region.bulk_modulus,
                                64,
                            );
                        let expected = if a.index == b.index { 1.0 } else { 0.0 };
                        assert!((v - expected).abs() < 1e-8, "{kind:?} n={order} {} {}: {v}", a.index, b.index);
                    }
                }
                let g = gram_between(&set, &set).unwrap();
                let eye = DMatrix::<f64>::identity(g.nrows(), g.ncols());
                assert!((g - eye).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn homogeneous_h11_matches_fixed_rule() {
        let m = MediumSpec::homogeneous(Background::default());
        let (n, d) = sets(&m, 1.0, 0, 3);
        let h = gram_h(&n, &d).unwrap();
        let oracle = 2.0 * PI * composite(|r| n.modes[0].profile(r).unwrap().0 * d.modes[0].profile(r).unwrap().0 * r, 0.0, 1.0, 200);
        assert!((h[(0, 0)] - oracle).abs() < 1e-10);
        assert!(h.amax() <= 1.0 + 1e-8);
    }

    #[test]
    fn mismatched_orders_decouple() {
        let m = MediumSpec::air_bubble(1.0);
        let (n0, _) = sets(&m, 2.0, 0, 3);
        let (_, d1) = sets(&m, 2.0, 1, 3);
        let bg = Background::default();
        assert_eq!(gram_h(&n0, &d1).unwrap().amax(), 0.0);
        assert_eq!(boundary_l(&n0, &d1, &bg, 2.0).amax(), 0.0);
    }

    #[test]
    fn parity_structure_of_h_and_l() {
        let m = MediumSpec::air_bubble(1.0);
        let (n, d) = sets(&m, 2.0, 2, 3);
        let h = gram_h(&n, &d).unwrap();
        let l = boundary_l(&n, &d, &Background::default(), 2.0);
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i % 2 != j % 2 {
                    assert_eq!(h[(i, j)], 0.0);
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn boundary_l_matches_theta_quadrature() {
        let m = MediumSpec::homogeneous(Background::default());
        let (n, d) = sets(&m, 1.0, 0, 2);
        let l = boundary_l(&n, &d, &Background::default(), 1.0);
        let samples = 64;
        let mut acc = 0.0;
        for s in 0..samples {
            let t = 2.0 * PI * s as f64 / samples as f64;
            acc += n.modes[0].value(1.0, t, Parity::Cos).unwrap() * d.modes[0].trace_derivative;
        }
        acc *= 2.0 * PI / samples as f64;
        assert!((acc - l[(0, 0)]).abs() < 1e-12);
        let expected = 2.0 * PI * (1.0 / PI).sqrt() * d.modes[0].trace_derivative;
        assert!((l[(0, 0)] - expected).abs() < 1e-13);
    }

    #[test]
    fn l_sign_is_positive_for_positive_traces() {
        let m = MediumSpec::homogeneous(Background::default());
        let (n, d) = sets(&m, 1.0, 0, 1);
        let l = boundary_l(&n, &d, &Background::default(), 1.0);
        let sign = n.modes[0].trace_value.signum() * d.modes[0].trace_derivative.signum();
        assert_eq!(l[(0, 0)].signum(), sign);
    }

    #[test]
    fn variational_identity() {
        let m = MediumSpec::air_bubble(1.0);
        let bg = Background::default();
        for order in [0u32, 1] {
            let (n, d) = sets(&m, 2.0, order, 3);
            let h = gram_h(&n, &d).unwrap();
            let l = boundary_l(&n, &d, &bg, 2.0);
            let w = crate::radial_modes::angular_weight(order);
            let nn = order as f64;
            let step = if order == 0 { 1 } else { 2 };
            for i in 0..3 {
                for j in 0..3 {
                    let a = &n.modes[i];
                    let b = &d.modes[j];
                    let grad = w * composite_shells(
                        a,
                        |r, s| {
                            let (fa, da) = a.profile_in_shell(s, r);
                            let (fb, db) = b.profile_in_shell(s, r);
                            let angular = if r > 0.0 { nn * nn / (r * r) * fa * fb } else { 0.0 };
                            (da * db + angular) * r / a.shells[s].region.density
                        },
                        64,
                    );
                    let (ri, rj) = (i * step, j * step);
                    let residual = grad - h[(ri, rj)] * b.omega * b.omega - l[(ri, rj)];
                    assert!(residual.abs() < 1e-6 * grad.abs().max(1.0), "n={order} ({i},{j}): {residual}");
                }
            }
        }
    }

    #[test]
    fn dense_assembly_and_checks() {
        let m = MediumSpec::air_bubble(1.0);
        let pairs: Vec<_> = (0..3).map(|n| sets(&m, 2.0, n, 2)).collect();
        let data = CouplingData::from_mode_sets(Background::default(), 2.0, &pairs).unwrap();
        data.check().unwrap();
        assert_eq!(data.l_values(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(data.n_neumann(), 2 + 4 + 4);
        let dense = data.dense();
        assert_eq!(dense.gamma.shape(), (10, 5));
        assert!(dense.lambda_n.iter().all(|&x| x >= 0.0));
        // Monopole rows only touch l = 0.
        assert_eq!(dense.gamma[(0, 0)], Complex64::new(0.0, 0.0));
        assert!(dense.gamma[(0, 2)].norm() > 0.0);

        let mut bad = data.clone();
        bad.blocks[1].h = DMatrix::zeros(3, 4);
        let err = bad.check().unwrap_err().to_string();
        assert!(err.contains("order 1") && err.contains("H"), "{err}");

        let mut unsorted = data;
        unsorted.blocks[0].omega_d.reverse();
        assert!(unsorted.check().is_err());
    }
}
