//! Least-squares fits of radial fields by the mixed Neumann and Dirichlet
//! basis and their convergence.
//!
//! The basis is not orthogonal and becomes numerically dependent as it
//! grows. The fit works with the quadrature-weighted sample matrix `A`,
//! whose Gram matrix `A^T A` approximates `[[I, H], [H^T, I]]`: directions
//! whose Gram eigenvalue falls below `SPECTRAL_CUTOFF` times the largest
//! are dropped, using the singular values of `A` so the conditioning is not
//! squared.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::MediumSpec;
use crate::quadrature;
use crate::radial_modes::{angular_weight, solve_modes, ModeKind, ModeSet};

/// Gram eigenvalues below this fraction of the largest one are dropped.
pub const SPECTRAL_CUTOFF: f64 = 1e-14;
/// Largest phase of any basis function across one quadrature panel.
const PANEL_PHASE: f64 = 1.0;
const MIN_PANELS: usize = 32;
/// Radial samples used by default to measure the L-infinity error.
pub const ERROR_GRID: usize = 2048;

/// A fitted combination `sum xi^N_m u^N_m + sum xi^D_m u^D_m`.
#[derive(Debug, Clone)]
pub struct MixedExpansion {
    pub xi_n: Vec<f64>,
    pub xi_d: Vec<f64>,
    pub neumann: ModeSet,
    pub dirichlet: ModeSet,
    /// Weighted L2 norm of the misfit on the quadrature grid.
    pub residual: f64,
    /// Number of basis directions discarded by the cutoff.
    pub dropped: usize,
}

impl MixedExpansion {
    /// Radial profile of the expansion at `r`.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (c, m) in self.xi_n.iter().zip(&self.neumann.modes) {
            acc += c * m.profile(r)?.0;
        }
        for (c, m) in self.xi_d.iter().zip(&self.dirichlet.modes) {
            acc += c * m.profile(r)?.0;
        }
        Ok(acc)
    }

    pub fn radius(&self) -> f64 {
        self.neumann.radius
    }
}

/// An empty mode set, for fits that use only one family.
pub fn empty_set(kind: ModeKind, medium: &MediumSpec, radius: f64, order: u32) -> ModeSet {
    ModeSet { kind, order, modes: Vec::new(), medium: medium.clone(), radius }
}

/// Mode set with `count` modes, empty when `count` is zero.
pub fn mode_set(kind: ModeKind, medium: &MediumSpec, radius: f64, order: u32, count: usize) -> Result<ModeSet> {
    if count == 0 {
        Ok(empty_set(kind, medium, radius, order))
    } else {
        solve_modes(kind, medium, radius, order, count)
    }
}

/// Fits the radial field `target` (times the cosine factor of the sets'
/// angular order) in the (1/kappa)-weighted L2 sense.
pub fn fit_expansion<F>(target: F, neumann: &ModeSet, dirichlet: &ModeSet) -> Result<MixedExpansion>
where
    F: Fn(f64) -> f64,
{
    let (nn, nd) = (neumann.len(), dirichlet.len());
    if nn + nd == 0 {
        return Err(Error::Domain("expansion basis is empty".into()));
    }
    if nn > 0 && nd > 0 && neumann.order != dirichlet.order {
        return Err(Error::Domain("mode sets must share the angular order".into()));
    }
    let reference = if nn > 0 { neumann } else { dirichlet };
    let order = reference.order;
    let weight = angular_weight(order);
    let shells = &reference.modes[0].shells;
    // Weighted samples on a composite Kronrod grid fine enough for the most
    // oscillatory basis function. `A^T A` is the Gram matrix and `A^T t`
    // holds the projections.
    let nb = nn + nd;
    let modes: Vec<_> = neumann.modes.iter().chain(&dirichlet.modes).collect();
    let mut nodes = Vec::new();
    for (idx, shell) in shells.iter().enumerate() {
        let k_max = modes.iter().map(|m| m.shells[idx].wavenumber).fold(0.0f64, f64::max);
        let width = shell.region.outer - shell.region.inner;
        let panels = ((k_max * width / PANEL_PHASE).ceil() as usize).max(MIN_PANELS);
        for (r, w) in quadrature::composite_kronrod_nodes(shell.region.inner, shell.region.outer, panels) {
            nodes.push((idx, r, (weight * w * r / shell.region.bulk_modulus).sqrt()));
        }
    }
    let a = DMatrix::from_fn(nodes.len(), nb, |i, j| {
        let (idx, r, s) = nodes[i];
        s * modes[j].profile_in_shell(idx, r).0
    });
    let t = DVector::from_iterator(nodes.len(), nodes.iter().map(|&(_, r, s)| s * target(r)));
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("target is not finite on the disk".into()));
    }

    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    let threshold = SPECTRAL_CUTOFF.sqrt() * largest;
    let dropped = svd.singular_values.iter().filter(|&&s| s <= threshold).count();
    if dropped > 0 {
        log::info!("mixed basis is numerically dependent; dropped {dropped} of {nb} directions");
    }
    let coeffs = svd
        .solve(&t, threshold)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    let residual = (&a * &coeffs - &t).norm();
    Ok(MixedExpansion {
        xi_n: coeffs.rows(0, nn).iter().copied().collect(),
        xi_d: coeffs.rows(nn, nd).iter().copied().collect(),
        neumann: neumann.clone(),
        dirichlet: dirichlet.clone(),
        residual,
        dropped,
    })
}

/// `max |expansion - target| / max |target|` over `grid` uniform radii
/// spanning the disk, endpoints included.
pub fn linf_rel_error<F>(expansion: &MixedExpansion, target: F, grid: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if grid < 256 {
        return Err(Error::Domain(format!("error grid needs at least 256 samples, got {grid}")));
    }
    let set = if expansion.neumann.is_empty() { &expansion.dirichlet } else { &expansion.neumann };
    let inner = set.modes.first().map(|m| m.shells[0].region.inner).unwrap_or(0.0);
    let radius = set.radius;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..grid {
        let r = inner + (radius - inner) * i as f64 / (grid - 1) as f64;
        let t = target(r);
        num = num.max((expansion.evaluate(r)? - t).abs());
        den = den.max(t.abs());
    }
    if den == 0.0 {
        return Err(Error::Domain("target vanishes on the grid".into()));
    }
    Ok(num / den)
}

/// Fits `J_0(k r)` on the homogeneous unit-material disk of radius `radius`
/// with `n_n` Neumann and `n_d` Dirichlet modes and returns the fit with
/// its L-infinity relative error.
pub fn bessel_target_fit(kr: f64, radius: f64, n_n: usize, n_d: usize) -> Result<(MixedExpansion, f64)> {
    let medium = MediumSpec::homogeneous(Default::default());
    let k = kr / radius;
    let target = |r: f64| crate::specfun::bessel_j(0, k * r).map(|v| v.0).unwrap_or(f64::NAN);
    let neumann = mode_set(ModeKind::Neumann, &medium, radius, 0, n_n)?;
    let dirichlet = mode_set(ModeKind::Dirichlet, &medium, radius, 0, n_d)?;
    let fit = fit_expansion(target, &neumann, &dirichlet)?;
    let err = linf_rel_error(&fit, target, ERROR_GRID)?;
    Ok((fit, err))
}
