//! Coupled-mode theory for a semi-infinite duct ending in a closed
//! rectangular stub.
//!
//! The duct occupies `x1 > 0`, `|x2| < L_w / 2`; the stub continues it over
//! `-W < x1 < 0` and is closed by a rigid wall at `x1 = -W`. Guided waves
//! `e^{-i K_l x1} chi_l(x2)` travel towards the stub and
//! `e^{+i K_l x1} chi_l(x2)` away from it. The stub carries the Neumann
//! modes of the rectangle and couples to the duct through the mouth
//! `x1 = 0`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Background;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Guided modes are kept while `|K_l| L_w` stays below this bound.
pub const EVANESCENT_LIMIT: f64 = 40.0;

fn neumann_factor(index: u32) -> f64 {
    if index == 0 {
        1.0
    } else {
        2.0
    }
}

/// Duct, stub and mode counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSystem {
    /// Duct width `L_w`.
    pub duct_width: f64,
    /// Stub depth `W`.
    pub stub_depth: f64,
    #[serde(default)]
    pub background: Background,
    /// Number of stub modes retained.
    pub n_cavity: usize,
}

impl WaveguideSystem {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.duct_width) || !ok(self.stub_depth) {
            return Err(Error::Config("duct width and stub depth must be positive".into()));
        }
        if !ok(self.background.density) || !ok(self.background.bulk_modulus) {
            return Err(Error::Config("background density and bulk modulus must be positive".into()));
        }
        if self.n_cavity == 0 {
            return Err(Error::Config("at least one stub mode is required".into()));
        }
        Ok(())
    }

    /// Cutoff frequency of guided mode `l`.
    pub fn cutoff(&self, l: u32) -> f64 {
        PI * l as f64 * self.background.sound_speed() / self.duct_width
    }

    /// Number of propagating guided modes at `omega`.
    pub fn propagating_count(&self, omega: f64) -> usize {
        (0..).take_while(|&l| self.cutoff(l) < omega).count()
    }
}

/// One transverse duct mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedMode {
    pub index: u32,
    pub duct_width: f64,
}

impl GuidedMode {
    /// `chi_l(x2) = sqrt((2 - delta_l0) / L_w) cos(pi l (x2 / L_w + 1/2))`.
    pub fn shape(&self, x2: f64) -> f64 {
        let l = self.index as f64;
        (neumann_factor(self.index) / self.duct_width).sqrt() * (PI * l * (x2 / self.duct_width + 0.5)).cos()
    }

    /// Axial wavenumber with `Im K >= 0` below cutoff.
    pub fn wavenumber(&self, omega: f64, background: &Background) -> Complex64 {
        let k = background.wavenumber(omega);
        let t = PI * self.index as f64 / self.duct_width;
        let d = k * k - t * t;
        if d >= 0.0 {
            Complex64::new(d.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-d).sqrt())
        }
    }
}

/// Guided modes retained at `omega`: every propagating mode plus evanescent
/// ones with `|K_l| L_w <= EVANESCENT_LIMIT`.
pub fn guided_modes(system: &WaveguideSystem, omega: f64) -> Vec<GuidedMode> {
    let mut out = Vec::new();
    for l in 0.. {
        let mode = GuidedMode { index: l, duct_width: system.duct_width };
        let k = mode.wavenumber(omega, &system.background);
        if k.im > 0.0 && k.im * system.duct_width > EVANESCENT_LIMIT {
            break;
        }
        out.push(mode);
    }
    out
}

/// A normalized Neumann mode of the stub
/// `N cos(p pi (x1 + W) / W) cos(q pi (x2 / L_w + 1/2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode {
    pub p: u32,
    pub q: u32,
    pub omega: f64,
    pub amplitude: f64,
    pub stub_depth: f64,
    pub duct_width: f64,
}

impl CavityMode {
    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        self.amplitude
            * (self.p as f64 * PI * (x1 + self.stub_depth) / self.stub_depth).cos()
            * (self.q as f64 * PI * (x2 / self.duct_width + 0.5)).cos()
    }
}

/// The first `count` stub modes ordered by eigenfrequency, ties broken by
/// smaller `q`.
pub fn cavity_modes(system: &WaveguideSystem, count: usize) -> Result<Vec<CavityMode>> {
    system.validate()?;
    if count == 0 {
        return Err(Error::Domain("mode count must be at least 1".into()));
    }
    let (w, lw) = (system.stub_depth, system.duct_width);
    let c = system.background.sound_speed();
    let kappa = system.background.bulk_modulus;
    let omega = |p: u32, q: u32| c * PI * ((p as f64 / w).powi(2) + (q as f64 / lw).powi(2)).sqrt();
    // The `count` lowest modes lie within these index bounds.
    let p_max = count as u32;
    let q_max = count as u32;
    let mut all = Vec::with_capacity(((p_max + 1) * (q_max + 1)) as usize);
    for p in 0..=p_max {
        for q in 0..=q_max {
            all.push((p, q, omega(p, q)));
        }
    }
    all.sort_by(|a, b| {
        if (a.2 - b.2).abs() <= 1e-12 * a.2.max(b.2) {
            a.1.cmp(&b.1).then(a.0.cmp(&b.0))
        } else {
            a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal)
        }
    });
    Ok(all
        .into_iter()
        .take(count)
        .map(|(p, q, om)| CavityMode {
            p,
            q,
            omega: om,
            amplitude: (kappa * neumann_factor(p) * neumann_factor(q) / (w * lw)).sqrt(),
            stub_depth: w,
            duct_width: lw,
        })
        .collect())
}

/// `gamma_ml = int_mouth u_m chi_l dx2 = (-1)^p delta_ql sqrt(kappa0 (2 - delta_p0) / W)`.
pub fn waveguide_gamma(modes: &[CavityMode], guided: &[GuidedMode], system: &WaveguideSystem) -> DMatrix<f64> {
    let kappa = system.background.bulk_modulus;
    DMatrix::from_fn(modes.len(), guided.len(), |m, l| {
        let mode = &modes[m];
        if mode.q != guided[l].index {
            return 0.0;
        }
        let sign = if mode.p % 2 == 0 { 1.0 } else { -1.0 };
        sign * (kappa * neumann_factor(mode.p) / system.stub_depth).sqrt()
    })
}

/// `Lambda - omega^2 - gamma G gamma^H` with `G = diag(i K_l / rho0)`.
pub fn effective_operator(
    modes: &[CavityMode],
    guided: &[GuidedMode],
    system: &WaveguideSystem,
    omega: f64,
) -> DMatrix<Complex64> {
    let gamma = waveguide_gamma(modes, guided, system);
    let g: Vec<Complex64> = guided
        .iter()
        .map(|m| I * m.wavenumber(omega, &system.background) / system.background.density)
        .collect();
    let n = modes.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v: Complex64 = (0..guided.len()).map(|l| gamma[(i, l)] * g[l] * gamma[(j, l)]).sum();
        v = -v;
        if i == j {
            v += modes[i].omega * modes[i].omega - omega * omega;
        }
        v
    })
}

/// Interior coefficients and outgoing guided amplitudes.
#[derive(Debug, Clone)]
pub struct WaveguideSolution {
    pub omega: f64,
    pub guided: Vec<GuidedMode>,
    pub xi: DVector<Complex64>,
    pub alpha_out: Vec<Complex64>,
    /// `||M xi - rhs|| / ||rhs||`.
    pub residual: f64,
}

/// Solves `(Lambda - omega^2 - gamma G gamma^H) xi = -2 gamma G alpha^-`
/// and recovers `alpha^+ = gamma^H xi - alpha^-`.
///
/// `alpha_in` lists incident amplitudes for `l = 0, 1, ...`; missing
/// entries are zero.
pub fn solve_waveguide_cme(system: &WaveguideSystem, omega: f64, alpha_in: &[Complex64]) -> Result<WaveguideSolution> {
    system.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    let modes = cavity_modes(system, system.n_cavity)?;
    let guided = guided_modes(system, omega);
    if alpha_in.len() > guided.len() {
        return Err(Error::Domain(format!(
            "{} incident amplitudes given but only {} guided modes retained",
            alpha_in.len(),
            guided.len()
        )));
    }
    let mut alpha = DVector::<Complex64>::zeros(guided.len());
    for (a, v) in alpha.iter_mut().zip(alpha_in) {
        *a = *v;
    }
    let gamma = waveguide_gamma(&modes, &guided, system).map(|v| Complex64::new(v, 0.0));
    let g = DVector::from_iterator(
        guided.len(),
        guided
            .iter()
            .map(|m| I * m.wavenumber(omega, &system.background) / system.background.density),
    );
    let matrix = effective_operator(&modes, &guided, system, omega);
    let rhs = -(&gamma * alpha.component_mul(&g)) * Complex64::new(2.0, 0.0);
    let xi = matrix.clone().lu().solve(&rhs).ok_or(Error::Singular { omega })?;
    let rhs_norm = rhs.norm();
    let residual = if rhs_norm > 0.0 { (&matrix * &xi - &rhs).norm() / rhs_norm } else { 0.0 };
    let out = gamma.adjoint() * &xi - &alpha;
    Ok(WaveguideSolution { omega, guided, xi, alpha_out: out.iter().copied().collect(), residual })
}

/// Closed-form reflection of the straight stub for the fundamental mode,
/// `(1 + i tan K W) / (1 - i tan K W)`, valid while only that mode
/// propagates.
pub fn stub_reflection_oracle(system: &WaveguideSystem, omega: f64) -> Result<Complex64> {
    system.validate()?;
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    if system.propagating_count(omega) != 1 {
        return Err(Error::Domain("oracle needs exactly one propagating duct mode".into()));
    }
    let phase = system.background.wavenumber(omega) * system.stub_depth;
    // Written with cos and sin so that cos(K W) = 0 gives the limit -1.
    let (s, c) = phase.sin_cos();
    Ok(Complex64::new(c, s) / Complex64::new(c, -s))
}
