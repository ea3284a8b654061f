//! Closed-form scattering matrices of concentric disks.
//!
//! The total field outside the scatterer is `alpha (H2_n + S H1_n) e^{i n theta}`
//! per harmonic; inside a penetrable disk it is regular, `A J_n(k_in r)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Background, Frequency, MediumSpec};
use crate::specfun::bessel_jy_signed;

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("omega must be positive, got {omega}")))
    }
}

fn ratio(num: Complex64, den: Complex64, omega: f64) -> Result<Complex64> {
    if den.norm() < 1e-300 {
        return Err(Error::Singular { omega });
    }
    Ok(num / den)
}

/// The two-layer data `(a, k_in, k, beta)` of a single penetrable disk.
fn disk_parameters(medium: &MediumSpec, omega: f64) -> Result<(f64, f64, f64, f64)> {
    if medium.layers.len() != 1 || medium.sound_hard_core_radius.is_some() {
        return Err(Error::Capability(
            "closed-form transmission solution needs exactly one penetrable layer".into(),
        ));
    }
    let layer = medium.layers[0];
    let region = &medium.regions(2.0 * layer.outer_radius)[0];
    let f = Frequency::new(omega)?;
    Ok((
        layer.outer_radius,
        f.region_wavenumber(region),
        f.background_wavenumber(&medium.background),
        Frequency::impedance_ratio(region, &medium.background),
    ))
}

/// `S_nn` of a penetrable disk with a regular interior field.
pub fn exact_transmission_s(medium: &MediumSpec, n: i32, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    let (a, k_in, k, beta) = disk_parameters(medium, omega)?;
    let inner = bessel_jy_signed(n, k_in * a)?;
    let outer = bessel_jy_signed(n, k * a)?;
    let (j, jp) = (inner.j, inner.jp);
    let num = beta * j * outer.h2p() - jp * outer.h2();
    let den = beta * j * outer.h1p() - jp * outer.h1();
    ratio(-num, den, omega)
}

/// The same expression with `H2_n(k_in a)` as the interior kernel. This
/// variant is singular at the origin and does not reduce to `S = 1`
/// without contrast; it is kept only for comparison.
pub fn exact_transmission_s_hankel_kernel(medium: &MediumSpec, n: i32, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    let (a, k_in, k, beta) = disk_parameters(medium, omega)?;
    let inner = bessel_jy_signed(n, k_in * a)?;
    let outer = bessel_jy_signed(n, k * a)?;
    let (h, hp) = (inner.h2(), inner.h2p());
    let num = beta * h * outer.h2p() - hp * outer.h2();
    let den = beta * h * outer.h1p() - hp * outer.h1();
    ratio(-num, den, omega)
}

/// `S_nn = -H2'_n(ka) / H1'_n(ka)` for a sound-hard disk of radius `a`.
pub fn exact_sound_hard_s(a: f64, background: &Background, n: i32, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    let k = background.wavenumber(omega);
    let p = bessel_jy_signed(n, k * a)?;
    ratio(-p.h2p(), p.h1p(), omega)
}

/// `S^BG_ll = -H2_l(kR) / H1_l(kR)`.
pub fn background_s(radius: f64, background: &Background, l: i32, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    let k = background.wavenumber(omega);
    let p = bessel_jy_signed(l, k * radius)?;
    ratio(-p.h2(), p.h1(), omega)
}

/// Exact `S_ll` for whichever closed form matches `medium`: homogeneous,
/// a bare sound-hard disk, or a single penetrable layer.
pub fn exact_s(medium: &MediumSpec, l: i32, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    match (medium.layers.len(), medium.sound_hard_core_radius) {
        (0, None) => Ok(Complex64::new(1.0, 0.0)),
        (0, Some(a)) => exact_sound_hard_s(a, &medium.background, l, omega),
        (1, None) => exact_transmission_s(medium, l, omega),
        _ => Err(Error::Capability("no closed-form solution for this layout".into())),
    }
}

/// Diagonal of the exact scattering matrix over `l_values`.
pub fn exact_diagonal(medium: &MediumSpec, l_values: &[i32], omega: f64) -> Result<Vec<Complex64>> {
    l_values.iter().map(|&l| exact_s(medium, l, omega)).collect()
}
