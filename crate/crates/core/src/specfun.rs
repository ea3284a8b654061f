//! Integer-order Bessel and Hankel functions of real argument, their
//! derivatives, and zeros.
//!
//! `J_n` comes from Miller's downward recurrence normalized by
//! `J_0 + 2 sum J_2k = 1`. The same sweep feeds the Neumann series for
//! `Y_0` and `Y_1`, and `Y_n` follows by upward recurrence, which is the
//! stable direction for the second kind.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;

/// Highest supported order.
pub const MAX_ORDER: u32 = 60;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_431;
const RESCALE: f64 = 1e250;

/// Cylinder function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CylKind {
    J,
    Y,
    H1,
    H2,
}

/// `J_n`, `Y_n` and their first derivatives at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselPair {
    pub j: f64,
    pub y: f64,
    pub jp: f64,
    pub yp: f64,
}

impl BesselPair {
    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j, self.y)
    }

    pub fn h2(&self) -> Complex64 {
        Complex64::new(self.j, -self.y)
    }

    pub fn h1p(&self) -> Complex64 {
        Complex64::new(self.jp, self.yp)
    }

    pub fn h2p(&self) -> Complex64 {
        Complex64::new(self.jp, -self.yp)
    }

    pub fn value(&self, kind: CylKind) -> Complex64 {
        match kind {
            CylKind::J => self.j.into(),
            CylKind::Y => self.y.into(),
            CylKind::H1 => self.h1(),
            CylKind::H2 => self.h2(),
        }
    }

    pub fn derivative(&self, kind: CylKind) -> Complex64 {
        match kind {
            CylKind::J => self.jp.into(),
            CylKind::Y => self.yp.into(),
            CylKind::H1 => self.h1p(),
            CylKind::H2 => self.h2p(),
        }
    }
}

fn check_order(n: u32) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::Capability(format!(
            "Bessel order {n} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Miller sweep. Returns `J_0..=J_nmax` together with `Y_0`, `Y_1`
/// (the latter two only meaningful for `x > 0`).
fn miller(nmax: usize, x: f64) -> (Vec<f64>, f64, f64) {
    if x == 0.0 {
        let mut j = vec![0.0; nmax + 1];
        j[0] = 1.0;
        return (j, f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    let top = nmax.max(x.ceil() as usize);
    let mut start = top + 40 + (8.0 * (top as f64).cbrt()).ceil() as usize;
    start += start % 2;

    let mut v = vec![0.0; start + 2];
    v[start] = 1e-30;
    for k in (1..=start).rev() {
        v[k - 1] = (2.0 * k as f64 / x) * v[k] - v[k + 1];
        if v[k - 1].abs() > RESCALE {
            for t in v[k - 1..].iter_mut() {
                *t /= RESCALE;
            }
        }
    }

    let mut norm = v[0];
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut sign = -1.0;
    let mut k = 1;
    while 2 * k <= start {
        let kf = k as f64;
        norm += 2.0 * v[2 * k];
        s0 += sign * v[2 * k] / kf;
        s1 += sign * (2.0 * kf + 1.0) * v[2 * k + 1] / (kf * (kf + 1.0));
        sign = -sign;
        k += 1;
    }
    let scale = 1.0 / norm;
    let j: Vec<f64> = v[..=nmax.max(1)].iter().map(|t| t * scale).collect();
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = FRAC_2_PI * log_term * j[0] - 2.0 * FRAC_2_PI * s0 * scale;
    let y1 = -FRAC_2_PI * j[0] / x + FRAC_2_PI * (log_term - 1.0) * j[1] - FRAC_2_PI * s1 * scale;
    (j, y0, y1)
}

/// `J_0(x), ..., J_nmax(x)` for `x >= 0`.
pub fn bessel_j_sequence(nmax: u32, x: f64) -> Result<Vec<f64>> {
    check_order(nmax)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("J_n requires a finite x >= 0, got {x}")));
    }
    let (mut j, _, _) = miller(nmax as usize, x);
    j.truncate(nmax as usize + 1);
    Ok(j)
}

/// `J_n(x)` and `J_n'(x)` for `x >= 0`.
pub fn bessel_j(n: u32, x: f64) -> Result<(f64, f64)> {
    check_order(n)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("J_n requires a finite x >= 0, got {x}")));
    }
    let (j, _, _) = miller(n as usize + 1, x);
    let n = n as usize;
    let jp = if n == 0 { -j[1] } else { 0.5 * (j[n - 1] - j[n + 1]) };
    Ok((j[n], jp))
}

/// All four of `J_n, Y_n, J_n', Y_n'` at `x > 0`.
pub fn bessel_jy(n: u32, x: f64) -> Result<BesselPair> {
    check_order(n)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Y_n is singular for x <= 0 (got {x})")));
    }
    let nu = n as usize;
    let (j, y0, y1) = miller(nu + 1, x);
    let mut y = Vec::with_capacity(nu + 2);
    y.push(y0);
    y.push(y1);
    for k in 1..=nu {
        let next = (2.0 * k as f64 / x) * y[k] - y[k - 1];
        y.push(next);
    }
    let (jp, yp) = if nu == 0 {
        (-j[1], -y[1])
    } else {
        (0.5 * (j[nu - 1] - j[nu + 1]), 0.5 * (y[nu - 1] - y[nu + 1]))
    };
    Ok(BesselPair { j: j[nu], y: y[nu], jp, yp })
}

/// `J`, `Y`, `H1`, `H2` of integer order `l` (any sign), using
/// `Z_{-l} = (-1)^l Z_l`.
pub fn bessel_jy_signed(l: i32, x: f64) -> Result<BesselPair> {
    let p = bessel_jy(l.unsigned_abs(), x)?;
    if l < 0 && l % 2 != 0 {
        Ok(BesselPair { j: -p.j, y: -p.y, jp: -p.jp, yp: -p.yp })
    } else {
        Ok(p)
    }
}

/// Evaluates a cylinder function. `J` accepts `z = 0`; the singular kinds
/// require `z > 0`.
pub fn cyl_eval(kind: CylKind, n: u32, z: f64) -> Result<Complex64> {
    if kind == CylKind::J {
        return bessel_j(n, z).map(|(j, _)| j.into());
    }
    Ok(bessel_jy(n, z)?.value(kind))
}

/// Derivative with respect to the argument, `f_n' = (f_{n-1} - f_{n+1}) / 2`.
pub fn cyl_deriv(kind: CylKind, n: u32, z: f64) -> Result<Complex64> {
    if kind == CylKind::J {
        return bessel_j(n, z).map(|(_, jp)| jp.into());
    }
    Ok(bessel_jy(n, z)?.derivative(kind))
}

/// `|z (H2'_l H1_l - H2_l H1'_l) + 4i/pi|`, which vanishes identically.
pub fn hankel_wronskian_residual(l: i32, z: f64) -> Result<f64> {
    let p = bessel_jy_signed(l, z)?;
    let w = z * (p.h2p() * p.h1() - p.h2() * p.h1p());
    Ok((w + Complex64::new(0.0, 4.0 / PI)).norm())
}

/// Which function a zero table refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroKind {
    /// Zeros of `J_n`.
    J,
    /// Zeros of `J_n'`.
    JPrime,
}

impl std::fmt::Display for ZeroKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZeroKind::J => write!(f, "J"),
            ZeroKind::JPrime => write!(f, "J'"),
        }
    }
}

/// First positive zeros of `J_n` or `J_n'`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTable {
    pub kind: ZeroKind,
    pub order: u32,
    pub zeros: Vec<f64>,
}

/// Scan step for zero bracketing; consecutive zeros are never closer than
/// about 2 for low orders.
pub const ZERO_SCAN_STEP: f64 = PI / 20.0;

/// First `count` positive zeros of `J_n` (kind `J`) or `J_n'` (kind
/// `JPrime`). The trivial zero at the origin is excluded.
pub fn cyl_zeros(kind: ZeroKind, n: u32, count: usize) -> Result<ZeroTable> {
    check_order(n)?;
    if count == 0 {
        return Err(Error::Domain("zero count must be at least 1".into()));
    }
    let f = |z: f64| -> f64 {
        let (j, jp) = bessel_j(n, z).expect("order checked, z > 0");
        match kind {
            ZeroKind::J => j,
            ZeroKind::JPrime => jp,
        }
    };
    // Zeros of J_n and J_n' (n >= 1) lie beyond n; every zero sits within
    // about pi of its neighbour, so this end point is generous.
    let end = n as f64 + 10.0 + PI * (count as f64 + 2.0);
    let zeros = roots::scan_roots(f, ZERO_SCAN_STEP, end, ZERO_SCAN_STEP, 1e-15, count)?;
    if zeros.len() < count {
        return Err(Error::RootNotFound {
            lo: ZERO_SCAN_STEP,
            hi: end,
            reason: format!("found {} of {count} zeros", zeros.len()),
        });
    }
    Ok(ZeroTable { kind, order: n, zeros })
}
