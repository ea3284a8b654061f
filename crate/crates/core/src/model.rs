//! Problem description shared by every solver: the radial material layout,
//! the fictitious disk, frequencies and incident fields.
//!
//! Units default to the nondimensional system `rho0 = kappa0 = R = 1`, so the
//! background sound speed is 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density of the gas inside the reference bubble, relative to the liquid.
pub const BUBBLE_DENSITY_RATIO: f64 = 1.20e-3;
/// Bulk modulus of the gas inside the reference bubble, relative to the liquid.
pub const BUBBLE_BULK_MODULUS_RATIO: f64 = 6.36e-5;

/// One concentric layer `r_prev < r < outer_radius` with constant material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub outer_radius: f64,
    pub density: f64,
    pub bulk_modulus: f64,
}

/// Homogeneous material outside every layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub density: f64,
    pub bulk_modulus: f64,
}

impl Default for Background {
    fn default() -> Self {
        Self { density: 1.0, bulk_modulus: 1.0 }
    }
}

impl Background {
    pub fn sound_speed(&self) -> f64 {
        (self.bulk_modulus / self.density).sqrt()
    }

    pub fn wavenumber(&self, omega: f64) -> f64 {
        omega * (self.density / self.bulk_modulus).sqrt()
    }
}

/// Piecewise-constant radial medium inside the fictitious disk.
///
/// Layers are listed from the centre outwards. Between the last layer and
/// the disk boundary the background fills the space. An optional
/// sound-hard core imposes a Neumann wall at `r = sound_hard_core_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    #[serde(default)]
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub background: Background,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_hard_core_radius: Option<f64>,
}

/// A radial shell `inner < r < outer` with constant material, as seen by
/// the mode solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub inner: f64,
    pub outer: f64,
    pub density: f64,
    pub bulk_modulus: f64,
}

impl Region {
    /// `omega / c` for this region's material.
    pub fn wavenumber(&self, omega: f64) -> f64 {
        omega * self.slowness()
    }

    pub fn slowness(&self) -> f64 {
        (self.density / self.bulk_modulus).sqrt()
    }

    /// Characteristic impedance `sqrt(rho * kappa)`.
    pub fn impedance(&self) -> f64 {
        (self.density * self.bulk_modulus).sqrt()
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.inner && r <= self.outer
    }
}

impl MediumSpec {
    pub fn homogeneous(background: Background) -> Self {
        Self { layers: Vec::new(), background, sound_hard_core_radius: None }
    }

    /// Gas bubble of radius `a` in unit liquid.
    pub fn air_bubble(a: f64) -> Self {
        Self {
            layers: vec![Layer {
                outer_radius: a,
                density: BUBBLE_DENSITY_RATIO,
                bulk_modulus: BUBBLE_BULK_MODULUS_RATIO,
            }],
            background: Background::default(),
            sound_hard_core_radius: None,
        }
    }

    /// Rigid disk of radius `a` in unit background.
    pub fn sound_hard_disk(a: f64) -> Self {
        Self {
            layers: Vec::new(),
            background: Background::default(),
            sound_hard_core_radius: Some(a),
        }
    }

    /// Single penetrable disk of radius `a` with material `(density, bulk_modulus)`.
    pub fn penetrable_disk(a: f64, density: f64, bulk_modulus: f64) -> Self {
        Self {
            layers: vec![Layer { outer_radius: a, density, bulk_modulus }],
            background: Background::default(),
            sound_hard_core_radius: None,
        }
    }

    /// Outermost radius at which the material differs from the background.
    pub fn support_radius(&self) -> f64 {
        self.layers
            .last()
            .map(|l| l.outer_radius)
            .or(self.sound_hard_core_radius)
            .unwrap_or(0.0)
    }

    pub fn validate(&self, disk: &FictitiousDisk) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.background.density) || !positive(self.background.bulk_modulus) {
            return Err(Error::Config("background density and bulk modulus must be positive".into()));
        }
        let mut prev = self.sound_hard_core_radius.unwrap_or(0.0);
        if let Some(core) = self.sound_hard_core_radius {
            if !(core.is_finite() && core >= 0.0) {
                return Err(Error::Config(format!("invalid sound-hard core radius {core}")));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !positive(layer.density) || !positive(layer.bulk_modulus) {
                return Err(Error::Config(format!("layer {i}: density and bulk modulus must be positive")));
            }
            if !(layer.outer_radius.is_finite() && layer.outer_radius > prev) {
                return Err(Error::Config(format!(
                    "layer {i}: outer radius {} must exceed {prev}",
                    layer.outer_radius
                )));
            }
            prev = layer.outer_radius;
        }
        if !(disk.radius.is_finite() && disk.radius > prev) {
            return Err(Error::Config(format!(
                "disk radius {} must exceed the outermost inhomogeneity at {prev}",
                disk.radius
            )));
        }
        Ok(())
    }

    /// Shells covering `[core or 0, R]`, innermost first.
    pub fn regions(&self, radius: f64) -> Vec<Region> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut inner = self.sound_hard_core_radius.unwrap_or(0.0);
        for layer in &self.layers {
            out.push(Region {
                inner,
                outer: layer.outer_radius,
                density: layer.density,
                bulk_modulus: layer.bulk_modulus,
            });
            inner = layer.outer_radius;
        }
        out.push(Region {
            inner,
            outer: radius,
            density: self.background.density,
            bulk_modulus: self.background.bulk_modulus,
        });
        out
    }

    /// Time for a wave to cross from the centre (or core) to `radius`.
    pub fn travel_time(&self, radius: f64) -> f64 {
        self.regions(radius)
            .iter()
            .map(|r| (r.outer - r.inner) * r.slowness())
            .sum()
    }
}

/// The circle `|x| = radius` separating interior modes from exterior waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FictitiousDisk {
    pub radius: f64,
}

impl Default for FictitiousDisk {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

/// An angular frequency together with the quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub omega: f64,
}

impl Frequency {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Domain(format!("angular frequency must be positive, got {omega}")));
        }
        Ok(Self { omega })
    }

    /// Frequency whose background `k R / (2 pi)` equals `scaled`.
    pub fn from_scaled(scaled: f64, background: &Background, length: f64) -> Result<Self> {
        Self::new(2.0 * std::f64::consts::PI * scaled * background.sound_speed() / length)
    }

    pub fn background_wavenumber(&self, background: &Background) -> f64 {
        background.wavenumber(self.omega)
    }

    pub fn region_wavenumber(&self, region: &Region) -> f64 {
        region.wavenumber(self.omega)
    }

    /// `beta = sqrt(rho kappa / (rho0 kappa0))` of a region against the background.
    pub fn impedance_ratio(region: &Region, background: &Background) -> f64 {
        region.impedance() / (background.density * background.bulk_modulus).sqrt()
    }

    /// `omega L / (2 pi c)` for a length `L`.
    pub fn scaled(&self, background: &Background, length: f64) -> f64 {
        self.omega * length / (2.0 * std::f64::consts::PI * background.sound_speed())
    }
}

/// Polar angle of `x`, measured with the two-argument arctangent.
pub fn polar_angle(x: [f64; 2]) -> f64 {
    x[1].atan2(x[0])
}

/// Incoming cylindrical-wave coefficients `alpha^-_l` for a plane wave
/// `exp(i k p . x)`: `(p2 + i p1)^l / 2` for `l in [-l_max, l_max]`.
///
/// The same coefficients multiply the outgoing waves of the incident field.
pub fn plane_wave_coefficients(direction: [f64; 2], l_max: u32) -> Result<Vec<Complex64>> {
    let norm = direction[0].hypot(direction[1]);
    if !((norm - 1.0).abs() <= 1e-12) {
        return Err(Error::Domain(format!("propagation direction must be a unit vector (|p| = {norm})")));
    }
    let base = Complex64::new(direction[1], direction[0]);
    let l_max = l_max as i32;
    Ok((-l_max..=l_max).map(|l| 0.5 * base.powi(l)).collect())
}

/// The field illuminating the scatterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IncidentField {
    /// `exp(i k p . x)` with unit direction `p`.
    PlaneWave { direction: [f64; 2] },
    /// Explicit incoming coefficients for `l = -l_max..=l_max`
    /// (`coefficients.len() == 2 l_max + 1`). The incident outgoing part
    /// equals the incoming part, as for every field regular at the origin.
    Coefficients {
        #[serde(with = "complex_list")]
        coefficients: Vec<Complex64>,
    },
}

impl IncidentField {
    /// Incoming coefficients at each requested harmonic; zero outside the
    /// range an explicit coefficient list covers.
    pub fn coefficients(&self, l_values: &[i32]) -> Result<Vec<Complex64>> {
        match self {
            IncidentField::PlaneWave { direction } => {
                let l_max = l_values.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
                let all = plane_wave_coefficients(*direction, l_max)?;
                Ok(l_values.iter().map(|&l| all[(l + l_max as i32) as usize]).collect())
            }
            IncidentField::Coefficients { coefficients } => {
                if coefficients.len() % 2 == 0 {
                    return Err(Error::Config("explicit coefficient list must have odd length 2 L + 1".into()));
                }
                if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(Error::Config("explicit coefficients must be finite".into()));
                }
                let l_max = (coefficients.len() / 2) as i32;
                Ok(l_values
                    .iter()
                    .map(|&l| {
                        if l.abs() <= l_max {
                            coefficients[(l + l_max) as usize]
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect())
            }
        }
    }

    pub fn direction(&self) -> Option<[f64; 2]> {
        match self {
            IncidentField::PlaneWave { direction } => Some(*direction),
            IncidentField::Coefficients { .. } => None,
        }
    }
}

/// Serializes complex numbers as `{"re": x, "im": y}` objects.
pub mod complex_list {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ComplexRecord {
        pub re: f64,
        pub im: f64,
    }

    impl From<Complex64> for ComplexRecord {
        fn from(c: Complex64) -> Self {
            Self { re: c.re, im: c.im }
        }
    }

    impl From<ComplexRecord> for Complex64 {
        fn from(c: ComplexRecord) -> Self {
            Complex64::new(c.re, c.im)
        }
    }

    pub fn serialize<S: Serializer>(values: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let records: Vec<ComplexRecord> = values.iter().map(|&c| c.into()).collect();
        records.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let records = Vec::<ComplexRecord>::deserialize(d)?;
        Ok(records.into_iter().map(Into::into).collect())
    }
}
