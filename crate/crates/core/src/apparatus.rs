//! Geometry of the two-path apparatus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant [J s].
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// First and last imaged planes of the reference experiment [m].
pub const FIRST_PLANE: f64 = 1.445;
pub const LAST_PLANE: f64 = 8.612;
pub const PLANE_COUNT: usize = 117;

/// Slit separation, packet waist, wavelength and the ordered list of
/// observation planes. All lengths in metres; the packets have their waist at
/// z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApparatusConfig {
    slit_separation: f64,
    packet_waist: f64,
    wavelength: f64,
    planes: Vec<f64>,
}

impl ApparatusConfig {
    pub fn new(
        slit_separation: f64,
        packet_waist: f64,
        wavelength: f64,
        planes: Vec<f64>,
    ) -> Result<Self> {
        let config = ApparatusConfig {
            slit_separation,
            packet_waist,
            wavelength,
            planes,
        };
        config.validate()?;
        Ok(config)
    }

    /// d = 3 mm, w = 0.6 mm, 808 nm, 117 uniform planes from 1.445 m to 8.612 m.
    pub fn reference() -> Self {
        ApparatusConfig {
            slit_separation: 3.0e-3,
            packet_waist: 0.6e-3,
            wavelength: 808.0e-9,
            planes: uniform_planes(FIRST_PLANE, LAST_PLANE, PLANE_COUNT),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("slit_separation", self.slit_separation),
            ("packet_waist", self.packet_waist),
            ("wavelength", self.wavelength),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.planes.is_empty() {
            return Err(Error::Config("plane list is empty".into()));
        }
        if self.planes.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
            return Err(Error::Config("planes must be finite and >= 0".into()));
        }
        if self.planes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("planes must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Same apparatus observed on a different plane list.
    pub fn with_planes(&self, planes: Vec<f64>) -> Result<Self> {
        Self::new(
            self.slit_separation,
            self.packet_waist,
            self.wavelength,
            planes,
        )
    }

    pub fn with_waist(&self, packet_waist: f64) -> Result<Self> {
        Self::new(
            self.slit_separation,
            packet_waist,
            self.wavelength,
            self.planes.clone(),
        )
    }

    pub fn slit_separation(&self) -> f64 {
        self.slit_separation
    }

    pub fn packet_waist(&self) -> f64 {
        self.packet_waist
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn planes(&self) -> &[f64] {
        &self.planes
    }

    /// Standard deviation of each packet's initial probability density, w/2.
    pub fn initial_sigma(&self) -> f64 {
        0.5 * self.packet_waist
    }

    /// Transverse effective mass h/(lambda c) [kg].
    pub fn effective_mass(&self) -> f64 {
        PLANCK / (self.wavelength * SPEED_OF_LIGHT)
    }

    /// Dimensionless spreading parameter z lambda / (4 pi sigma0^2).
    pub fn spreading(&self, z: f64) -> f64 {
        let s0 = self.initial_sigma();
        z * self.wavelength / (4.0 * std::f64::consts::PI * s0 * s0)
    }

    /// Density width of a freely propagated packet at plane z.
    pub fn sigma_at(&self, z: f64) -> f64 {
        let tau = self.spreading(z);
        self.initial_sigma() * (1.0 + tau * tau).sqrt()
    }

    /// Far-field fringe spacing lambda z / d at plane z.
    pub fn fringe_period(&self, z: f64) -> f64 {
        self.wavelength * z / self.slit_separation
    }

    /// Fraunhofer distance d^2 / lambda.
    pub fn fraunhofer_distance(&self) -> f64 {
        self.slit_separation * self.slit_separation / self.wavelength
    }

    /// Converts a momentum in hbar/d units to v/c = p lambda / h.
    pub fn momentum_to_velocity_ratio(&self, p_hbar_over_d: f64) -> f64 {
        p_hbar_over_d * self.wavelength / (2.0 * std::f64::consts::PI * self.slit_separation)
    }

    pub fn velocity_ratio_to_momentum(&self, v_over_c: f64) -> f64 {
        v_over_c * 2.0 * std::f64::consts::PI * self.slit_separation / self.wavelength
    }
}

/// `count` planes evenly spaced from `first` to `last` inclusive.
pub fn uniform_planes(first: f64, last: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![first],
        _ => {
            let step = (last - first) / (count - 1) as f64;
            (0..count)
                .map(|j| if j + 1 == count { last } else { first + step * j as f64 })
                .collect()
        }
    }
}
