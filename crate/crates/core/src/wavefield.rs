//! Closed-form two-packet field under free paraxial propagation.
//!
//! Each path carries a normalized Gaussian whose initial density has standard
//! deviation `w/2`. Propagation to plane `z` uses the nonrelativistic analogue
//! with `t = z/c` and mass `h/(lambda c)`, which gives the complex width
//! `q(z) = sigma0^2 (1 + i z lambda / (4 pi sigma0^2))`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::apparatus::ApparatusConfig;
use crate::error::{ensure_finite, Error, Result};

/// Relative size of `|1 + t|` below which a point is treated as a node.
const NODE_TOLERANCE: f64 = 1e-12;

/// Bohmian momentum at one point of the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumSample {
    /// Transverse position [m].
    pub x: f64,
    /// Plane [m].
    pub z: f64,
    /// Momentum in units of hbar/d.
    pub p: f64,
    /// Transverse velocity over c.
    pub v_over_c: f64,
}

fn complex_width(config: &ApparatusConfig, z: f64) -> Complex64 {
    let s0 = config.initial_sigma();
    Complex64::new(s0 * s0, s0 * s0 * config.spreading(z))
}

/// Amplitude of the freely propagated packet centred at `center` [m].
pub fn evolve_packet(center: f64, x: f64, z: f64, config: &ApparatusConfig) -> Result<Complex64> {
    ensure_finite("x", x)?;
    ensure_finite("z", z)?;
    ensure_finite("center", center)?;
    if z < 0.0 {
        return Err(Error::Domain(format!("z must be >= 0, got {z}")));
    }
    let q = complex_width(config, z);
    let s0 = config.initial_sigma();
    let prefactor = (2.0 * PI).powf(-0.25) * s0.sqrt() / q.sqrt();
    let dx = x - center;
    Ok(prefactor * (-(dx * dx) / (4.0 * q)).exp())
}

/// `[f_u + e^{i phi} f_d] / N` with the overlap kept in `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    config: ApparatusConfig,
    phase: f64,
    phase_factor: Complex64,
    norm: f64,
}

impl WaveField {
    pub fn new(config: ApparatusConfig, phase: f64) -> Result<Self> {
        config.validate()?;
        ensure_finite("phase", phase)?;
        let (s, c) = phase.sin_cos();
        // snap exact multiples of pi so that the odd field really vanishes at 0
        let phase_factor = if s.abs() < 1e-15 {
            Complex64::new(c.signum(), 0.0)
        } else {
            Complex64::new(c, s)
        };
        let overlap = packet_overlap(&config);
        let norm = 1.0 / (2.0 * (1.0 + phase_factor.re * overlap)).sqrt();
        Ok(WaveField {
            config,
            phase,
            phase_factor,
            norm,
        })
    }

    pub fn config(&self) -> &ApparatusConfig {
        &self.config
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// True when the field is odd in x, i.e. it vanishes at x = 0 for all z.
    pub fn has_central_node(&self) -> bool {
        self.phase_factor == Complex64::new(-1.0, 0.0)
    }

    fn check(&self, x: f64, z: f64) -> Result<()> {
        ensure_finite("x", x)?;
        ensure_finite("z", z)?;
        if z < 0.0 {
            return Err(Error::Domain(format!("z must be >= 0, got {z}")));
        }
        Ok(())
    }

    /// Complex amplitude psi(x, z) [m^-1/2].
    pub fn amplitude(&self, x: f64, z: f64) -> Result<Complex64> {
        self.check(x, z)?;
        let half = 0.5 * self.config.slit_separation();
        let upper = evolve_packet(half, x, z, &self.config)?;
        let lower = evolve_packet(-half, x, z, &self.config)?;
        Ok((upper + self.phase_factor * lower) * self.norm)
    }

    /// Amplitude together with its closed-form x-derivative.
    pub fn amplitude_and_derivative(&self, x: f64, z: f64) -> Result<(Complex64, Complex64)> {
        self.check(x, z)?;
        let half = 0.5 * self.config.slit_separation();
        let q = complex_width(&self.config, z);
        let upper = evolve_packet(half, x, z, &self.config)?;
        let lower = evolve_packet(-half, x, z, &self.config)? * self.phase_factor;
        let du = -(x - half) / (2.0 * q) * upper;
        let dd = -(x + half) / (2.0 * q) * lower;
        Ok(((upper + lower) * self.norm, (du + dd) * self.norm))
    }

    /// Probability density |psi|^2 [1/m].
    pub fn intensity(&self, x: f64, z: f64) -> Result<f64> {
        Ok(self.amplitude(x, z)?.norm_sqr())
    }

    /// `psi'/psi` evaluated in log space so that it stays finite far in the
    /// tails where both packets underflow.
    pub fn log_derivative(&self, x: f64, z: f64) -> Result<Complex64> {
        self.check(x, z)?;
        let half = 0.5 * self.config.slit_separation();
        let q = complex_width(&self.config, z);
        let (du, dd) = (x - half, x + half);
        let exp_u = -(du * du) / (4.0 * q);
        let exp_d = -(dd * dd) / (4.0 * q);
        let rate_u = -du / (2.0 * q);
        let rate_d = -dd / (2.0 * q);
        let (lead, other, t) = if exp_u.re >= exp_d.re {
            (rate_u, rate_d, self.phase_factor * (exp_d - exp_u).exp())
        } else {
            (rate_d, rate_u, self.phase_factor.conj() * (exp_u - exp_d).exp())
        };
        let denom = 1.0 + t;
        if denom.norm() < NODE_TOLERANCE {
            return Err(Error::Node { x, z });
        }
        Ok((lead + other * t) / denom)
    }

    /// Bohmian momentum hbar Im[psi'/psi], reported in hbar/d and as v/c.
    pub fn momentum(&self, x: f64, z: f64) -> Result<MomentumSample> {
        let k = self.log_derivative(x, z)?.im;
        let d = self.config.slit_separation();
        let v_over_c = self.config.wavelength() * k / (2.0 * PI);
        if v_over_c.abs() >= 1.0 {
            return Err(Error::Domain(format!("|v/c| = {v_over_c} >= 1 at x = {x}")));
        }
        Ok(MomentumSample {
            x,
            z,
            p: d * k,
            v_over_c,
        })
    }
}

/// <f_u|f_d>, conserved by free evolution: exp(-d^2 / (8 sigma0^2)).
pub fn packet_overlap(config: &ApparatusConfig) -> f64 {
    let s0 = config.initial_sigma();
    let d = config.slit_separation();
    (-(d * d) / (8.0 * s0 * s0)).exp()
}

pub fn superpose(x: f64, z: f64, phase: f64, config: &ApparatusConfig) -> Result<Complex64> {
    WaveField::new(config.clone(), phase)?.amplitude(x, z)
}

pub fn bohm_momentum(x: f64, z: f64, phase: f64, config: &ApparatusConfig) -> Result<MomentumSample> {
    WaveField::new(config.clone(), phase)?.momentum(x, z)
}

pub fn intensity(x: f64, z: f64, phase: f64, config: &ApparatusConfig) -> Result<f64> {
    WaveField::new(config.clone(), phase)?.intensity(x, z)
}
