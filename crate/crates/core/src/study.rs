//! Ensemble-level studies shared by the command pipelines: per-plane
//! disturbance distributions, the accumulation curve and the visibility sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apparatus::ApparatusConfig;
use crate::disturbance::{
    bound, dominant_peaks, mean_abs, mix, pairwise_disturbance, smooth, DisturbanceDistribution, EraserMixture,
    MomentumGrid, Pairing, PairingMode, Peak, DEFAULT_GRID_SPACING, DEFAULT_KERNEL_SIGMA,
};
use crate::error::{Error, Result};
use crate::trajectory::{integrate, seed, Scheme, TrajectoryEnsemble, VelocityField};
use crate::wavefield::WaveField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSettings {
    pub sigma: f64,
    pub spacing: f64,
    pub pairing: PairingMode,
}

impl Default for KernelSettings {
    fn default() -> Self {
        KernelSettings {
            sigma: DEFAULT_KERNEL_SIGMA,
            spacing: DEFAULT_GRID_SPACING,
            pairing: PairingMode::PairedTrajectory,
        }
    }
}

/// The undisturbed (phi = 0) and disturbed (phi = pi) ensembles launched from
/// one seed set.
#[derive(Debug, Clone)]
pub struct EnsemblePair {
    pub zero: TrajectoryEnsemble,
    pub pi: TrajectoryEnsemble,
}

impl EnsemblePair {
    pub fn planes(&self) -> &[f64] {
        self.zero.planes()
    }
}

/// Seeds `n_per_slit` trajectories per slit on the first plane and integrates
/// both phases through the analytic field.
pub fn launch(config: &ApparatusConfig, n_per_slit: usize, scheme: Scheme) -> Result<EnsemblePair> {
    let seeds = seed(config, n_per_slit)?;
    let even = WaveField::new(config.clone(), 0.0)?;
    let odd = WaveField::new(config.clone(), std::f64::consts::PI)?;
    Ok(EnsemblePair {
        zero: integrate(&seeds, &even, scheme)?,
        pi: integrate(&seeds, &odd, scheme)?,
    })
}

/// P^0 and P^pi on one plane, smoothed on a shared grid.
#[derive(Debug, Clone)]
pub struct PlaneDisturbance {
    pub plane: usize,
    pub z: f64,
    pub zero: DisturbanceDistribution,
    pub pi: DisturbanceDistribution,
}

impl PlaneDisturbance {
    pub fn mixed(&self, mixture: EraserMixture) -> Result<DisturbanceDistribution> {
        mix(&self.zero, &self.pi, mixture)
    }

    pub fn mean_abs(&self, mixture: EraserMixture) -> Result<f64> {
        Ok(mean_abs(&self.mixed(mixture)?))
    }

    pub fn dominant_pi_peaks(&self, relative: f64) -> Vec<Peak> {
        dominant_peaks(&self.pi, relative)
    }
}

fn pairing<'a>(mode: PairingMode, reference: Option<&'a dyn VelocityField>) -> Result<Pairing<'a>> {
    match (mode, reference) {
        (PairingMode::PairedTrajectory, _) => Ok(Pairing::PairedTrajectory),
        (PairingMode::SamePoint, Some(field)) => Ok(Pairing::SamePoint(field)),
        (PairingMode::SamePoint, None) => Err(Error::Pairing(
            "same-point pairing needs the undisturbed field".into(),
        )),
    }
}

/// Disturbance distributions on plane `plane`. `reference` is the phi = 0
/// field, required only for same-point pairing.
pub fn plane_disturbance(
    pair: &EnsemblePair,
    plane: usize,
    kernel: &KernelSettings,
    reference: Option<&dyn VelocityField>,
) -> Result<PlaneDisturbance> {
    let mode = pairing(kernel.pairing, reference)?;
    let zero = pairwise_disturbance(&pair.zero, &pair.zero, plane, mode)?;
    let pi = pairwise_disturbance(&pair.pi, &pair.zero, plane, mode)?;
    let grid = MomentumGrid::covering(zero.iter().chain(&pi), kernel.sigma, kernel.spacing)?;
    Ok(PlaneDisturbance {
        plane,
        z: pair.planes()[plane],
        zero: smooth(&zero, kernel.sigma, &grid)?,
        pi: smooth(&pi, kernel.sigma, &grid)?,
    })
}

/// [`plane_disturbance`] on every plane, in plane order.
pub fn all_planes(
    pair: &EnsemblePair,
    kernel: &KernelSettings,
    reference: Option<&dyn VelocityField>,
) -> Result<Vec<PlaneDisturbance>> {
    (0..pair.planes().len())
        .into_par_iter()
        .map(|j| plane_disturbance(pair, j, kernel, reference))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub visibility: f64,
    pub eta0: f64,
    pub mean_abs: f64,
    pub bound: f64,
    /// `mean_abs` less the smoothing contribution `sigma sqrt(2/pi) eta0`.
    pub bias_noted: f64,
}

impl TradeoffPoint {
    pub fn margin(&self) -> f64 {
        self.mean_abs - self.bound
    }
}

/// Mean disturbance of the `eta0 = (1 + V)/2` mixture for each visibility.
pub fn tradeoff(plane: &PlaneDisturbance, visibilities: &[f64]) -> Result<Vec<TradeoffPoint>> {
    let sigma = plane.zero.sigma();
    visibilities
        .iter()
        .map(|&v| {
            let mixture = EraserMixture::for_visibility(v)?;
            let m = plane.mean_abs(mixture)?;
            Ok(TradeoffPoint {
                visibility: v,
                eta0: mixture.eta0(),
                mean_abs: m,
                bound: bound(v)?,
                bias_noted: m - crate::disturbance::kernel_bias(sigma) * mixture.eta0(),
            })
        })
        .collect()
}

/// Ripple check on an accumulation curve: the largest single-step decrease.
pub fn largest_drop(curve: &[f64]) -> f64 {
    curve.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

/// Largest decrease from any earlier value.
pub fn drawdown(curve: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in curve {
        peak = peak.max(v);
        worst = worst.max(peak - v);
    }
    worst
}

/// The default ten-step visibility list 0, 0.1, ..., 1.
pub fn visibility_steps() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}
