//! Synthetic weak-measurement readout.
//!
//! Each pixel's circular-polarisation imbalance is modelled as
//! `s = sin(zeta v/c)`, the exact inverse of the arcsine estimator. Counts are
//! drawn as a Poisson total split binomially with probability `(1 + s)/2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apparatus::ApparatusConfig;
use crate::error::{Error, Result};
use crate::trajectory::{integrate, pixel_centers, GriddedField, Scheme, SeedSet, TrajectoryEnsemble};
use crate::wavefield::WaveField;

pub const DEFAULT_COUPLING: f64 = 336.0;
pub const DEFAULT_PIXEL_PITCH: f64 = 13e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSettings {
    /// Dimensionless coupling; the pointer shift is `v/c` times this.
    pub coupling: f64,
    pub pixel_pitch: f64,
    /// Half-width of the pixel window [m].
    pub half_width: f64,
    /// Expected counts at the brightest pixel of each plane.
    pub exposure: f64,
    pub seed: u64,
}

impl DetectorSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coupling", self.coupling),
            ("pixel_pitch", self.pixel_pitch),
            ("half_width", self.half_width),
            ("exposure", self.exposure),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("detector {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exposure {
    /// Poisson total per pixel, binomial split.
    ShotNoise,
    /// Expected counts used directly.
    Noiseless,
}

#[derive(Debug, Clone)]
pub struct DetectorModel {
    settings: DetectorSettings,
    config: ApparatusConfig,
    pixels: Vec<f64>,
}

/// Counts on one plane; integer-valued unless produced noiselessly.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCounts {
    pub plane: usize,
    pub z: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

impl DetectorModel {
    /// Validates settings and checks that `zeta |v/c| < pi/2` on every pixel
    /// of every plane for each field, so the arcsine never saturates.
    pub fn new(settings: DetectorSettings, fields: &[&WaveField]) -> Result<Self> {
        settings.validate()?;
        let config = fields
            .first()
            .map(|f| f.config().clone())
            .ok_or_else(|| Error::Detector("at least one field is needed".into()))?;
        let pixels = pixel_centers(settings.pixel_pitch, settings.half_width)?;
        let mut worst: f64 = 0.0;
        for field in fields {
            for &z in field.config().planes() {
                for &x in &pixels {
                    if let Ok(sample) = field.momentum(x, z) {
                        worst = worst.max(sample.v_over_c.abs());
                    }
                }
            }
        }
        if settings.coupling * worst >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Detector(format!(
                "coupling {} times max |v/c| {worst:e} leaves the arcsine branch",
                settings.coupling
            )));
        }
        Ok(DetectorModel {
            settings,
            config,
            pixels,
        })
    }

    pub fn settings(&self) -> &DetectorSettings {
        &self.settings
    }

    pub fn config(&self) -> &ApparatusConfig {
        &self.config
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Imbalance `sin(zeta v/c)` for a velocity ratio.
    pub fn imbalance(&self, v_over_c: f64) -> f64 {
        (self.settings.coupling * v_over_c).sin()
    }

    /// Weak momentum estimate in hbar/d from right/left counts.
    pub fn invert(&self, right: f64, left: f64) -> Result<f64> {
        invert_counts(right, left, self.settings.coupling, &self.config)
    }
}

/// `(h / (lambda zeta)) asin((N_R - N_L)/(N_R + N_L))`, reported in hbar/d.
pub fn invert_counts(right: f64, left: f64, coupling: f64, config: &ApparatusConfig) -> Result<f64> {
    let total = right + left;
    if !(total > 0.0) {
        return Err(Error::EmptyPixel { pixel: 0 });
    }
    let s = ((right - left) / total).clamp(-1.0, 1.0);
    Ok(config.velocity_ratio_to_momentum(s.asin() / coupling))
}

fn plane_rng(seed: u64, phase_index: u64, plane: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase_index * (1 << 32) + plane as u64);
    rng
}

fn phase_index(field: &WaveField) -> u64 {
    if field.has_central_node() {
        1
    } else {
        0
    }
}

fn draw(rng: &mut ChaCha8Rng, mean: f64, p_right: f64) -> (f64, f64) {
    if !(mean > 0.0) {
        return (0.0, 0.0);
    }
    let total = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
    let right = Binomial::new(total, p_right.clamp(0.0, 1.0))
        .expect("probability in [0, 1]")
        .sample(rng);
    (right as f64, (total - right) as f64)
}

/// Counts for every pixel of plane `plane`.
pub fn simulate_counts(field: &WaveField, plane: usize, model: &DetectorModel, exposure: Exposure) -> Result<PlaneCounts> {
    let z = *field
        .config()
        .planes()
        .get(plane)
        .ok_or_else(|| Error::Detector(format!("plane {plane} is not in the plane list")))?;
    let intensity = model
        .pixels
        .iter()
        .map(|&x| field.intensity(x, z))
        .collect::<Result<Vec<f64>>>()?;
    let brightest = intensity.iter().cloned().fold(0.0, f64::max);
    if !(brightest > 0.0) {
        return Err(Error::Detector(format!("plane {plane} is dark")));
    }
    let mut rng = plane_rng(model.settings.seed, phase_index(field), plane);
    let mut right = Vec::with_capacity(intensity.len());
    let mut left = Vec::with_capacity(intensity.len());
    for (&x, &i) in model.pixels.iter().zip(&intensity) {
        let mean = model.settings.exposure * i / brightest;
        let s = match field.momentum(x, z) {
            Ok(sample) => model.imbalance(sample.v_over_c),
            Err(_) => 0.0,
        };
        let p_right = 0.5 * (1.0 + s);
        let (r, l) = match exposure {
            Exposure::Noiseless => (mean * p_right, mean * (1.0 - p_right)),
            Exposure::ShotNoise => draw(&mut rng, mean, p_right),
        };
        right.push(r);
        left.push(l);
    }
    Ok(PlaneCounts { plane, z, right, left })
}

/// Counts on every plane of the field's plane list.
pub fn simulate_all(field: &WaveField, model: &DetectorModel, exposure: Exposure) -> Result<Vec<PlaneCounts>> {
    (0..field.config().planes().len())
        .into_par_iter()
        .map(|j| simulate_counts(field, j, model, exposure))
        .collect()
}

/// Weak momentum per pixel; `None` for pixels without counts.
pub fn invert_plane(counts: &PlaneCounts, model: &DetectorModel) -> Vec<Option<f64>> {
    counts
        .right
        .iter()
        .zip(&counts.left)
        .map(|(&r, &l)| model.invert(r, l).ok())
        .collect()
}

/// Builds the spline momentum field from inverted counts and integrates the
/// seeds through it plane by plane.
pub fn reconstruct_from_counts(
    counts: &[PlaneCounts],
    model: &DetectorModel,
    seeds: &SeedSet,
    phase: f64,
) -> Result<TrajectoryEnsemble> {
    let field = gridded_from_counts(counts, model, phase)?;
    integrate(seeds, &field, Scheme::PaperEuler)
}

/// Spline momentum and count-density field built from per-plane counts.
pub fn gridded_from_counts(counts: &[PlaneCounts], model: &DetectorModel, phase: f64) -> Result<GriddedField> {
    let planes = model.config.planes();
    if counts.len() != planes.len() {
        return Err(Error::Reconstruction(format!(
            "counts for {} planes, expected {}",
            counts.len(),
            planes.len()
        )));
    }
    let mut momentum = Vec::with_capacity(counts.len());
    let mut density = Vec::with_capacity(counts.len());
    for (j, plane) in counts.iter().enumerate() {
        if plane.plane != j {
            return Err(Error::Reconstruction(format!("counts out of order at plane {j}")));
        }
        let p = invert_plane(plane, model);
        if p.iter().filter(|v| v.is_some()).count() < 2 {
            return Err(Error::Reconstruction(format!("plane {j} has fewer than two lit pixels")));
        }
        let rho = plane
            .right
            .iter()
            .zip(&plane.left)
            .zip(&p)
            .map(|((r, l), p)| p.map(|_| r + l))
            .collect();
        momentum.push(p);
        density.push(rho);
    }
    GriddedField::from_samples(model.config.clone(), phase, &model.pixels, momentum, density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub expected_counts: f64,
    pub repetitions: usize,
    pub true_momentum: f64,
    pub mean_estimate: f64,
    /// Sample standard deviation of the single-pixel estimate.
    pub standard_error: f64,
}

/// Monte-Carlo spread of the single-pixel estimate for a fixed `v/c` at each
/// expected total count. Repetitions use independent ChaCha streams so the
/// result does not depend on thread scheduling.
pub fn error_scaling(
    model: &DetectorModel,
    v_over_c: f64,
    expected_counts: &[f64],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if repetitions < 2 {
        return Err(Error::Config("at least two repetitions are needed".into()));
    }
    let s = model.imbalance(v_over_c);
    let p_right = 0.5 * (1.0 + s);
    let truth = model.config.velocity_ratio_to_momentum(v_over_c);
    expected_counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("expected counts must be positive, got {c}")));
            }
            let estimates: Vec<f64> = (0..repetitions)
                .into_par_iter()
                .filter_map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(((k as u64) << 40) | rep as u64);
                    let (r, l) = draw(&mut rng, c, p_right);
                    model.invert(r, l).ok()
                })
                .collect();
            let n = estimates.len() as f64;
            let mean = estimates.iter().sum::<f64>() / n;
            let var = estimates.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(ScalingRow {
                expected_counts: c,
                repetitions: estimates.len(),
                true_momentum: truth,
                mean_estimate: mean,
                standard_error: var.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn settings() -> DetectorSettings {
        DetectorSettings {
            coupling: DEFAULT_COUPLING,
            pixel_pitch: DEFAULT_PIXEL_PITCH,
            half_width: 6e-3,
            exposure: 1e4,
            seed: 7,
        }
    }

    fn small_config() -> ApparatusConfig {
        ApparatusConfig::reference().with_planes(vec![1.445, 4.0, 8.612]).unwrap()
    }

    #[test]
    fn balanced_counts_mean_zero_momentum() {
        let c = small_config();
        assert_eq!(invert_counts(500.0, 500.0, 336.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn empty_pixel_is_an_error() {
        let c = small_config();
        assert!(matches!(invert_counts(0.0, 0.0, 336.0, &c), Err(Error::EmptyPixel { .. })));
    }

    #[test]
    fn typical_far_field_imbalance() {
        let field = WaveField::new(small_config(), 0.0).unwrap();
        let model = DetectorModel::new(settings(), &[&field]).unwrap();
        let s = model.imbalance(2.7e-4);
        assert!((s - (336.0f64 * 2.7e-4).sin()).abs() < 1e-15);
        assert!((s - 0.0906).abs() < 1e-4);
    }

    #[test]
    fn noiseless_round_trip_is_exact() {
        let c = small_config();
        let field = WaveField::new(c.clone(), PI).unwrap();
        let model = DetectorModel::new(settings(), &[&field]).unwrap();
        let counts = simulate_counts(&field, 2, &model, Exposure::Noiseless).unwrap();
        for (k, &x) in model.pixels().iter().enumerate() {
            let truth = field.momentum(x, 8.612).unwrap().p;
            if let Ok(p) = model.invert(counts.right[k], counts.left[k]) {
                assert!((p - truth).abs() <= 1e-12 * truth.abs().max(1e-3), "{k}: {p} vs {truth}");
            }
        }
    }

    #[test]
    fn zero_velocity_gives_equal_expected_counts() {
        let c = small_config();
        let field = WaveField::new(c, 0.0).unwrap();
        let model = DetectorModel::new(settings(), &[&field]).unwrap();
        let r = model.imbalance(0.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn strong_coupling_is_rejected_at_construction() {
        let field = WaveField::new(small_config(), 0.0).unwrap();
        let mut s = settings();
        s.coupling = 1e5;
        assert!(matches!(DetectorModel::new(s, &[&field]), Err(Error::Detector(_))));
        s.coupling = -1.0;
        assert!(matches!(DetectorModel::new(s, &[&field]), Err(Error::Config(_))));
    }

    #[test]
    fn counts_are_deterministic_per_seed() {
        let field = WaveField::new(small_config(), 0.0).unwrap();
        let model = DetectorModel::new(settings(), &[&field]).unwrap();
        let a = simulate_all(&field, &model, Exposure::ShotNoise).unwrap();
        let b = simulate_all(&field, &model, Exposure::ShotNoise).unwrap();
        assert_eq!(a, b);
        let mut other = settings();
        other.seed = 8;
        let model2 = DetectorModel::new(other, &[&field]).unwrap();
        let c = simulate_all(&field, &model2, Exposure::ShotNoise).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shot_noise_counts_are_integers() {
        let field = WaveField::new(small_config(), 0.0).unwrap();
        let model = DetectorModel::new(settings(), &[&field]).unwrap();
        let c = simulate_counts(&field, 1, &model, Exposure::ShotNoise).unwrap();
        assert!(c.right.iter().chain(&c.left).all(|v| v.fract() == 0.0 && *v >= 0.0));
        let total: f64 = c.right.iter().chain(&c.left).sum();
        assert!(total > 0.0);
    }

    #[test]
    fn dark_planes_fail_reconstruction() {
        let c = small_config();
        let field = WaveField::new(c.clone(), 0.0).unwrap();
        let model = DetectorModel::new(settings(), &[&field]).unwrap();
        let mut counts = simulate_all(&field, &model, Exposure::ShotNoise).unwrap();
        counts[1].right.iter_mut().for_each(|v| *v = 0.0);
        counts[1].left.iter_mut().for_each(|v| *v = 0.0);
        let seeds = crate::trajectory::seed(&c, 5).unwrap();
        assert!(matches!(
            reconstruct_from_counts(&counts, &model, &seeds, 0.0),
            Err(Error::Reconstruction(_))
        ));
    }
}
