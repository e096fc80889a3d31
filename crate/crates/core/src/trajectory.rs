//! Quantile seeding and plane-to-plane integration of Bohmian trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::apparatus::ApparatusConfig;
use crate::error::{Error, Result};
use crate::spline::CubicSpline;
use crate::wavefield::{MomentumSample, WaveField};

/// Steps landing closer than this fraction of d to a node are halved.
const NODE_GUARD: f64 = 1e-9;
const MAX_HALVINGS: u32 = 48;

/// Anything that can report the Bohmian momentum and the density.
pub trait VelocityField: Sync {
    fn config(&self) -> &ApparatusConfig;
    fn phase(&self) -> f64;
    fn momentum_at(&self, x: f64, z: f64) -> Result<MomentumSample>;
    fn density_at(&self, x: f64, z: f64) -> Result<f64>;
    /// Whether `x` lies within `tolerance` of a node of the field.
    fn near_node(&self, _x: f64, _tolerance: f64) -> bool {
        false
    }
}

impl VelocityField for WaveField {
    fn config(&self) -> &ApparatusConfig {
        WaveField::config(self)
    }

    fn phase(&self) -> f64 {
        WaveField::phase(self)
    }

    fn momentum_at(&self, x: f64, z: f64) -> Result<MomentumSample> {
        self.momentum(x, z)
    }

    fn density_at(&self, x: f64, z: f64) -> Result<f64> {
        self.intensity(x, z)
    }

    fn near_node(&self, x: f64, tolerance: f64) -> bool {
        self.has_central_node() && x.abs() < tolerance
    }
}

/// Initial positions on the first plane, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    positions: Vec<f64>,
    plane: f64,
}

impl SeedSet {
    pub fn from_positions(mut positions: Vec<f64>, plane: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("seed set is empty".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("seed positions must be finite".into()));
        }
        positions.sort_by(f64::total_cmp);
        Ok(SeedSet { positions, plane })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn plane(&self) -> f64 {
        self.plane
    }

    /// Seeds reflected through x = 0.
    pub fn mirrored(&self) -> SeedSet {
        let mut positions: Vec<f64> = self.positions.iter().map(|x| -x).collect();
        positions.reverse();
        SeedSet {
            positions,
            plane: self.plane,
        }
    }

    /// Weights `density(x_i) (x_{i+1} - x_{i-1}) / 2` normalised to unit sum;
    /// the two end seeds get zero weight.
    pub fn weights(&self, density: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
        self.weights_where(density, |_| true)
    }

    pub(crate) fn weights_where(
        &self,
        density: impl Fn(f64) -> Result<f64>,
        include: impl Fn(usize) -> bool,
    ) -> Result<Vec<f64>> {
        let n = self.positions.len();
        let mut weights = vec![0.0; n];
        if n < 3 {
            return Err(Error::EmptyEnsemble(
                "at least three seeds are needed for interior weights".into(),
            ));
        }
        for i in 1..n - 1 {
            if include(i) {
                let x = self.positions[i];
                let span = 0.5 * (self.positions[i + 1] - self.positions[i - 1]);
                weights[i] = density(x)? * span;
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyEnsemble("seed weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(weights)
    }
}

/// `n_per_slit` seeds per packet at quantiles i/(n_per_slit + 1) of each
/// packet's own density on the first plane.
pub fn seed(config: &ApparatusConfig, n_per_slit: usize) -> Result<SeedSet> {
    if n_per_slit == 0 {
        return Err(Error::Config("n_per_slit must be at least 1".into()));
    }
    let plane = config.planes()[0];
    let sigma = config.sigma_at(plane);
    let center = 0.5 * config.slit_separation();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let upper: Vec<f64> = (1..=n_per_slit)
        .map(|i| center + sigma * unit.inverse_cdf(i as f64 / (n_per_slit + 1) as f64))
        .collect();
    // the lower packet is the mirror image, so its seeds are exact negations
    let positions = upper.iter().map(|x| -x).chain(upper.iter().copied()).collect();
    SeedSet::from_positions(positions, plane)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// One explicit step per plane gap with the v / sqrt(c^2 - v^2) slope.
    PaperEuler,
    /// Classical fourth-order Runge-Kutta with this many substeps per gap.
    Refined(u32),
}

/// Paths for one relative phase, indexed `[seed][plane]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    phase: f64,
    planes: Vec<f64>,
    seeds: SeedSet,
    positions: Vec<Vec<f64>>,
    momenta: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    weights: Vec<f64>,
    skipped: Vec<(usize, usize)>,
}

impl TrajectoryEnsemble {
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn planes(&self) -> &[f64] {
        &self.planes
    }

    pub fn seeds(&self) -> &SeedSet {
        &self.seeds
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Path of one seed, one entry per plane [m]. NaN after a node skip.
    pub fn path(&self, seed: usize) -> &[f64] {
        &self.positions[seed]
    }

    pub fn momenta(&self, seed: usize) -> &[f64] {
        &self.momenta[seed]
    }

    pub fn velocities(&self, seed: usize) -> &[f64] {
        &self.velocities[seed]
    }

    pub fn position(&self, seed: usize, plane: usize) -> f64 {
        self.positions[seed][plane]
    }

    pub fn momentum(&self, seed: usize, plane: usize) -> f64 {
        self.momenta[seed][plane]
    }

    pub fn positions_at(&self, plane: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p[plane]).collect()
    }

    /// Seed weights on the first plane; zero for end seeds and skipped ones.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(seed, plane)` pairs where a trajectory stopped at a node.
    pub fn skipped(&self) -> &[(usize, usize)] {
        &self.skipped
    }

    pub fn is_skipped(&self, seed: usize) -> bool {
        self.skipped.iter().any(|&(s, _)| s == seed)
    }

    /// Number of (plane, neighbour pair) places where seed ordering is lost.
    pub fn crossing_violations(&self) -> usize {
        (0..self.planes.len())
            .map(|j| {
                let column = self.positions_at(j);
                column
                    .windows(2)
                    .filter(|w| w[0].is_finite() && w[1].is_finite() && w[0] >= w[1])
                    .count()
            })
            .sum()
    }
}

fn slope(v_over_c: f64) -> f64 {
    v_over_c / (1.0 - v_over_c * v_over_c).sqrt()
}

struct Stepper<'a, F: VelocityField + ?Sized> {
    field: &'a F,
    scheme: Scheme,
    guard: f64,
}

impl<F: VelocityField + ?Sized> Stepper<'_, F> {
    fn rate(&self, x: f64, z: f64) -> Result<f64> {
        Ok(slope(self.field.momentum_at(x, z)?.v_over_c))
    }

    fn raw_step(&self, x: f64, z: f64, h: f64) -> Result<f64> {
        match self.scheme {
            Scheme::PaperEuler => Ok(x + h * self.rate(x, z)?),
            Scheme::Refined(_) => {
                let k1 = self.rate(x, z)?;
                let k2 = self.rate(x + 0.5 * h * k1, z + 0.5 * h)?;
                let k3 = self.rate(x + 0.5 * h * k2, z + 0.5 * h)?;
                let k4 = self.rate(x + h * k3, z + h)?;
                Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            }
        }
    }

    /// One step, split in halves whenever it would land on a node.
    fn guarded_step(&self, x: f64, z: f64, h: f64, depth: u32) -> Result<f64> {
        let next = self.raw_step(x, z, h)?;
        if !self.field.near_node(next, self.guard) {
            return Ok(next);
        }
        if depth >= MAX_HALVINGS {
            return Err(Error::Node { x: next, z: z + h });
        }
        let mid = self.guarded_step(x, z, 0.5 * h, depth + 1)?;
        self.guarded_step(mid, z + 0.5 * h, 0.5 * h, depth + 1)
    }

    fn advance(&self, x: f64, from: f64, to: f64) -> Result<f64> {
        let pieces = match self.scheme {
            Scheme::PaperEuler => 1,
            Scheme::Refined(k) => k.max(1),
        };
        let h = (to - from) / pieces as f64;
        let mut x = x;
        for k in 0..pieces {
            x = self.guarded_step(x, from + h * k as f64, h, 0)?;
        }
        Ok(x)
    }
}

struct Trace {
    positions: Vec<f64>,
    momenta: Vec<f64>,
    velocities: Vec<f64>,
    failed_at: Option<usize>,
}

fn trace<F: VelocityField + ?Sized>(stepper: &Stepper<'_, F>, x0: f64, planes: &[f64]) -> Trace {
    let n = planes.len();
    let mut out = Trace {
        positions: vec![f64::NAN; n],
        momenta: vec![f64::NAN; n],
        velocities: vec![f64::NAN; n],
        failed_at: None,
    };
    let mut x = x0;
    for j in 0..n {
        if j > 0 {
            match stepper.advance(x, planes[j - 1], planes[j]) {
                Ok(next) => x = next,
                Err(_) => {
                    out.failed_at = Some(j);
                    return out;
                }
            }
        }
        match stepper.field.momentum_at(x, planes[j]) {
            Ok(sample) => {
                out.positions[j] = x;
                out.momenta[j] = sample.p;
                out.velocities[j] = sample.v_over_c;
            }
            Err(_) => {
                out.failed_at = Some(j);
                return out;
            }
        }
    }
    out
}

/// Integrates every seed across the field's plane list. Seeds must sit on the
/// first plane. Trajectories that meet a node are recorded in
/// [`TrajectoryEnsemble::skipped`] and carry no weight.
pub fn integrate<F: VelocityField + ?Sized>(
    seeds: &SeedSet,
    field: &F,
    scheme: Scheme,
) -> Result<TrajectoryEnsemble> {
    let planes = field.config().planes().to_vec();
    if planes.len() < 2 {
        return Err(Error::Config("integration needs at least two planes".into()));
    }
    if seeds.plane() != planes[0] {
        return Err(Error::Config(format!(
            "seeds live on z = {} but the first plane is {}",
            seeds.plane(),
            planes[0]
        )));
    }
    if let Scheme::Refined(0) = scheme {
        return Err(Error::Config("refined scheme needs at least one substep".into()));
    }
    let stepper = Stepper {
        field,
        scheme,
        guard: NODE_GUARD * field.config().slit_separation(),
    };
    let traces: Vec<Trace> = seeds
        .positions()
        .par_iter()
        .map(|&x0| trace(&stepper, x0, &planes))
        .collect();

    let skipped: Vec<(usize, usize)> = traces
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.failed_at.map(|j| (i, j)))
        .collect();
    let weights = seeds.weights_where(
        |x| field.density_at(x, planes[0]),
        |i| traces[i].failed_at.is_none(),
    )?;

    let mut positions = Vec::with_capacity(traces.len());
    let mut momenta = Vec::with_capacity(traces.len());
    let mut velocities = Vec::with_capacity(traces.len());
    for t in traces {
        positions.push(t.positions);
        momenta.push(t.momenta);
        velocities.push(t.velocities);
    }
    Ok(TrajectoryEnsemble {
        phase: field.phase(),
        planes,
        seeds: seeds.clone(),
        positions,
        momenta,
        velocities,
        weights,
        skipped,
    })
}

/// Largest |x_a - x_b| on the last plane over seeds present in both.
pub fn final_position_deviation(a: &TrajectoryEnsemble, b: &TrajectoryEnsemble) -> f64 {
    let last = a.planes().len() - 1;
    (0..a.len().min(b.len()))
        .map(|i| (a.position(i, last) - b.position(i, last)).abs())
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max)
}

/// Momentum and density sampled on a pixel grid per plane and interpolated
/// with natural cubic splines.
#[derive(Debug, Clone)]
pub struct GriddedField {
    config: ApparatusConfig,
    phase: f64,
    momentum: Vec<CubicSpline>,
    density: Vec<CubicSpline>,
    aliasing: Option<String>,
}

impl GriddedField {
    /// Builds splines from per-plane samples. `None` entries (empty pixels,
    /// nodes) are dropped before interpolation.
    pub fn from_samples(
        config: ApparatusConfig,
        phase: f64,
        pixels: &[f64],
        momentum: Vec<Vec<Option<f64>>>,
        density: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let planes = config.planes().len();
        if momentum.len() != planes || density.len() != planes {
            return Err(Error::Grid(format!(
                "expected samples for {planes} planes, got {} and {}",
                momentum.len(),
                density.len()
            )));
        }
        let build = |values: &[Option<f64>], j: usize| -> Result<CubicSpline> {
            if values.len() != pixels.len() {
                return Err(Error::Grid(format!("plane {j}: pixel count mismatch")));
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = pixels
                .iter()
                .zip(values)
                .filter_map(|(&x, v)| v.map(|v| (x, v)))
                .unzip();
            CubicSpline::new(xs, ys).map_err(|e| Error::Reconstruction(format!("plane {j}: {e}")))
        };
        let momentum = momentum
            .iter()
            .enumerate()
            .map(|(j, v)| build(v, j))
            .collect::<Result<Vec<_>>>()?;
        let density = density
            .iter()
            .enumerate()
            .map(|(j, v)| build(v, j))
            .collect::<Result<Vec<_>>>()?;
        let pitch = pixels.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let far = *config.planes().last().expect("validated plane list");
        let period = config.fringe_period(far);
        let aliasing = (pitch > period).then(|| {
            format!(
                "pixel pitch {:.3} um exceeds the fringe spacing {:.3} um at z = {far} m",
                pitch * 1e6,
                period * 1e6
            )
        });
        Ok(GriddedField {
            config,
            phase,
            momentum,
            density,
            aliasing,
        })
    }

    pub fn aliasing_warning(&self) -> Option<&str> {
        self.aliasing.as_deref()
    }

    /// Spline of the momentum [hbar/d] on plane `j`.
    pub fn plane_momentum(&self, j: usize) -> &CubicSpline {
        &self.momentum[j]
    }

    fn plane_index(&self, z: f64) -> Result<usize> {
        self.config
            .planes()
            .iter()
            .position(|&p| (p - z).abs() <= 1e-12 * p.abs().max(1.0))
            .ok_or_else(|| Error::Grid(format!("gridded field has no plane at z = {z}")))
    }
}

impl VelocityField for GriddedField {
    fn config(&self) -> &ApparatusConfig {
        &self.config
    }

    fn phase(&self) -> f64 {
        self.phase
    }

    fn momentum_at(&self, x: f64, z: f64) -> Result<MomentumSample> {
        let j = self.plane_index(z)?;
        let p = self.momentum[j].eval(x);
        Ok(MomentumSample {
            x,
            z,
            p,
            v_over_c: self.config.momentum_to_velocity_ratio(p),
        })
    }

    fn density_at(&self, x: f64, z: f64) -> Result<f64> {
        let j = self.plane_index(z)?;
        Ok(self.density[j].eval(x).max(0.0))
    }
}

/// Pixel centres symmetric about 0 with no pixel at the origin.
pub fn pixel_centers(pixel_pitch: f64, half_width: f64) -> Result<Vec<f64>> {
    if !(pixel_pitch.is_finite() && pixel_pitch > 0.0) {
        return Err(Error::Config(format!("pixel pitch must be positive, got {pixel_pitch}")));
    }
    if !(half_width.is_finite() && half_width > pixel_pitch) {
        return Err(Error::Config(format!(
            "pixel window half-width {half_width} must exceed the pitch"
        )));
    }
    let per_side = (half_width / pixel_pitch).ceil() as usize;
    let n = 2 * per_side;
    let offset = 0.5 * (n as f64 - 1.0);
    Ok((0..n).map(|k| (k as f64 - offset) * pixel_pitch).collect())
}

/// Samples the analytic momentum and density on a pixel grid at every plane.
pub fn sample_field_on_grid(field: &WaveField, pixel_pitch: f64, half_width: f64) -> Result<GriddedField> {
    let pixels = pixel_centers(pixel_pitch, half_width)?;
    let planes = field.config().planes().to_vec();
    let mut momentum = Vec::with_capacity(planes.len());
    let mut density = Vec::with_capacity(planes.len());
    for &z in &planes {
        let row: Vec<(Option<f64>, Option<f64>)> = pixels
            .par_iter()
            .map(|&x| {
                let p = field.momentum(x, z).ok().map(|s| s.p);
                (p, field.intensity(x, z).ok())
            })
            .collect();
        let (p, rho): (Vec<_>, Vec<_>) = row.into_iter().unzip();
        momentum.push(p);
        density.push(rho);
    }
    GriddedField::from_samples(field.config().clone(), field.phase(), &pixels, momentum, density)
}
