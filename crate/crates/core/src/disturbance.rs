//! Momentum-disturbance distributions built from paired trajectory ensembles.
//!
//! All momenta are in units of hbar/d and densities in d/hbar.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{TrajectoryEnsemble, VelocityField};

/// Default kernel width replacing each delta function [hbar/d].
pub const DEFAULT_KERNEL_SIGMA: f64 = 0.1;
/// Smallest grid half-width [hbar/d].
pub const MIN_GRID_HALF_WIDTH: f64 = 8.0;
/// Grid spacing [hbar/d]; 1601 points on [-8, 8].
pub const DEFAULT_GRID_SPACING: f64 = 0.01;
/// Kernel widths kept between the outermost sample and the grid edge.
const KERNEL_MARGIN: f64 = 8.0;

/// Weights of the two eraser outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EraserMixture {
    eta0: f64,
}

impl EraserMixture {
    pub fn new(eta0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta0) {
            return Err(Error::Domain(format!("eta0 must lie in [0, 1], got {eta0}")));
        }
        Ok(EraserMixture { eta0 })
    }

    /// The mixture that saturates the bound for visibility `v`.
    pub fn for_visibility(v: f64) -> Result<Self> {
        Self::new(eta0_for_visibility(v)?)
    }

    /// Perfect path distinguishability.
    pub fn balanced() -> Self {
        EraserMixture { eta0: 0.5 }
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn eta_pi(&self) -> f64 {
        1.0 - self.eta0
    }
}

/// eta0 = (1 + V) / 2.
pub fn eta0_for_visibility(v: f64) -> Result<f64> {
    check_visibility(v)?;
    Ok(0.5 * (1.0 + v))
}

fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("visibility must lie in [0, 1], got {v}")))
    }
}

/// Lower bound (2/pi)(1 - V) on the total mean absolute disturbance [hbar/d].
pub fn bound(v: f64) -> Result<f64> {
    check_visibility(v)?;
    Ok(2.0 / PI * (1.0 - v))
}

/// Mean |p| contributed by smoothing a point mass at zero: sigma sqrt(2/pi).
pub fn kernel_bias(sigma: f64) -> f64 {
    sigma * (2.0 / PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMode {
    /// Same seed, each phase along its own trajectory.
    PairedTrajectory,
    /// Both phases evaluated at the disturbed trajectory's position.
    SamePoint,
}

/// How to pair a disturbed ensemble with the reference one.
#[derive(Clone, Copy)]
pub enum Pairing<'a> {
    PairedTrajectory,
    /// Needs the undisturbed field to evaluate p^0 at the disturbed position.
    SamePoint(&'a dyn VelocityField),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSample {
    pub momentum: f64,
    pub weight: f64,
}

/// Per-seed momentum change `p^phi - p^0` on plane `plane`, weighted by the
/// disturbed ensemble's seed weights. Seeds with zero weight are dropped.
pub fn pairwise_disturbance(
    disturbed: &TrajectoryEnsemble,
    reference: &TrajectoryEnsemble,
    plane: usize,
    pairing: Pairing<'_>,
) -> Result<Vec<WeightedSample>> {
    if disturbed.seeds() != reference.seeds() {
        return Err(Error::Pairing("ensembles were launched from different seeds".into()));
    }
    if disturbed.planes() != reference.planes() {
        return Err(Error::Pairing("ensembles use different plane lists".into()));
    }
    if plane >= disturbed.planes().len() {
        return Err(Error::Pairing(format!(
            "plane {plane} out of range ({} planes)",
            disturbed.planes().len()
        )));
    }
    let z = disturbed.planes()[plane];
    let mut samples = Vec::with_capacity(disturbed.len());
    for i in 0..disturbed.len() {
        let weight = disturbed.weights()[i];
        if weight == 0.0 || disturbed.is_skipped(i) {
            continue;
        }
        let p_disturbed = disturbed.momentum(i, plane);
        let p_reference = match pairing {
            Pairing::PairedTrajectory => {
                if reference.is_skipped(i) {
                    continue;
                }
                reference.momentum(i, plane)
            }
            Pairing::SamePoint(field) => field.momentum_at(disturbed.position(i, plane), z)?.p,
        };
        samples.push(WeightedSample {
            momentum: p_disturbed - p_reference,
            weight,
        });
    }
    Ok(samples)
}

/// Symmetric uniform momentum grid centred on zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    half_points: usize,
    spacing: f64,
}

impl MomentumGrid {
    /// Grid with spacing `spacing` reaching at least `half_width`.
    pub fn new(half_width: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Grid(format!("half-width must be positive, got {half_width}")));
        }
        let half_points = (half_width / spacing - 1e-9).ceil() as usize;
        Ok(MomentumGrid {
            half_points,
            spacing,
        })
    }

    /// The default [-8, 8] grid, widened so every sample sits at least eight
    /// kernel widths inside it.
    pub fn covering<'a>(
        samples: impl IntoIterator<Item = &'a WeightedSample>,
        sigma: f64,
        spacing: f64,
    ) -> Result<Self> {
        let reach = samples
            .into_iter()
            .map(|s| s.momentum.abs())
            .fold(0.0, f64::max);
        Self::new(MIN_GRID_HALF_WIDTH.max((reach + KERNEL_MARGIN * sigma).ceil()), spacing)
    }

    pub fn len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_width(&self) -> f64 {
        self.half_points as f64 * self.spacing
    }

    pub fn point(&self, k: usize) -> f64 {
        (k as f64 - self.half_points as f64) * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

/// Smoothed density P(p) on a momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceDistribution {
    grid: MomentumGrid,
    density: Vec<f64>,
    sigma: f64,
}

impl DisturbanceDistribution {
    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Trapezoidal integral of the density.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.density, self.grid.spacing)
    }

    pub fn value_at(&self, k: usize) -> f64 {
        self.density[k]
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// Replaces each weighted delta by a Gaussian of width `sigma` and sums on
/// `grid`. Weights are normalised to unit total.
pub fn smooth(samples: &[WeightedSample], sigma: f64, grid: &MomentumGrid) -> Result<DisturbanceDistribution> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble("no samples to smooth".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!("kernel width must be positive, got {sigma}")));
    }
    let total: f64 = samples.iter().map(|s| s.weight).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyEnsemble("sample weights sum to zero".into()));
    }
    let scale = 1.0 / (sigma * (2.0 * PI).sqrt() * total);
    let density = (0..grid.len())
        .map(|k| {
            let p = grid.point(k);
            samples
                .iter()
                .map(|s| {
                    let u = (p - s.momentum) / sigma;
                    s.weight * (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * scale
        })
        .collect();
    Ok(DisturbanceDistribution {
        grid: *grid,
        density,
        sigma,
    })
}

/// Pointwise `eta0 P0 + eta_pi P_pi`.
pub fn mix(
    p0: &DisturbanceDistribution,
    p_pi: &DisturbanceDistribution,
    mixture: EraserMixture,
) -> Result<DisturbanceDistribution> {
    if p0.grid != p_pi.grid {
        return Err(Error::Grid(format!(
            "cannot mix grids of half-width {} / spacing {} and {} / {}",
            p0.grid.half_width(),
            p0.grid.spacing,
            p_pi.grid.half_width(),
            p_pi.grid.spacing
        )));
    }
    let (a, b) = (mixture.eta0(), mixture.eta_pi());
    let density = p0
        .density
        .iter()
        .zip(&p_pi.density)
        .map(|(x, y)| a * x + b * y)
        .collect();
    Ok(DisturbanceDistribution {
        grid: p0.grid,
        density,
        sigma: p0.sigma.max(p_pi.sigma),
    })
}

/// Trapezoidal integral of P(p)|p|. Includes the kernel bias.
pub fn mean_abs(distribution: &DisturbanceDistribution) -> f64 {
    let weighted: Vec<f64> = distribution
        .density
        .iter()
        .enumerate()
        .map(|(k, d)| d * distribution.grid.point(k).abs())
        .collect();
    trapezoid(&weighted, distribution.grid.spacing)
}

/// A local maximum of a distribution with its topographic prominence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub momentum: f64,
    pub height: f64,
    pub prominence: f64,
}

/// All strict local maxima (plateaus reduced to their midpoint) with their
/// prominence, sorted by decreasing prominence.
pub fn peaks(distribution: &DisturbanceDistribution) -> Vec<Peak> {
    let y = &distribution.density;
    let n = y.len();
    let mut found = Vec::new();
    let mut k = 1;
    while k + 1 < n {
        if y[k] > y[k - 1] {
            let mut end = k;
            while end + 1 < n && y[end + 1] == y[k] {
                end += 1;
            }
            if end + 1 < n && y[end + 1] < y[k] {
                let mid = (k + end) / 2;
                found.push(Peak {
                    momentum: distribution.grid.point(mid),
                    height: y[mid],
                    prominence: prominence(y, k, end),
                });
            }
            k = end + 1;
        } else {
            k += 1;
        }
    }
    found.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.momentum.total_cmp(&b.momentum)));
    found
}

fn prominence(y: &[f64], start: usize, end: usize) -> f64 {
    let height = y[start];
    let mut left_min = height;
    let mut i = start;
    while i > 0 {
        i -= 1;
        if y[i] > height {
            break;
        }
        left_min = left_min.min(y[i]);
    }
    let mut right_min = height;
    let mut i = end;
    while i + 1 < y.len() {
        i += 1;
        if y[i] > height {
            break;
        }
        right_min = right_min.min(y[i]);
    }
    height - left_min.max(right_min)
}

/// Peaks whose prominence is at least `relative` times the largest one.
pub fn dominant_peaks(distribution: &DisturbanceDistribution, relative: f64) -> Vec<Peak> {
    let all = peaks(distribution);
    let top = all.first().map_or(0.0, |p| p.prominence);
    all.into_iter().filter(|p| p.prominence >= relative * top).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(momentum: f64, weight: f64) -> WeightedSample {
        WeightedSample { momentum, weight }
    }

    fn default_grid() -> MomentumGrid {
        MomentumGrid::new(8.0, 0.01).unwrap()
    }

    #[test]
    fn bound_values() {
        assert!((bound(0.0).unwrap() - 0.636_619_772_367_581_4).abs() < 1e-15);
        assert_eq!(bound(1.0).unwrap(), 0.0);
        assert!((bound(0.5).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(matches!(bound(1.1), Err(Error::Domain(_))));
        assert!(matches!(bound(-0.1), Err(Error::Domain(_))));
        assert!(bound(f64::NAN).is_err());
    }

    #[test]
    fn eta0_follows_visibility() {
        assert_eq!(eta0_for_visibility(0.0).unwrap(), 0.5);
        assert_eq!(eta0_for_visibility(1.0).unwrap(), 1.0);
        assert_eq!(eta0_for_visibility(0.6).unwrap(), 0.8);
        assert!(EraserMixture::new(1.5).is_err());
        let m = EraserMixture::new(0.3).unwrap();
        assert!((m.eta0() + m.eta_pi() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn default_grid_shape() {
        let g = MomentumGrid::new(8.0, 0.01).unwrap();
        assert_eq!(g.len(), 1601);
        assert_eq!(g.point(0), -8.0);
        assert_eq!(g.point(800), 0.0);
        assert_eq!(g.point(1600), 8.0);
    }

    #[test]
    fn covering_grid_widens_for_outliers() {
        let samples = [point(0.5, 1.0), point(-12.3, 1.0)];
        let g = MomentumGrid::covering(&samples, 0.1, 0.02).unwrap();
        assert!(g.half_width() >= 12.3 + 0.8);
        let narrow = MomentumGrid::covering(&[point(0.0, 1.0)], 0.1, 0.02).unwrap();
        assert_eq!(narrow.half_width(), 8.0);
    }

    #[test]
    fn single_point_mass_peak() {
        let d = smooth(&[point(0.0, 1.0)], 0.1, &default_grid()).unwrap();
        let expected = 1.0 / (0.1 * (2.0 * PI).sqrt());
        assert!((d.value_at(800) - expected).abs() < 1e-12);
        assert!((expected - 3.989).abs() < 1e-3);
        assert!((d.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_pair_has_zero_mean() {
        let d = smooth(&[point(2.0, 1.0), point(-2.0, 1.0)], 0.1, &default_grid()).unwrap();
        let first: f64 = d
            .density()
            .iter()
            .enumerate()
            .map(|(k, v)| v * d.grid().point(k))
            .sum::<f64>()
            * 0.01;
        assert!(first.abs() < 1e-12);
        for k in 0..800 {
            assert!((d.value_at(k) - d.value_at(1600 - k)).abs() < 1e-12);
        }
        assert!((mean_abs(&d) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn point_mass_at_zero_gives_kernel_bias() {
        let d = smooth(&[point(0.0, 3.0)], 0.1, &default_grid()).unwrap();
        // trapezoid error from the kink of |p| at the origin
        assert!((mean_abs(&d) - kernel_bias(0.1)).abs() < 1e-4);
        assert!((kernel_bias(0.1) - 0.0798).abs() < 1e-4);
    }

    #[test]
    fn smoothing_errors() {
        assert!(matches!(smooth(&[], 0.1, &default_grid()), Err(Error::EmptyEnsemble(_))));
        assert!(matches!(smooth(&[point(0.0, 1.0)], 0.0, &default_grid()), Err(Error::Domain(_))));
        assert!(matches!(smooth(&[point(0.0, 0.0)], 0.1, &default_grid()), Err(Error::EmptyEnsemble(_))));
    }

    #[test]
    fn mixing_endpoints_and_grid_check() {
        let g = default_grid();
        let p0 = smooth(&[point(0.0, 1.0)], 0.1, &g).unwrap();
        let pp = smooth(&[point(1.5, 1.0), point(-1.5, 1.0)], 0.1, &g).unwrap();
        assert_eq!(mix(&p0, &pp, EraserMixture::new(1.0).unwrap()).unwrap().density(), p0.density());
        let half = mix(&p0, &pp, EraserMixture::balanced()).unwrap();
        assert!((half.integral() - 1.0).abs() < 1e-6);
        let other = smooth(&[point(0.0, 1.0)], 0.1, &MomentumGrid::new(9.0, 0.01).unwrap()).unwrap();
        assert!(matches!(mix(&p0, &other, EraserMixture::balanced()), Err(Error::Grid(_))));
    }

    #[test]
    fn two_lobes_are_the_dominant_peaks() {
        let g = default_grid();
        let mut samples = vec![point(1.3, 1.0), point(-1.3, 1.0)];
        samples.push(point(0.0, 0.2));
        let d = smooth(&samples, 0.1, &g).unwrap();
        let dom = dominant_peaks(&d, 0.5);
        assert_eq!(dom.len(), 2);
        let mut at: Vec<f64> = dom.iter().map(|p| p.momentum).collect();
        at.sort_by(f64::total_cmp);
        assert!((at[0] + 1.3).abs() < 1e-9 && (at[1] - 1.3).abs() < 1e-9);
        assert_eq!(peaks(&d).len(), 3);
    }

    #[test]
    fn pairing_rejects_mismatched_ensembles() {
        use crate::apparatus::ApparatusConfig;
        use crate::trajectory::{integrate, SeedSet, Scheme};
        use crate::wavefield::WaveField;
        let c = ApparatusConfig::reference().with_planes(vec![1.445, 2.0, 3.0]).unwrap();
        let field = WaveField::new(c.clone(), 0.0).unwrap();
        let a = SeedSet::from_positions(vec![-2e-3, -1e-3, 1e-3, 2e-3], 1.445).unwrap();
        let b = SeedSet::from_positions(vec![-2e-3, -1.1e-3, 1e-3, 2e-3], 1.445).unwrap();
        let ea = integrate(&a, &field, Scheme::PaperEuler).unwrap();
        let eb = integrate(&b, &field, Scheme::PaperEuler).unwrap();
        assert!(matches!(
            pairwise_disturbance(&ea, &eb, 1, Pairing::PairedTrajectory),
            Err(Error::Pairing(_))
        ));
        assert!(matches!(
            pairwise_disturbance(&ea, &ea, 7, Pairing::PairedTrajectory),
            Err(Error::Pairing(_))
        ));
        let same = pairwise_disturbance(&ea, &ea, 2, Pairing::PairedTrajectory).unwrap();
        assert_eq!(same.len(), 2);
        assert!(same.iter().all(|s| s.momentum == 0.0));
    }

    proptest! {
        #[test]
        fn smoothed_density_is_normalized(
            ps in proptest::collection::vec((-6.0f64..6.0, 0.01f64..1.0), 1..40),
            sigma in 0.04f64..0.5,
        ) {
            let samples: Vec<_> = ps.iter().map(|&(p, w)| point(p, w)).collect();
            let grid = MomentumGrid::covering(&samples, sigma, sigma / 4.0).unwrap();
            let d = smooth(&samples, sigma, &grid).unwrap();
            prop_assert!(d.density().iter().all(|&v| v >= 0.0));
            prop_assert!((d.integral() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn mixture_mean_abs_is_monotone(eta_a in 0.5f64..1.0, eta_b in 0.5f64..1.0) {
            let g = default_grid();
            let p0 = smooth(&[point(0.0, 1.0)], 0.1, &g).unwrap();
            let pp = smooth(&[point(1.4, 1.0), point(-1.4, 1.0), point(0.3, 0.5)], 0.1, &g).unwrap();
            let (lo, hi) = if eta_a < eta_b { (eta_a, eta_b) } else { (eta_b, eta_a) };
            let m_lo = mean_abs(&mix(&p0, &pp, EraserMixture::new(lo).unwrap()).unwrap());
            let m_hi = mean_abs(&mix(&p0, &pp, EraserMixture::new(hi).unwrap()).unwrap());
            prop_assert!(m_hi <= m_lo + 1e-12);
        }
    }
}
