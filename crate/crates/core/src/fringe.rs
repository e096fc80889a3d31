//! Mixed two-phase intensity patterns and their visibility.
//!
//! Two estimators are provided. [`visibility_extrema`] works on a sampled
//! pattern and locates the zero-order maximum and the flanking first-order
//! minima on the grid with parabolic refinement. [`visibility_theoretical`]
//! root-finds the closed-form derivative of the mixed intensity. Neither
//! corrects for the Gaussian envelope.

use serde::{Deserialize, Serialize};

use crate::apparatus::ApparatusConfig;
use crate::disturbance::EraserMixture;
use crate::error::{Error, Result};
use crate::wavefield::WaveField;

/// Minimum samples per fringe period accepted by [`pattern`].
pub const MIN_POINTS_PER_PERIOD: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FringePattern {
    plane: f64,
    xs: Vec<f64>,
    intensity: Vec<f64>,
    mixture: EraserMixture,
}

impl FringePattern {
    pub fn plane(&self) -> f64 {
        self.plane
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn mixture(&self) -> EraserMixture {
        self.mixture
    }
}

/// Symmetric grid of `points` samples spanning `half_width_periods` far-field
/// fringe periods on each side of the axis at plane `z`.
pub fn fringe_grid(config: &ApparatusConfig, z: f64, half_width_periods: f64, points: usize) -> Result<Vec<f64>> {
    if points < 3 {
        return Err(Error::Config("fringe grid needs at least three points".into()));
    }
    if !(half_width_periods.is_finite() && half_width_periods > 0.0) {
        return Err(Error::Config(format!(
            "fringe window must be positive, got {half_width_periods}"
        )));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Domain(format!("fringe plane must be positive, got {z}")));
    }
    let half = half_width_periods * config.fringe_period(z);
    let step = 2.0 * half / (points - 1) as f64;
    let mid = (points - 1) as f64 / 2.0;
    Ok((0..points).map(|k| (k as f64 - mid) * step).collect())
}

fn fields(config: &ApparatusConfig) -> Result<(WaveField, WaveField)> {
    Ok((
        WaveField::new(config.clone(), 0.0)?,
        WaveField::new(config.clone(), std::f64::consts::PI)?,
    ))
}

/// `eta0 |psi^0|^2 + eta_pi |psi^pi|^2` sampled on `xs` at plane `z`.
pub fn pattern(z: f64, mixture: EraserMixture, config: &ApparatusConfig, xs: &[f64]) -> Result<FringePattern> {
    if xs.len() < 3 {
        return Err(Error::Config("pattern grid needs at least three points".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("pattern grid must be strictly increasing".into()));
    }
    let spacing = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let period = config.fringe_period(z);
    if spacing * MIN_POINTS_PER_PERIOD > period {
        return Err(Error::Aliasing(format!(
            "grid spacing {spacing:e} m resolves fewer than {MIN_POINTS_PER_PERIOD} points per fringe period {period:e} m"
        )));
    }
    let (even, odd) = fields(config)?;
    let intensity = xs
        .iter()
        .map(|&x| Ok(mixture.eta0() * even.intensity(x, z)? + mixture.eta_pi() * odd.intensity(x, z)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FringePattern {
        plane: z,
        xs: xs.to_vec(),
        intensity,
        mixture,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub x: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    /// False when the flanking minima were not found (no resolvable fringes);
    /// the value is then reported as zero.
    pub confident: bool,
    pub maximum: Extremum,
    pub minima: Option<[Extremum; 2]>,
}

impl Visibility {
    fn from_extrema(maximum: Extremum, minima: Option<[Extremum; 2]>) -> Self {
        match minima {
            Some([a, b]) => {
                let floor = 0.5 * (a.intensity + b.intensity);
                let value = ((maximum.intensity - floor) / (maximum.intensity + floor)).clamp(0.0, 1.0);
                let confident = maximum.intensity - floor > 1e-9 * maximum.intensity;
                Visibility {
                    value,
                    confident,
                    maximum,
                    minima,
                }
            }
            None => Visibility {
                value: 0.0,
                confident: false,
                maximum,
                minima: None,
            },
        }
    }
}

/// Vertex of the parabola through three equally spaced samples.
fn parabolic_vertex(xs: &[f64], ys: &[f64], k: usize) -> Extremum {
    if k == 0 || k + 1 >= ys.len() {
        return Extremum { x: xs[k], intensity: ys[k] };
    }
    let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
    let curvature = a - 2.0 * b + c;
    if curvature == 0.0 {
        return Extremum { x: xs[k], intensity: b };
    }
    let offset = 0.5 * (a - c) / curvature;
    let h = xs[k + 1] - xs[k];
    Extremum {
        x: xs[k] + offset * h,
        intensity: b - 0.25 * (a - c) * offset,
    }
}

/// N3 is the global maximum nearest the axis; N1 and N2 are the first local
/// minima reached walking outward on each side.
pub fn visibility_extrema(pattern: &FringePattern) -> Result<Visibility> {
    let (xs, ys) = (&pattern.xs, &pattern.intensity);
    let n = ys.len();
    let top = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Err(Error::Extrema("pattern has no positive intensity".into()));
    }
    let centre = (0..n)
        .filter(|&k| ys[k] == top)
        .min_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()))
        .expect("non-empty pattern");
    if centre == 0 || centre == n - 1 {
        return Err(Error::Extrema("central maximum lies on the window edge".into()));
    }
    let mut left = centre;
    while left > 0 && ys[left - 1] < ys[left] {
        left -= 1;
    }
    let mut right = centre;
    while right + 1 < n && ys[right + 1] < ys[right] {
        right += 1;
    }
    let maximum = parabolic_vertex(xs, ys, centre);
    let minima = (left > 0 && right + 1 < n)
        .then(|| [parabolic_vertex(xs, ys, left), parabolic_vertex(xs, ys, right)]);
    Ok(Visibility::from_extrema(maximum, minima))
}

/// Mixed intensity and its x-derivative from the closed-form field.
struct MixedIntensity {
    even: WaveField,
    odd: WaveField,
    mixture: EraserMixture,
    z: f64,
}

impl MixedIntensity {
    fn value(&self, x: f64) -> Result<f64> {
        Ok(self.mixture.eta0() * self.even.intensity(x, self.z)?
            + self.mixture.eta_pi() * self.odd.intensity(x, self.z)?)
    }

    fn slope(&self, x: f64) -> Result<f64> {
        let (a, da) = self.even.amplitude_and_derivative(x, self.z)?;
        let (b, db) = self.odd.amplitude_and_derivative(x, self.z)?;
        Ok(2.0 * (self.mixture.eta0() * (a.conj() * da).re + self.mixture.eta_pi() * (b.conj() * db).re))
    }

    fn bisect(&self, mut lo: f64, mut hi: f64) -> Result<f64> {
        let rising = self.slope(lo)? > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.slope(mid)? > 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Zero-order maximum and first-order minima of the closed-form mixed
/// intensity at plane `z`, searched within `half_width_periods` fringe periods.
pub fn visibility_theoretical(
    mixture: EraserMixture,
    z: f64,
    config: &ApparatusConfig,
    half_width_periods: f64,
) -> Result<Visibility> {
    let (even, odd) = fields(config)?;
    let intensity = MixedIntensity { even, odd, mixture, z };
    let period = config.fringe_period(z);
    let reach = half_width_periods * period;
    if !(reach > 0.0) {
        return Err(Error::Config("search window must be positive".into()));
    }
    let step = period / 64.0;
    // critical points on x >= 0; the pattern is even so x = 0 is one of them
    let mut critical: Vec<(f64, bool)> = Vec::new();
    let eps = step * 1e-6;
    critical.push((0.0, intensity.slope(eps)? < 0.0));
    let mut x = eps;
    let mut s = intensity.slope(x)?;
    while x < reach {
        let next = (x + step).min(reach);
        let s_next = intensity.slope(next)?;
        if s != 0.0 && s_next != 0.0 && (s > 0.0) != (s_next > 0.0) {
            let root = intensity.bisect(x, next)?;
            critical.push((root, s > 0.0));
        }
        x = next;
        s = s_next;
    }
    let mut all: Vec<Extremum> = Vec::new();
    let mut kinds: Vec<bool> = Vec::new();
    for &(x, is_max) in critical.iter().rev().filter(|c| c.0 > 0.0) {
        all.push(Extremum { x: -x, intensity: intensity.value(x)? });
        kinds.push(is_max);
    }
    for &(x, is_max) in &critical {
        all.push(Extremum { x, intensity: intensity.value(x)? });
        kinds.push(is_max);
    }
    let centre = (0..all.len())
        .filter(|&k| kinds[k])
        .max_by(|&a, &b| {
            all[a]
                .intensity
                .total_cmp(&all[b].intensity)
                .then(all[b].x.abs().total_cmp(&all[a].x.abs()))
        })
        .ok_or_else(|| Error::Extrema("no intensity maximum in the search window".into()))?;
    let left = (0..centre).rev().find(|&k| !kinds[k]);
    let right = (centre + 1..all.len()).find(|&k| !kinds[k]);
    let minima = match (left, right) {
        (Some(l), Some(r)) => Some([all[l], all[r]]),
        _ => None,
    };
    Ok(Visibility::from_extrema(all[centre], minima))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn far_config() -> ApparatusConfig {
        ApparatusConfig::reference().with_planes(vec![1.445, 50.0]).unwrap()
    }

    #[test]
    fn full_contrast_without_eraser_mixing() {
        let c = far_config();
        let xs = fringe_grid(&c, 50.0, 2.0, 4001).unwrap();
        let p = pattern(50.0, EraserMixture::new(1.0).unwrap(), &c, &xs).unwrap();
        let v = visibility_extrema(&p).unwrap();
        // the envelope keeps the first minima slightly above zero
        assert!(v.value > 0.99 && v.value < 1.0, "{v:?}");
        assert!(v.confident);
        // central maximum
        assert!(v.maximum.x.abs() < 1e-9);
    }

    #[test]
    fn balanced_mixture_has_no_fringes() {
        let c = far_config();
        let xs = fringe_grid(&c, 50.0, 2.0, 4001).unwrap();
        let p = pattern(50.0, EraserMixture::balanced(), &c, &xs).unwrap();
        let v = visibility_extrema(&p).unwrap();
        assert!(v.value.abs() < 1e-3);
        assert!(!v.confident);
        let t = visibility_theoretical(EraserMixture::balanced(), 50.0, &c, 2.0).unwrap();
        assert!(t.value.abs() < 1e-3);
    }

    #[test]
    fn pattern_is_even_and_nonnegative() {
        let c = ApparatusConfig::reference();
        let xs = fringe_grid(&c, 8.612, 2.0, 801).unwrap();
        let p = pattern(8.612, EraserMixture::new(0.75).unwrap(), &c, &xs).unwrap();
        let y = p.intensity();
        for k in 0..y.len() {
            assert!(y[k] >= 0.0);
            assert!((y[k] - y[y.len() - 1 - k]).abs() <= 1e-12 * y[k].max(1e-300));
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let c = ApparatusConfig::reference();
        let xs = fringe_grid(&c, 8.612, 2.0, 11).unwrap();
        assert!(matches!(
            pattern(8.612, EraserMixture::balanced(), &c, &xs),
            Err(Error::Aliasing(_))
        ));
    }

    #[test]
    fn edge_maximum_is_an_extrema_error() {
        let c = ApparatusConfig::reference();
        // window far off-axis on the falling side: maximum sits on the edge
        let xs: Vec<f64> = (0..200).map(|k| 5e-3 + k as f64 * 1e-5).collect();
        let p = pattern(8.612, EraserMixture::balanced(), &c, &xs).unwrap();
        assert!(matches!(visibility_extrema(&p), Err(Error::Extrema(_))));
    }

    #[test]
    fn estimators_agree_on_fine_grid() {
        let c = ApparatusConfig::reference();
        for eta0 in [0.6, 0.75, 0.9, 1.0] {
            let m = EraserMixture::new(eta0).unwrap();
            let xs = fringe_grid(&c, 8.612, 2.0, 8001).unwrap();
            let e = visibility_extrema(&pattern(8.612, m, &c, &xs).unwrap()).unwrap();
            let t = visibility_theoretical(m, 8.612, &c, 2.0).unwrap();
            assert!((e.value - t.value).abs() < 1e-6, "{eta0}: {} vs {}", e.value, t.value);
        }
    }

    #[test]
    fn parabola_vertex_recovers_offset_peak() {
        let xs: Vec<f64> = (0..5).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - (x - 0.23) * (x - 0.23)).collect();
        let v = parabolic_vertex(&xs, &ys, 2);
        assert!((v.x - 0.23).abs() < 1e-12);
        assert!((v.intensity - 2.0).abs() < 1e-12);
    }
}
