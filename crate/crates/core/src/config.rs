//! Run configuration: one TOML file with flat named blocks, validated in full
//! before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apparatus::{uniform_planes, ApparatusConfig, FIRST_PLANE, LAST_PLANE, PLANE_COUNT};
use crate::detector::{DetectorSettings, DEFAULT_COUPLING};
use crate::disturbance::{PairingMode, DEFAULT_GRID_SPACING, DEFAULT_KERNEL_SIGMA};
use crate::error::{Error, Result};
use crate::study::{visibility_steps, KernelSettings};
use crate::trajectory::Scheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApparatusBlock {
    pub slit_separation_mm: f64,
    pub packet_waist_mm: f64,
    pub wavelength_nm: f64,
    pub first_plane_m: f64,
    pub last_plane_m: f64,
    pub plane_count: usize,
    /// Explicit plane list [m]; replaces the uniform one when non-empty.
    pub planes_m: Vec<f64>,
    /// Far plane of the extended-distance runs [m].
    pub extended_z_m: f64,
}

impl Default for ApparatusBlock {
    fn default() -> Self {
        ApparatusBlock {
            slit_separation_mm: 3.0,
            packet_waist_mm: 0.6,
            wavelength_nm: 808.0,
            first_plane_m: FIRST_PLANE,
            last_plane_m: LAST_PLANE,
            plane_count: PLANE_COUNT,
            planes_m: Vec::new(),
            extended_z_m: 50.0,
        }
    }
}

impl ApparatusBlock {
    pub fn planes(&self) -> Vec<f64> {
        if self.planes_m.is_empty() {
            uniform_planes(self.first_plane_m, self.last_plane_m, self.plane_count)
        } else {
            self.planes_m.clone()
        }
    }

    pub fn apparatus(&self) -> Result<ApparatusConfig> {
        if self.planes_m.is_empty() && self.plane_count < 2 {
            return Err(Error::Config("apparatus.plane_count must be at least 2".into()));
        }
        ApparatusConfig::new(
            self.slit_separation_mm * 1e-3,
            self.packet_waist_mm * 1e-3,
            self.wavelength_nm * 1e-9,
            self.planes(),
        )
    }

    /// Same apparatus with the same plane count stretched out to
    /// `extended_z_m`.
    pub fn extended(&self) -> Result<ApparatusConfig> {
        let base = self.apparatus()?;
        let first = base.planes()[0];
        if !(self.extended_z_m > *base.planes().last().expect("validated")) {
            return Err(Error::Config(format!(
                "apparatus.extended_z_m = {} must lie beyond the last plane",
                self.extended_z_m
            )));
        }
        base.with_planes(uniform_planes(first, self.extended_z_m, base.planes().len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    PaperEuler,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryBlock {
    pub n_per_slit: usize,
    pub scheme: SchemeName,
    /// RK4 substeps per plane interval for the refined scheme.
    pub substeps: u32,
}

impl Default for TrajectoryBlock {
    fn default() -> Self {
        TrajectoryBlock {
            n_per_slit: 99,
            scheme: SchemeName::PaperEuler,
            substeps: 8,
        }
    }
}

impl TrajectoryBlock {
    pub fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeName::PaperEuler => Scheme::PaperEuler,
            SchemeName::Refined => Scheme::Refined(self.substeps),
        }
    }

    pub fn refined(&self) -> Scheme {
        Scheme::Refined(self.substeps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceBlock {
    pub kernel_sigma: f64,
    pub grid_spacing: f64,
    pub pairing: PairingMode,
    /// Peaks at least this fraction of the largest prominence count as dominant.
    pub dominant_fraction: f64,
    /// eta0 of the mixture reported per plane.
    pub eta0: f64,
}

impl Default for DisturbanceBlock {
    fn default() -> Self {
        DisturbanceBlock {
            kernel_sigma: DEFAULT_KERNEL_SIGMA,
            grid_spacing: DEFAULT_GRID_SPACING,
            pairing: PairingMode::PairedTrajectory,
            dominant_fraction: 0.5,
            eta0: 0.5,
        }
    }
}

impl DisturbanceBlock {
    pub fn kernel(&self) -> KernelSettings {
        KernelSettings {
            sigma: self.kernel_sigma,
            spacing: self.grid_spacing,
            pairing: self.pairing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FringeBlock {
    /// Half-width of the visibility window in far-field fringe periods.
    pub half_width_periods: f64,
    /// Samples per emitted pattern and per field profile.
    pub points: usize,
}

impl Default for FringeBlock {
    fn default() -> Self {
        FringeBlock {
            half_width_periods: 3.0,
            points: 1201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffBlock {
    pub visibilities: Vec<f64>,
}

impl Default for TradeoffBlock {
    fn default() -> Self {
        TradeoffBlock {
            visibilities: visibility_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorBlock {
    pub coupling: f64,
    pub pixel_pitch_um: f64,
    pub half_width_mm: f64,
    /// Expected counts at the brightest pixel of each plane.
    pub exposure: f64,
    pub seed: u64,
    pub noiseless: bool,
    /// Expected totals for the single-pixel error-scaling table.
    pub scaling_counts: Vec<f64>,
    pub scaling_repetitions: usize,
    pub scaling_velocity_ratio: f64,
}

impl Default for DetectorBlock {
    fn default() -> Self {
        DetectorBlock {
            coupling: DEFAULT_COUPLING,
            pixel_pitch_um: 13.0,
            half_width_mm: 6.0,
            exposure: 1e4,
            seed: 20_150_101,
            noiseless: false,
            scaling_counts: vec![1e2, 1e3, 1e4],
            scaling_repetitions: 500,
            scaling_velocity_ratio: 2.7e-4,
        }
    }
}

impl DetectorBlock {
    pub fn settings(&self) -> DetectorSettings {
        DetectorSettings {
            coupling: self.coupling,
            pixel_pitch: self.pixel_pitch_um * 1e-6,
            half_width: self.half_width_mm * 1e-3,
            exposure: self.exposure,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub apparatus: ApparatusBlock,
    pub trajectory: TrajectoryBlock,
    pub disturbance: DisturbanceBlock,
    pub fringe: FringeBlock,
    pub tradeoff: TradeoffBlock,
    pub detector: DetectorBlock,
    pub output: OutputBlock,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `block.key=value` overrides, then revalidates. Values are read
    /// as TOML; anything that does not parse is taken as a string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut tree = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (path, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{raw}` is not block.key=value")))?;
            let (block, key) = path
                .trim()
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("override key `{path}` is not block.key")))?;
            let value = value.trim();
            let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            let table = tree
                .get_mut(block)
                .and_then(|b| b.as_table_mut())
                .ok_or_else(|| Error::Config(format!("unknown config block `{block}`")))?;
            table.insert(key.to_string(), parsed);
        }
        let config: RunConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.apparatus;
        let apparatus = a.apparatus()?;
        a.extended()?;
        if apparatus.planes()[0] <= 0.0 {
            return Err(Error::Config("the first plane must lie beyond z = 0".into()));
        }
        let t = &self.trajectory;
        if t.n_per_slit < 2 {
            return Err(Error::Config("trajectory.n_per_slit must be at least 2".into()));
        }
        if t.substeps == 0 {
            return Err(Error::Config("trajectory.substeps must be at least 1".into()));
        }
        let d = &self.disturbance;
        positive("disturbance.kernel_sigma", d.kernel_sigma)?;
        positive("disturbance.grid_spacing", d.grid_spacing)?;
        if d.grid_spacing > d.kernel_sigma / 4.0 {
            return Err(Error::Config(format!(
                "disturbance.grid_spacing {} must resolve the kernel with at least 4 points per sigma",
                d.grid_spacing
            )));
        }
        if !(d.dominant_fraction > 0.0 && d.dominant_fraction <= 1.0) {
            return Err(Error::Config("disturbance.dominant_fraction must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&d.eta0) {
            return Err(Error::Config("disturbance.eta0 must lie in [0, 1]".into()));
        }
        positive("fringe.half_width_periods", self.fringe.half_width_periods)?;
        if self.fringe.points < 3 {
            return Err(Error::Config("fringe.points must be at least 3".into()));
        }
        if self.tradeoff.visibilities.is_empty() {
            return Err(Error::Config("tradeoff.visibilities is empty".into()));
        }
        if let Some(v) = self.tradeoff.visibilities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("visibility {v} outside [0, 1]")));
        }
        let det = &self.detector;
        det.settings().validate()?;
        if det.scaling_repetitions < 2 {
            return Err(Error::Config("detector.scaling_repetitions must be at least 2".into()));
        }
        for &c in &det.scaling_counts {
            positive("detector.scaling_counts entry", c)?;
        }
        if !det.scaling_velocity_ratio.is_finite()
            || det.coupling * det.scaling_velocity_ratio.abs() >= std::f64::consts::FRAC_PI_2
        {
            return Err(Error::Config("detector.scaling_velocity_ratio leaves the arcsine branch".into()));
        }
        Ok(())
    }

    /// SHA-256 over every block except `output`, so the destination and the
    /// file format do not change the hash.
    pub fn hash(&self) -> String {
        let hashed = (
            &self.apparatus,
            &self.trajectory,
            &self.disturbance,
            &self.fringe,
            &self.tradeoff,
            &self.detector,
        );
        let canonical = serde_json::to_string(&hashed).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_apparatus() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.apparatus.apparatus().unwrap(), ApparatusConfig::reference());
        let ext = c.apparatus.extended().unwrap();
        assert_eq!(ext.planes().len(), 117);
        assert_eq!(*ext.planes().last().unwrap(), 50.0);
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[apparatus]\nslit_sep_mm = 3.0\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\nx = 1\n").is_err());
        assert!(RunConfig::default().with_overrides(&["detector.gain=2"]).is_err());
        assert!(RunConfig::default().with_overrides(&["nowhere.x=2"]).is_err());
    }

    #[test]
    fn overrides_parse_as_toml() {
        let c = RunConfig::default()
            .with_overrides(&[
                "trajectory.scheme=refined",
                "trajectory.substeps = 4",
                "apparatus.planes_m=[1.445, 2.0, 3.0]",
                "output.format=json",
            ])
            .unwrap();
        assert_eq!(c.trajectory.scheme(), Scheme::Refined(4));
        assert_eq!(c.apparatus.planes(), vec![1.445, 2.0, 3.0]);
        assert_eq!(c.output.format, Format::Json);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "apparatus.packet_waist_mm=-1",
            "apparatus.planes_m=[2.0, 1.0]",
            "apparatus.extended_z_m=5",
            "trajectory.n_per_slit=1",
            "disturbance.grid_spacing=0.1",
            "tradeoff.visibilities=[1.5]",
            "detector.coupling=0",
            "detector.scaling_velocity_ratio=1.0",
        ] {
            assert!(RunConfig::default().with_overrides(&[bad]).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_output_block() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.directory = PathBuf::from("elsewhere");
        b.output.format = Format::Json;
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.detector.seed += 1;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
