//! Bohmian trajectories, measurement disturbance and weak-measurement
//! reconstruction for a two-slit photon interferometer with a which-way
//! marker.

pub mod apparatus;
pub mod config;
pub mod detector;
pub mod disturbance;
pub mod error;
pub mod fringe;
pub mod pipeline;
pub mod spline;
pub mod study;
pub mod trajectory;
pub mod wavefield;

pub use apparatus::ApparatusConfig;
pub use config::RunConfig;
pub use detector::{DetectorModel, DetectorSettings, Exposure, PlaneCounts};
pub use disturbance::{DisturbanceDistribution, EraserMixture, MomentumGrid, Pairing, PairingMode};
pub use error::{Error, Result};
pub use fringe::{FringePattern, Visibility};
pub use trajectory::{GriddedField, Scheme, SeedSet, TrajectoryEnsemble, VelocityField};
pub use wavefield::{MomentumSample, WaveField};
