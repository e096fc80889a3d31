use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The wavefunction vanishes at the requested point, so the phase gradient
    /// is undefined there.
    #[error("field node at x = {x:e} m, z = {z} m")]
    Node { x: f64, z: f64 },

    #[error("trajectory {seed} hit a field node before plane {plane}")]
    NodeSkip { seed: usize, plane: usize },

    #[error("ensembles cannot be paired: {0}")]
    Pairing(String),

    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("under-resolved grid: {0}")]
    Aliasing(String),

    #[error("fringe extrema not found: {0}")]
    Extrema(String),

    #[error("detector model: {0}")]
    Detector(String),

    #[error("pixel {pixel} has no counts")]
    EmptyPixel { pixel: usize },

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}
