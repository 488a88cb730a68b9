//! Error type shared by the whole engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid field profile or geometry data.
    #[error("field error: {0}")]
    Field(String),

    /// The truncated Biot-Savart window leaves a tail above tolerance.
    #[error("integration window too small: tail bound {bound:.3e} exceeds tolerance {tol:.3e}")]
    TailBound { bound: f64, tol: f64 },

    /// Requested point lies outside tabulated data.
    #[error("z = {z} outside tabulated range [{min}, {max}]")]
    OutOfRange { z: f64, min: f64, max: f64 },

    /// Envelope solution touched the collapse threshold 1/b^3 cannot be stepped through.
    #[error("envelope collapse: b = {b:.3e} at z = {z:.6} (threshold {threshold:.1e})")]
    EnvelopeCollapse { z: f64, b: f64, threshold: f64 },

    /// Adaptive step size fell below the representable floor.
    #[error("step size underflow at z = {z:.6} (h = {h:.3e})")]
    StepUnderflow { z: f64, h: f64 },

    /// Quadrature did not converge between successive orders.
    #[error("quadrature non-convergence: estimate changed by {delta:.3e} (tolerance {tol:.3e})")]
    QuadratureNonConvergence { delta: f64, tol: f64 },

    /// Grids of two states do not match.
    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    /// Angular grid too coarse for the requested OAM content.
    #[error("angular grid too coarse: {n_phi} samples < 4*|l|_max = {required}")]
    Nyquist { n_phi: usize, required: usize },

    /// Requested z not covered by the envelope solution.
    #[error("z = {z} outside solved envelope span [{min}, {max}]")]
    EnvelopeRange { z: f64, min: f64, max: f64 },

    /// Oracle boundary monitor tripped.
    #[error("oracle boundary leak: amplitude {amp:.3e} at rho_max (limit {limit:.1e}), z = {z:.4}")]
    BoundaryLeak { amp: f64, limit: f64, z: f64 },

    /// A grid did not resolve the state well enough for observables.
    #[error("unresolved grid: {0}")]
    UnresolvedGrid(String),

    /// Spectrum/convention mismatch in the propagation path.
    #[error("convention error: {0}")]
    Convention(String),

    /// Configuration error (bad JSON, schema violation, inconsistent parameters).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
