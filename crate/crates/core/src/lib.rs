//! twistbeam: propagation of arbitrary paraxial twisted charged-particle
//! states through axisymmetric magnetic optics.
//!
//! The engine is organized around the closed-form three-component solution of
//! the paraxial transverse dynamics, parametrized entirely by classical
//! Twiss functions and phase advance:
//!
//! * [`fields`] builds and normalizes on-axis field profiles (Glaser bell,
//!   tabulated data, Biot-Savart synthesis from winding geometry) into the
//!   dimensionless Omega(z) sampler everything else consumes;
//! * [`envelope`] solves the Ermakov-Pinney equation for the envelope b(z)
//!   and accumulates phase advance, Larmor angle and the per-component
//!   rotation angles;
//! * [`lgbasis`] evaluates the orthonormal Laguerre-Gaussian eigenbasis;
//! * [`decomposition`] expands initial states over that basis, with the
//!   fully analytic coefficients for the half-blocked twisted state;
//! * [`propagation`] synthesizes the propagated state (reference evolution,
//!   Ermakov rescale-and-chirp, component rotations) and its observables;
//! * [`oracle`] independently integrates the governing PDE by angular
//!   harmonics + radial Crank-Nicolson, as ground truth for everything above.

pub mod decomposition;
pub mod envelope;
pub mod error;
pub mod fields;
pub mod grid;
pub mod lgbasis;
pub mod oracle;
pub mod propagation;
pub mod quad;

pub use decomposition::{
    arc_coefficients, decompose, generalized_binomial, map_initial, overlap_quadrature,
    InitialState, ModeSpectrum, QuadSpec, StateKind, Truncation,
};
pub use envelope::{ep_invariant, rotation_angles, solve_ermakov, EnvelopeSolution, StepControl};
pub use error::{Error, Result};
pub use fields::{
    biot_savart_onaxis, glaser_field, BiotSavartSpec, FieldProfile, NormalizedField,
    OmegaProfile, SolenoidGeometry,
};
pub use grid::StateGrid;
pub use lgbasis::{basis_eval, laguerre, BasisConvention, ModeIndex};
pub use oracle::{l2_distance, oracle_propagate, OracleConfig, OracleStep};
pub use propagation::{
    component_split, observables, reference_evolve, synthesize, GridSpec, Observables,
    PropagationResult,
};
