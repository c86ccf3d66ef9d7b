//! Non-unitary, non-cyclic geometric phases of deformed-oscillator states.
//!
//! Three state families are supported: two inequivalent coherent states of
//! a nonlinear oscillator (the deformation `f(N)` enters once in the
//! denominator, once in the numerator of the Fock expansion) and the
//! matching squeezed vacuum. For each family the total phase, dynamical
//! phase and geometric phase are evaluated from closed-form series over
//! level weights, and every closed form can be cross-checked against a
//! truncated Fock-space operator path: ladder matrices, matrix-exponential
//! state construction and quadrature of the reference-section connection.
//!
//! Modules:
//! - [`laguerre`]: generalized Laguerre recurrence, the Lamb-Dicke
//!   nonlinearity `f(n)` and log-domain running products `f(n)!`.
//! - [`states`]: truncated coefficient vectors with adaptive tail-based
//!   truncation.
//! - [`phases`]: weights, total/dynamical/geometric phase, cyclic values
//!   and the infinite-squeezing limit.
//! - [`fock_oracle`]: dense-matrix cross-check path.
//! - [`sweep`]: parameter sweeps and the four bundled figure presets, with
//!   deterministic CSV/JSON output.
//! - [`verify`]: the runnable self-check suite behind `geomphase verify`.

pub mod error;
pub mod fock_oracle;
pub mod laguerre;
pub mod phases;
pub mod states;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use laguerre::{laguerre, LogProduct, ModelKind, NonlinearModel};
pub use phases::{
    cyclic_phase, geometric_phase, geometric_phase_path, mean_level, squeezed_limit_phase,
    total_phase, PhaseDecomposition, WeightTable,
};
pub use states::{Family, FockVector, StateSpec, TruncationConfig};
