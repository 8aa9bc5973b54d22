//! Simulator and closed-form analytics for two self-contained quantum heat
//! engines: two qubits driving a weight ladder, and a single qutrit doing the
//! same.
//!
//! Units: ħ = 1; the Boltzmann constant defaults to 1.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod model;
pub mod params;
pub mod reduced;
pub mod state;
pub mod thermo;

pub use error::{Error, Result};
pub use model::{build_model, build_qutrit, build_two_qubit, thermal_product_state, ModelKind, ModelOperators};
pub use params::{
    EngineParams, LadderWindow, PhysicalConstants, QutritEngineParams, TwoQubitEngineParams,
};
pub use state::DensityMatrix;
