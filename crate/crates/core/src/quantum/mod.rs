//! The simulated quantum system: states, unitary dynamics, measurement
//! operators with Born-rule semantics, normalized observables and noise.

mod dynamics;
mod measurement;
mod noise;
pub mod presets;
mod state;

pub use dynamics::{evolve, haar_random_unitary, Dynamics, SystemSpec, SUPPLIED_UNITARY_TOL};
pub use measurement::{
    completeness_defect, normalized_operator, outcome_probability, post_measurement_state,
    sample_outcome, stacked_observable, FusionMode, MeasurementModel, MeasurementOperator,
    COMPLETENESS_TOL,
};
pub use noise::{
    inject_state_noise, observe, standard_complex_normal, GaussianNoise, NoiseSpec,
    ProcessNoiseMode,
};
pub use presets::{kron_presets, preset, PRESET_NAMES};
pub use state::{StateVector, NORMALIZATION_TOL};
