//! System definitions, state-space forms, measurement and degradation models.

mod degradation;
mod measurement;
mod state_space;
mod system;

pub use degradation::{degraded_stiffness, DegradationSchedule, DEFAULT_DECAY_RATE};
pub use measurement::{acceleration_model, AccelerationModel};
pub use state_space::{to_state_space, StateLabel, StateSpaceModel};
pub use system::{
    build_duffing_2dof, build_dvp_7dof, LinkSigns, MdofSystem, NoiseScaling, Nonlinearity,
    SevenDofParams, StateLayout, SystemDocument, TwoDofParams,
};
