//! Fixed-step simulation of target, leaders, followers and estimators.

pub mod leader;
pub mod run;
pub mod trace;
pub mod uncertainty;
pub mod world;

pub use leader::{leader_generator_circular, Kinematics, LeaderGenerator, TargetMotion};
pub use run::{certify, check_pe, run, sweep_desired, Certificates, PeCheck, PeParams, RunConfig, RunOutput, Summary};
pub use trace::{Trace, TRACE_VERSION_LINE};
pub use uncertainty::UncertaintyModel;
pub use world::{collision_monitor, Feed, Integrator, Sensing, Simulation, SimulationSpec, WorldState};
