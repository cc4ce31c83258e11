//! Harmonic (phasor-domain) modeling of linear time-periodic systems and
//! periodic pole placement through truncated harmonic Sylvester equations.
//!
//! The numerics are generic over the real scalar `T: Real` (`f32` or `f64`);
//! the aliases below fix `T = f64`.

pub mod case_study;
pub mod control;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod ode;
pub mod operators;
pub mod scalar;
pub mod serial;
pub mod signals;
pub mod sim;
pub mod sylvester;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PeriodicMatrix = signals::PeriodicMatrixFunction<f64>;
pub type PeriodicMatrix32 = signals::PeriodicMatrixFunction<f32>;
pub type BlockToeplitz = operators::TruncatedBlockToeplitz<f64>;
pub type Trajectory = signals::PhasorTrajectory<f64>;
pub type GainSchedule = control::GainSchedule<f64>;
pub type FloquetFactorization = floquet::FloquetFactorization<f64>;
pub type SylvesterSolution = sylvester::HarmonicSylvesterSolution<f64>;
pub type Simulation = sim::SimulationResult<f64>;
