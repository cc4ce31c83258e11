//! Periodic matrix functions, their phasors, and sliding Fourier analysis.

mod periodic;
mod sliding;
mod waveform;

pub use periodic::{
    min_resolution, waveform_sawtooth, waveform_square, waveform_triangle, waveform_trig_polynomial,
    PeriodicMatrixFunction,
};
pub use sliding::{sliding_fourier, PhasorTrajectory, Reconstruction};
pub use waveform::{PlacedTerm, Side, SignalSpec, Term, TermSpec, WaveformMatrix};
