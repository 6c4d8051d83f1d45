//! Field synthesis that makes one dynamical system reproduce the dipole
//! response of another.
//!
//! A target dipole `Y(t)` is produced by a model atom under a drive pulse
//! ([`scenario::generate_target`]). For another system, [`tracking::track`]
//! builds the driving field one step at a time so that `<x>(t)` follows
//! `Y(t)`. The systems are a pure state ([`propagate::ClosedQuantum`]), a
//! Caldeira-Leggett density matrix ([`propagate::OpenQuantum`]), a Newton
//! trajectory ensemble ([`propagate::NewtonEnsemble`]) and a Fokker-Planck
//! phase-space density ([`propagate::FokkerPlanck`]).

pub mod eigen;
pub mod error;
pub mod grid;
pub mod io;
pub mod noise;
pub mod potential;
pub mod propagate;
pub mod scenario;
pub mod signal;
pub mod state;
pub mod tracking;

pub use error::{Error, Result};
