//! Core library for a hierarchical agent orchestrator driving
//! quantum-chemistry calculations.

pub mod agent;
pub mod clock;
pub mod config;
pub mod energy;
pub mod exec;
pub mod geometry;
pub mod memory;
pub mod orca;
pub mod reasoning;
pub mod reference;
pub mod recovery;
pub mod thermo;
pub mod tools;
pub mod trace;
pub mod util;
