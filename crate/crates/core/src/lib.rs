//! Epidemic outcomes on a college campus under two intervention families:
//! dorm-room occupancy (household-model generating functions) and moving
//! large classes online (next-generation matrix spectral radii), with a
//! stochastic class-meeting simulator for Monte-Carlo checks.

pub mod classes;
pub mod cli;
pub mod dorm;
pub mod pgf;
pub mod sim;
