//! Simulation core for perception-aware foothold planning on sparse terrain.

pub mod config;
pub mod edt;
pub mod geom;
pub mod grid;
pub mod harness;
pub mod io;
pub mod localmap;
pub mod reconstructor;
pub mod schedule;
pub mod seed;
pub mod sensor;
pub mod terrain;
