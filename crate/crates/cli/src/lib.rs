//! Configuration-driven front end for the cubic Szegő lab.
//!
//! A run reads one TOML file, validates it completely, computes, and writes
//! `series.csv`, `states.json` and `summary.json` into the output directory.

pub mod config;
pub mod experiments;
pub mod output;
pub mod registry;
pub mod verify;
