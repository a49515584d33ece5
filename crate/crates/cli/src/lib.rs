//! Experiment harness around the `genpgd` solvers: planted instances,
//! configuration, sweeps, and CSV/PGM output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;
