//! Dispersing billiards with a cusp at a flat point.
//!
//! The table has one cusp at the origin bounded by the two walls
//! `z = ±sᵝ/β`, closed up by circular join arcs and a circular wall centred
//! on the cusp axis. On top of the exact collision map this crate provides
//! corner-series analysis, the induced map on the set `M` of states that do
//! not start a long cusp run, and Monte Carlo estimators for the tail and
//! correlation laws.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and worker
//! pools live in the companion `flatcusp` crate.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod corner;
pub mod dynamics;
pub mod geometry;
pub mod induced;
pub mod math;
pub mod quad;
pub mod stats;
pub mod xprec;

pub use corner::{run_corner_series, CornerConfig, CornerSeriesRecord, SeriesMode};
pub use dynamics::{billiard_map, collide, inverse_map, map_differential, PhasePoint};
pub use geometry::{build_table, Table, TableConfig};
pub use induced::{return_map, InducedConfig, ReturnSample};
