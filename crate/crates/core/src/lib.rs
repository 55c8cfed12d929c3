//! Density cluster tree estimation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod cli;
pub mod cluster_tree;
pub mod dbscan;
pub mod dendrogram;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod grid;
pub mod kde;
pub mod levelset;
pub mod quadrature;
pub mod synthetic;

pub use error::{Error, Result};
