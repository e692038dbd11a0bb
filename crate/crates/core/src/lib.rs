//! Rough paths, regularity structures and the reconstruction operator on
//! dyadic time grids.
//!
//! Everything here works on a [`grid_paths::TimeGrid`] with `2^J + 1` nodes.
//! The crate is `no_std` (it needs `alloc`); enable the `parallel` feature to
//! spread coefficient extraction and defect scans over a rayon pool.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod error;
pub mod grid_paths;
pub mod integration;
pub mod modelled_distributions;
pub mod rde_solver;
pub mod reconstruction;
pub mod regularity_structure;
pub mod rough_core;
pub mod wavelets;

mod linalg;
mod par;

pub use error::{Error, Result};
