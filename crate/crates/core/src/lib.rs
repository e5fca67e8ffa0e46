//! Banach `L0`-modules over finite atomic measure spaces.
//!
//! Modules are families of finite-dimensional normed fibers, one per atom;
//! morphisms are per-atom matrices of operator norm at most one. On top of
//! that the crate builds every finite limit and colimit, the hom and inverse
//! image functors, and randomized audits of their universal properties.

pub mod error;
pub mod linalg;
pub mod measure;
pub mod normcalc;

pub use error::{Error, Result};
pub mod modcat;
pub mod limits;
pub mod colimits;
pub mod functors;
pub mod audit;
