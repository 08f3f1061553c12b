//! Vectorized decision-forest inference on a simulated packed-ciphertext
//! SIMD machine.
//!
//! The pipeline: parse a `.forest` model ([`forest`]), stage it into packed
//! artifacts ([`staging`], saved as a `.copse` manifest by [`manifest`]),
//! then evaluate encrypted queries with the [`runtime`] on the [`vm`], which
//! counts every homomorphic operation and tracks multiplicative depth.
//! [`cost`] compares those counts with closed-form predictions and
//! [`baseline`] evaluates the same forest as per-tree path polynomials.

pub mod baseline;
pub mod bits;
pub mod cli;
pub mod cost;
pub mod forest;
pub mod kernels;
pub mod manifest;
pub mod runtime;
pub mod staging;
pub mod synth;
pub mod vm;
