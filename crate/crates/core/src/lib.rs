//! One-dimensional quasicontinuum laboratory.
//!
//! A second-neighbour pair-potential chain is coupled to a Cauchy-Born
//! continuum by the force-based rule (QCF). Equilibria are computed by a
//! fixed-point iteration preconditioned with the energy-based rule (QCE),
//! which contracts inside explicitly certified spacing windows. Load
//! continuation plans keep every step inside such a window.
//!
//! - [`potential`]: pair potentials, landmarks, load limit
//! - [`chain`]: the fully atomistic reference chain
//! - [`mesh`], [`qc`]: coarse meshes, QCE/QCF forces and conjugate stresses
//! - [`solver`]: the preconditioned iteration, windows, fracture detection
//! - [`continuation`]: growth and radius profiles, planners, plan execution
//! - [`experiment`]: configuration and the commands behind `qclab`

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod chain;
pub mod continuation;
pub mod experiment;
pub mod mesh;
mod newton;
pub mod potential;
pub mod qc;
pub mod roots;
pub mod solver;
