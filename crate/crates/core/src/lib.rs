//! Finite-element laboratory for the perfect conductivity problem with two
//! nearly touching inclusions.
//!
//! The crate is organised bottom-up: [`geometry`] describes the inclusions,
//! [`mesh`] triangulates the matrix region with a structured gap strip,
//! [`assembly`] provides P1 stiffness, a preconditioned conjugate gradient
//! solver and residual fluxes, [`solvers`] drives the finite-k, constrained
//! and cell-decomposition problems, [`functionals`] computes the scalar
//! observables and [`harness`] runs ε-sweeps and rate fits. [`cli`] holds the
//! text configuration format and the experiment registry used by the
//! `gapcond` binary.

pub mod assembly;
pub mod cli;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod solvers;

pub use geometry::{BoundaryData, Configuration, InclusionBody, OuterDomain, Shape};
pub use mesh::{generate_mesh, Mesh, MeshParams};
