//! Design of heterogeneous-lens photonic nanojets.
//!
//! The crate solves the 2D scalar Helmholtz scattering problem for a circular
//! lens with a spatially varying refractive index, evaluates a pointwise
//! nanojet objective, and optimizes the index profile with adjoint gradients
//! and L-BFGS, either deterministically or as a sample-average mean-variance
//! problem over Matérn-distributed manufacturing errors.

pub mod adjoint;
pub mod config;
pub mod error;
pub mod helmholtz;
pub mod io;
pub mod mesh;
pub mod objective;
pub mod optimizer;
pub mod random_field;
pub mod runner;
pub mod sparse;
pub mod uq;

pub use error::{Error, Result};
pub use helmholtz::{
    ComplexField, DesignField, Discretization, NoiseRealization, PmlConfig, WaveConfig,
    WavenumberField, C64,
};
pub use mesh::{DomainSpec, Location, Mesh, Point, Subdomain};
