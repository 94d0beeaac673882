//! A numerical laboratory for the stationary and parabolic N-pack
//! predator / single-prey reaction-diffusion system with Neumann boundary
//! conditions.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: parameters, pointwise reaction terms and closed-form constant states.
//! * [`stability`]: linearization at the coexistence constant and its spectrum.
//! * [`grid`]: cell-centered Neumann grids on intervals and rectangles.
//! * [`dynamics`]: IMEX time marching, Newton steady states and diagnostics.
//! * [`sweep`]: classification of the (β, N) plane.
//! * [`covering`]: the ball-covering multiplicity bound and Jung's radius.
//! * [`config`], [`io`], [`cli`]: experiment configuration, artifacts and dispatch.

pub mod cli;
pub mod config;
pub mod covering;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod seed;
pub mod stability;
pub mod sweep;

// links the system OpenBLAS used by the LAPACK eigensolver
use openblas_src as _;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use model::{ConstantState, ModelParams, ReducedState};
