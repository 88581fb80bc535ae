//! Energy-stable scalar-auxiliary-variable (SAV) Crank-Nicolson scheme for the
//! 2D incompressible Navier-Stokes equations on a staggered MAC grid.
//!
//! Layout: [`grid`] holds the mesh, the grid functions and the first
//! differences; [`fields`] the velocity/pressure containers, inner products
//! and composite stencils; [`stokes`] the factorized saddle-point solver;
//! [`sav`] the time stepper; [`mms`] the manufactured solutions and error
//! norms.

pub mod error;
pub mod fields;
pub mod grid;
pub mod mms;
pub mod sav;
pub mod stokes;

pub use error::{Error, Result};
pub use fields::{CenterField, ErrorNorms, VelocityField};
pub use grid::{GridFunction, GridLocation, StaggeredGrid};
pub use sav::{SavParams, SavState, SavStepper, StepDiagnostics};
pub use stokes::{StokesOperator, StokesSolution};
