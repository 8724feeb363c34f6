//! Pseudospectral simulation of the two-dimensional generalized
//! Benjamin-Bona-Mahony (GBBM) and BBM-Burgers equations
//!
//! ```text
//! u_t + div phi(u) = nu1 Delta u + Delta u_t      in [0, L1) x (0, L2)
//! u = g  at t = 0,    u = h(x1, t)  at x2 = 0
//! ```
//!
//! on a strip that is periodic in `x1` and truncated at `x2 = L2`, together
//! with a harness that checks the a priori energy estimates and continuous
//! dependence on the data.
//!
//! The solver works with the lifted unknown `v = u - h(x1, t) e^{-x2}`, which
//! vanishes on the walls, and the modified Helmholtz inverse `(I - Delta)^{-1}`
//! that is exact in a Fourier x sine tensor basis.
//!
//! Module map:
//! - [`grid`]: discretization, transforms, spectral derivatives, Sobolev norms
//! - [`helmholtz`]: the `(I - Delta)^{-1}` solver
//! - [`problem`]: fluxes, boundary signals, lifting, right-hand sides
//! - [`evolve`]: Picard windows, RK4 method of lines, run driver
//! - [`verify`]: energy identities, Gronwall envelopes, data dependence
//! - [`config`], [`output`], [`commands`]: run configuration, file formats and
//!   the subcommands behind the `gbbm` binary
// NaN must fail range checks, so `!(x > 0.0)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod helmholtz;
pub mod output;
pub mod problem;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, SpectralCoeffs};
pub use helmholtz::HelmholtzSolver;
