//! Numerical laboratory for a coupled wave/Klein-Gordon model on the
//! hyperboloidal foliation of the interior of a light cone.
//!
//! The crate evolves the system
//!
//! ```text
//!   -box u = P^{ab} d_a v d_b v + R v^2
//!   -box v + u H^{ab} d_a d_b v + c^2 v = 0
//! ```
//!
//! from compactly supported data at t = 2 and measures, on hyperboloids
//! H_s = { t^2 - |x|^2 = s^2 }, the energies, sup-norm bounds, commutator
//! identities and decay rates that the underlying stability analysis
//! predicts at finite horizons.
//!
//! Module map:
//! - [`geometry`]: coordinates, cone membership, frames and metrics;
//! - [`fields`]: grids, slices, evolution histories, hyperboloid sampling;
//! - [`calculus`]: discrete vector-field operators and commutator tables;
//! - [`norms`]: hyperboloid integrals, energy functionals, inequality checks;
//! - [`wave_kernel`]: retarded integral and the wave sup-norm bound;
//! - [`kg_ode`]: ray reduction of the Klein-Gordon equation and its ODE bound;
//! - [`solver`]: leapfrog evolution of the coupled system;
//! - [`harness`]: decay fits, bootstrap monitor, suite orchestration.

pub mod calculus;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod kg_ode;
pub mod norms;
pub mod quad;
pub mod solver;
pub mod suites;
pub mod wave_kernel;
