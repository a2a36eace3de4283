//! Intrusive generalized polynomial chaos for ODEs with one scalar uncertain
//! parameter or initial condition.
//!
//! The pieces:
//!
//! * [`basis`]: orthonormal Hermite/Legendre families and Gauss rules;
//! * [`galerkin`]: polynomial vector fields and their Galerkin projection;
//! * [`models`]: the built-in oscillators;
//! * [`hamiltonian`]: average Hamiltonian and structure checks;
//! * [`integrate`]: Dormand-Prince, RK4, Störmer-Verlet and tangent flows;
//! * [`analysis`]: Poincaré sections, Lyapunov exponents, Monte Carlo;
//! * [`golden`]: bundled reference term lists and the comparison against them;
//! * [`harmonic`]: closed-form coefficients of the uncertain-frequency
//!   harmonic oscillator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basis;
pub mod field;
pub mod galerkin;
pub mod golden;
pub mod hamiltonian;
pub mod harmonic;
pub mod integrate;
pub mod models;
