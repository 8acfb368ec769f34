//! Radial Lane–Emden problems on rotationally symmetric model manifolds.
//!
//! The crate integrates `−u″ − (n−1)(ψ′/ψ)u′ = |u|^{q−1}u` from the pole, evaluates the
//! Pohozaev function along solutions, checks weighted Sobolev embeddings, and builds explicit
//! supersolutions and glued manifolds that carry global positive solutions.

pub mod constructions;
pub mod diagnostics;
pub mod dirichlet;
pub mod error;
pub mod fit;
pub mod interp;
pub mod jet;
pub mod manifold;
pub mod ode;
pub mod quad;
pub mod shooting;
pub mod sobolev;

pub use error::{Error, Result};
pub use manifold::{Family, ModelFunction};
