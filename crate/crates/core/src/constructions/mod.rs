//! Explicit supersolutions and the glued model manifold carrying a global positive solution.

mod glue;
mod mollifier;
mod supersolution;

pub use glue::{
    g_functional, glue, smooth_c1, smooth_cinf, w2_constant, w2_tail, FCoefficients, FinalChecks, GluedProfile, Stage,
    Tangency, W2Tail,
};
pub use supersolution::{build_supersolution, Supersolution};
