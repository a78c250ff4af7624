//! Oblique matching pursuit (OBLMP).
//!
//! Given a signal `f = f1 + f2` where `f2` lies in a known background
//! subspace and `f1` is a combination of a few dictionary atoms, OBLMP
//! greedily selects atoms and returns the oblique projection of `f` onto
//! their span along the background. The projection fixes the selected
//! atoms and maps the background to zero, so the result recovers `f1`
//! once the selected span contains it.
//!
//! Modules:
//! - [`linalg`]: signals, inner products, Gram-Schmidt redundancy elimination.
//! - [`oblique`]: background models, recursive dual vectors, dense oracles.
//! - [`pursuit`]: the greedy engine ([`oblmp`], [`oomp`]).
//! - [`dictionaries`]: B-spline dictionaries, background family, random signals.
//! - [`experiment`]: the two separation experiments and their reports.
//! - [`io`]: CSV tables and JSON output.
//! - [`verify`]: randomized property suites.

pub mod dictionaries;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod oblique;
pub mod pursuit;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{inner, mgs_orthonormalize, norm, orthogonal_project, Grid, OrthonormalSet, Signal};
pub use oblique::{
    apply_oblique, oracle_duals, oracle_oblique_projection, subtract_background, BackgroundModel,
    DualSet,
};
pub use pursuit::{oblmp, oomp, PursuitConfig, SeparationResult, StopReason, Threshold};
