//! Barycentric (Douady–Earle) extensions of rational maps of the Riemann
//! sphere to hyperbolic 3-space, together with the tooling used to study
//! them: quantitative Lipschitz and belt-volume checks, degenerating
//! families and their rescaling radii, and branched coverings of finite
//! metric trees that model the rescaling limits.
//!
//! Module map:
//!
//! * [`sphere`]: sphere/plane coordinates and quadrature for the round measure.
//! * [`h3`]: the unit-ball model, Möbius isometries, cylindrical coordinates.
//! * [`poly`]: homogeneous polynomials and the simultaneous root finder.
//! * [`rational`]: rational maps, critical points, periodic cycles.
//! * [`barycentric`]: the conformal barycenter and the extension itself.
//! * [`degeneration`]: preimages of the origin, rescaling radii, families.
//! * [`tree`]: finite metric trees and their branched coverings.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycentric;
pub mod degeneration;
pub mod error;
pub mod h3;
pub mod poly;
pub mod rational;
pub mod sphere;
pub mod tree;

pub use error::{Error, Result};
pub use num_complex::Complex64;
