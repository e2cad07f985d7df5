//! Numerical core for degenerate Monge-Ampère problems.
//!
//! Everything in this crate is allocation-backed but otherwise free of the
//! standard library: file formats, the experiment runner and the command line
//! live in the companion `degma` crate.
//!
//! Module map:
//!
//! * [`fields`]: tensor grids, sampled scalar fields, finite-difference
//!   Hessians and discrete Monge-Ampère determinants.
//! * [`geometry`]: convex domains, boundary distance, slidings, the
//!   anisotropic dilations `F_h` and sections.
//! * [`mesh`]: embedded-boundary lattice stencils on a uniform grid.
//! * [`ma_solver`]: damped Newton for `det D²u = g·d^α`.
//! * [`grushin`]: the degenerate linear model `x_n^α a^{ij}v_ij + v_nn = x_n^α f`.
//! * [`eigen`]: inverse power iteration for the Monge-Ampère eigenvalue.
//! * [`transforms`]: hodograph and partial Legendre transforms.
//! * [`analysis`]: the `d_α` quasi-distance, Hölder seminorms, boundary
//!   expansion fits and convergence orders.
//! * [`barriers`]: closed-form barrier functions and matrix inequalities.
#![no_std]
// When std is linked anywhere in the build, float methods resolve inherently
// and the `num_traits::Float` imports used by no_std builds go unused.
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod barriers;
pub mod eigen;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grushin;
pub mod interp;
pub mod linalg;
pub mod ma_solver;
pub mod mesh;
pub mod sparse;
pub mod transforms;

pub use error::{Error, Result};

/// The model solution `U_0(x) = ½|x'|² + x_n^{2+α}/((1+α)(2+α))` on `x_n ≥ 0`.
pub fn model_solution(x: &[f64], alpha: f64) -> f64 {
    use num_traits::Float;
    let n = x.len();
    let tangential: f64 = x[..n - 1].iter().map(|v| v * v).sum();
    let xn = x[n - 1].max(0.0);
    0.5 * tangential + xn.powf(2.0 + alpha) / ((1.0 + alpha) * (2.0 + alpha))
}
