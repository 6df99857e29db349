//! A condensate in the bichromatic potential `V1 cos(2x) + V2 cos(2 (p/q) x + theta)`.
//!
//! [`potential`] builds the commensurate approximant and its grid,
//! [`spectrum`] finds the single-particle modes and sorts localized from
//! extended ones, [`hopping`] turns pairs of modes into nonlinear coupling
//! tensors, [`lattice`] evolves the reduced lattice, [`dimer`] analyses the
//! two-mode reduction and [`gpe`] integrates the full equation.
//!
//! The guide in `book/` walks through each step with runnable code.

// `!(x > 0.0)` is how parameters reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dimer;
pub mod error;
mod fft;
pub mod gpe;
pub mod hopping;
pub mod lattice;
mod ode;
pub mod potential;
pub mod spectrum;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/potential.md")]
    mod potential {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/hopping.md")]
    mod hopping {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/dimer.md")]
    mod dimer {}
    #[doc = include_str!("../../../book/src/gpe.md")]
    mod gpe {}
}
