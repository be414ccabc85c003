//! Numerical laboratory for the finite cosine kernel: Fredholm solutions and
//! determinants, the Dirac potential μ(u), the structure functions 𝒜, ℬ, Ê
//! and the scattering solutions J, K, bound states, spectral measures and the
//! isometric expansions.

pub mod cache;
pub mod cosine_kernel;
pub mod dirac_system;
pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod real;
pub mod spectral_analysis;
pub mod special_functions;
pub mod structure_functions;

pub use error::{Error, Result};
