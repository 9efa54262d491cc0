//! Extrinsic upper bounds on the first nonzero Laplace eigenvalue of compact
//! submanifolds of Euclidean space.
//!
//! The pipeline is: a parametrized [`chart::ImmersedChart`] is sampled on a
//! [`quadrature::QuadratureGrid`], the global integrals are collected into an
//! [`quadrature::IntegralSet`], and [`bounds`] turns those into the Reilly
//! bound, the two direction-indexed bound families and their optimizers.
//! [`mesh`] provides an independent discrete estimate of `lambda_1`.

pub mod bounds;
pub mod catalog;
pub mod chart;
pub mod directions;
pub mod error;
pub mod mesh;
pub mod quadrature;

pub use error::{Error, Result};
