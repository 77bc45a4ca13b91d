//! Exact δ-ring, twisted-derivation, envelope and q-Higgs calculus at finite
//! (p, [p]_q)-adic truncation.

pub mod base_prism;
pub mod delta_poly;
pub mod divided_powers;
pub mod envelope;
pub mod expr;
pub mod homalg;
pub mod qhiggs;
pub mod report;
pub mod error;
pub mod ring;
pub mod sample;
pub mod stratification;
pub mod suites;
pub mod twisted;

pub use error::{QError, QResult};
