//! Fundamental solutions of divergence-form parabolic operators with
//! unbounded coefficients on `R^N`, their ball-exhaustion approximation and
//! numerical certification of Gaussian upper bounds.

pub mod coeffparse;
pub mod operators;
pub mod constants;
pub mod pdekernel;
pub mod oracles;
pub mod harness;
