//! Split-step spectral solver and blow-up analysis for the focusing
//! Davey–Stewartson II equation on a periodic box.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod grid;
pub mod harness;
pub mod io;
pub mod profile;
pub mod simplex;
pub mod solver;
pub mod tracer;
