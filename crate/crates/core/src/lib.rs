//! Root-valuation strata of the adjoint quotient `t/W` over formal power
//! series: exact decision procedures for non-emptiness and codimension,
//! plus a finite-field jet oracle that checks the structural statements by
//! exhaustive enumeration.

pub mod error;
pub mod exactfield;
pub mod jets;
pub mod rootsys;
pub mod strata;
pub mod verify;

pub use error::{Error, Result};
