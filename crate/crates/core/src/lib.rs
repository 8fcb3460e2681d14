//! Budget-constrained expected-utility maximization for state-dependent,
//! possibly non-concave utilities.
//!
//! The pipeline is: build a [`statespace`] model, pick a
//! [`utility::UtilityFamily`], concavify it ([`envelope`]), invert the
//! envelope slopes ([`conjugate`]) and search the budget multiplier
//! ([`solver`]). [`varapp`] layers a probability constraint on top and
//! [`oracle`] brute-forces small discrete instances.

pub mod error;
pub mod numeric;
pub mod statespace;
pub mod utility;
pub mod envelope;
pub mod conjugate;
pub mod solver;
pub mod varapp;
pub mod oracle;
pub mod cli;

pub use error::{Error, Result};
