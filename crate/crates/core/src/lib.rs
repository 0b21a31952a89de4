//! Finite-dimensional non-Hermitian quantum dynamics with an evolving
//! Hilbert-space metric.
//!
//! The engine integrates the state `ψ`, the metric `G`, the right and left
//! propagators `U_R`, `U_L` and the vielbein `𝓔` (with `G = 𝓔†𝓔`) on one
//! time grid, transports observables into the Schrödinger, Heisenberg and
//! Heisenberg-like pictures, and checks numerically that all three pictures
//! agree.
//!
//! ```
//! use metricbundle::cli::models::builtin;
//! use metricbundle::evolution::integrate;
//! use metricbundle::verify::{run_suite, SuiteOptions};
//!
//! let scenario = builtin("pt-dimer-unbroken", &[]).unwrap()
//!     .with_overrides(None, Some(1.0), Some(1e-2)).unwrap();
//! let bundle = integrate(&scenario).unwrap();
//! let report = run_suite(&bundle, &scenario, &SuiteOptions::default());
//! assert_eq!(report.summary.unexpected_failures, 0);
//! ```

pub mod cli;
pub mod evolution;
pub mod matops;
pub mod model;
pub mod representations;
pub mod verify;

pub use matops::{CMatrix, CVector, NumericConfig, Tolerance};

/// Compiles every code block of the guide in `book/` as a doctest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/metric.md")]
    mod metric {}
    #[doc = include_str!("../../../book/src/propagators.md")]
    mod propagators {}
    #[doc = include_str!("../../../book/src/heisenberg.md")]
    mod heisenberg {}
    #[doc = include_str!("../../../book/src/vielbein.md")]
    mod vielbein {}
    #[doc = include_str!("../../../book/src/naive-transport.md")]
    mod naive_transport {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
