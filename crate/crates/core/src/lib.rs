//! Simulation toolkit for electrodynamically trapped Yb⁺ ions.
//!
//! * [`atomic`]: the eight-level ¹⁷¹Yb⁺ S₁/₂–P₁/₂ hyperfine/Zeeman scheme.
//! * [`master`]: rotating-frame Hamiltonian, Lindblad generator, time
//!   evolution and stationary states.
//! * [`prep`]: optical-pumping state preparation, fluorescence transients and
//!   photon-count state detection.
//! * [`trap`]: Mathieu parameters, secular frequencies and linear ion crystals.
//! * [`loading`]: isotope-selective photoionization spectra and loading
//!   statistics.
//!
//! The `book/` directory next to this crate explains the physics behind each
//! module; its code listings are compiled as doc-tests of this crate.

pub mod angular;
pub mod atomic;
pub mod config;
pub mod error;
mod linalg;
pub mod loading;
pub mod master;
pub mod prep;
pub mod trap;
pub mod units;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/level-scheme.md")]
    mod level_scheme {}
    #[doc = include_str!("../../../book/src/master-equation.md")]
    mod master_equation {}
    #[doc = include_str!("../../../book/src/state-preparation.md")]
    mod state_preparation {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/trap.md")]
    mod trap {}
    #[doc = include_str!("../../../book/src/crystals.md")]
    mod crystals {}
    #[doc = include_str!("../../../book/src/photoionization.md")]
    mod photoionization {}
}
