//! Analysis of translation-invariant networks of coupled linear systems on
//! the integer lattice: Fourier symbols of block-Toeplitz operators,
//! spatio-temporal transfer functions, energy-based certificates
//! (dissipativity, passivity, positive realness, negative imaginariness,
//! quadratic stability), phonon dispersion relations, and time-domain
//! simulation on periodic truncations.
//!
//! The narrative guide lives in `book/` at the repository root (an mdBook);
//! its code snippets are compiled and run as doc-tests of this crate, so
//! guide and library cannot drift apart.
//!
//! ```
//! use tinet::certify::{check_positive_real, OmegaSweep, OMEGA_SWEEP_MAX, PSD_TOL};
//! use tinet::models::{chain_spec, damped_actuated, ChainParams, Sensing};
//! use tinet::TorusGrid;
//!
//! // a damped spring-mass chain, grounded so K(0) > 0, with collocated
//! // force input and velocity output
//! let spec = chain_spec(&ChainParams { mass: 1.0, spring: 1.0, damping: 0.5 })?
//!     .pinned(0.1);
//! let model = damped_actuated(&spec, 0.5, None, Sensing::Velocity)?;
//!
//! let grid = TorusGrid::new(1, 32)?;
//! let sweep = OmegaSweep::log_symmetric(OMEGA_SWEEP_MAX);
//! let report = check_positive_real(&model, &grid, &sweep, PSD_TOL)?;
//! assert!(report.verdict);
//! # Ok::<(), tinet::Error>(())
//! ```

pub mod certify;
pub mod error;
pub mod grid;
mod la;
pub mod model;
pub mod modelfile;
pub mod models;
pub mod phonon;
pub mod simulate;
pub mod spectral;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::TorusGrid;
pub use model::NetworkModel;
pub use stencil::MatrixStencil;

// Compile and run the guide's code blocks as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stencils-and-symbols.md")]
    mod stencils_and_symbols {}
    #[doc = include_str!("../../../book/src/transfer-functions.md")]
    mod transfer_functions {}
    #[doc = include_str!("../../../book/src/energy-and-certificates.md")]
    mod energy_and_certificates {}
    #[doc = include_str!("../../../book/src/phonons.md")]
    mod phonons {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
