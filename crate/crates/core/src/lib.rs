//! # microhmc
//!
//! A Hamiltonian Monte Carlo engine with energy-based sampler diagnostics.
//!
//! The sampler pairs a target density, expressed as a potential energy on an
//! unconstrained space, with a Gaussian momentum distribution defined by a
//! constant mass matrix. Trajectories follow the leapfrog approximation of
//! the Hamiltonian flow with dynamic lengths (no-u-turn termination) and
//! multinomial state selection; warmup adapts the step size and a diagonal
//! metric.
//!
//! What sets the library apart is what it records and reports: the energy of
//! every transition, the transition-to-transition energy changes, and the
//! resampling-induced kinetic changes. From these it computes the Bayesian
//! fraction of missing information (BFMI), the effective sample size per
//! transition of the energies, aligned energy histograms with analytic
//! overlays, divergence counts, and split R-hat — the diagnostics that
//! reveal when the momentum distribution is a poor match for the target.
//!
//! ```
//! use microhmc::model::TargetModel;
//! use microhmc::sample::{run_chains, SamplerConfig};
//! use microhmc::diagnose::build_report;
//!
//! let model = TargetModel::gaussian_iid(2)?;
//! let cfg = SamplerConfig {
//!     num_warmup: 200,
//!     num_samples: 200,
//!     chains: 2,
//!     seed: 1,
//!     ..SamplerConfig::default()
//! };
//! let traces = run_chains(&model, &cfg)?;
//! let report = build_report(&traces, &model, &cfg)?;
//! assert!(report.pooled_bfmi.is_some());
//! # Ok::<(), microhmc::Error>(())
//! ```
//!
//! The `microhmc` binary exposes the same pipeline as a batch command; see
//! the book under `book/` for a guided tour.

pub mod cli;
pub mod diagnose;
mod error;
pub mod integrate;
pub mod model;
pub mod phase;
pub mod sample;

pub use error::{Error, Result};
