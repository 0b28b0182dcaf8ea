//! Sensor selection for remote state estimation over a shared wireless uplink.
//!
//! A linear system is observed by `N` sensors that report measurements to an
//! estimator over a common channel. Concurrent transmissions interfere, so a
//! sensor's packet is decodable only if its SINR clears a QoS threshold; the
//! scheduler must pick the subset of sensors (and transmit powers) that
//! minimizes the trace of the posterior error covariance subject to those
//! constraints.
//!
//! Module map:
//! - [`estimation`]: Kalman prediction/update, the relaxed objective
//!   `f(γ) = Tr{(P_prior⁻¹ + Σ γ_i C_iᵀR_i⁻¹C_i)⁻¹}` and its gradient.
//! - [`channel`]: pathloss/shadowing/Rayleigh channel draws, SINR, QoS checks.
//! - [`feasibility`]: exact minimum-power oracle for a fixed subset.
//! - [`sca`]: successive convex approximation solver for the `γ ∈ [0,1]`
//!   relaxation, with an internal log-barrier Newton method.
//! - [`selection`]: the relaxation-guided removal heuristic plus the
//!   subset-count-maximizing, precision-greedy, and brute-force baselines.
//! - [`config`], [`experiment`], [`output`]: experiment configuration, seeded
//!   Monte Carlo runners, and CSV/JSONL persistence used by the CLI.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod config;
pub mod experiment;
pub mod feasibility;
pub mod output;
pub mod sca;
pub mod selection;

pub use error::{Error, Result};
