//! Gibbs sampler for the dynamic mixture.
//!
//! Each sweep runs, in order: atoms; probit latents and `W` (or the MH update
//! of `W` under other links); slice variables; labels with component
//! extension; FFBS for the occupied state columns; `mu`, `phi`,
//! `sigma2_eps`, `sigma2_eta`; and finally a prior redraw of unoccupied
//! columns.

mod chain;
mod config;
pub mod ffbs;
pub mod geweke;
pub mod hyper;
mod state;
pub mod steps;

pub use chain::{draws_meta, run_chain, run_chains, ChainDiagnostics, ChainOutput, Sampler};
pub use config::{ChainConfig, PriorConfig};
pub use geweke::{run_geweke, GewekeConfig, GewekeStat};
pub use state::SamplerState;
pub use steps::Acceptance;
