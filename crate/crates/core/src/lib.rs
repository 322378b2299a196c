//! Dynamic mixtures of product-multinomial kernels for time-indexed
//! multivariate categorical data.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod draws;
pub mod error;
pub mod experiments;
pub mod gof;
pub mod io;
pub mod link;
pub mod model;
pub mod moments;
pub mod num;
pub mod random;
pub mod sampler;
pub mod stick;

pub use error::{Error, Result};
pub use link::LinkFunction;
pub use data::{Dataset, ObservationBlock};
pub use draws::PosteriorDraws;
pub use model::{CategoricalSchema, DirichletHyper};
pub use sampler::{ChainConfig, PriorConfig};
pub use stick::{StateHyper, StateTrajectory};

pub type Mixture = model::ParafacMixture<f64>;
pub type Probabilities = model::ProbabilityVector<f64>;
pub type Ladder = model::WeightLadder<f64>;
