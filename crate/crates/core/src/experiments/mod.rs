//! Simulation studies, evaluation metrics and forecasting.

pub mod evaluate;
pub mod forecast;
pub mod simulate;

pub use evaluate::{evaluate_rho_recovery, pearson, predictive_criteria, CountTable, PredictiveCriteria, RecoveryTable};
pub use forecast::forecast_table;
pub use simulate::{
    generate_loglinear_rw, generate_model_based, mixture_rho, LoglinearTruth, RhoValue, SimulationCase,
    SimulationSpec,
};
