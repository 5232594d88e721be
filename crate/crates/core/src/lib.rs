//! Sell/hold decision models for prosumers in a simulated daily energy
//! market.
//!
//! * [`market`] samples price and generation paths.
//! * [`decision`] computes cutoff prices and hold values for the
//!   full-horizon and time-window models and plays them over a scenario.
//! * [`fitting`] scores participant traces against every window and picks
//!   the best one.
//! * [`simulation`] runs synthetic agent populations.
//! * [`service`] hosts the grid game for live players.
//! * [`cli`] backs the `prosumer` binary.

pub mod cli;
pub mod decision;
pub mod fitting;
pub mod market;
pub mod service;
pub mod simulation;

pub use decision::{
    cutoff_schedule, decide_series, expected_utility, expected_utility_exact, hold_value,
    optimal_action, CutoffSchedule, DecisionContext, DecisionSeries, Window,
};
pub use fitting::{cohort_report, fit_window, FitResult, Metric, ParticipantTrace, PredictionMode};
pub use market::{
    at_least_once_probabilities, generate_scenario, standard_price_distribution,
    GenerationDistribution, PriceDistribution, Scenario,
};
pub use simulation::{run_population, sweep_windows, AgentSpec, SimulationOutcome};
