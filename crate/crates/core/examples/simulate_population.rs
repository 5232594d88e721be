//! Plays a handful of agents with different windows and noise levels over
//! one scenario and writes their traces as CSV to stdout.
//!
//!     cargo run --example simulate_population > traces.csv

use prosumer::decision::Window;
use prosumer::fitting::write_traces;
use prosumer::market::{generate_scenario, standard_price_distribution, GenerationDistribution};
use prosumer::simulation::{run_population, AgentSpec};

fn main() {
    let dist = standard_price_distribution();
    let scenario =
        generate_scenario(&dist, &GenerationDistribution::standard(), 68, 42, 0.0).unwrap();
    let agents = vec![
        AgentSpec::new("impatient", Window::Bounded(1)),
        AgentSpec::new("five-day", Window::Bounded(5)),
        AgentSpec::new("five-day-noisy", Window::Bounded(5)).with_noise(0.1),
        AgentSpec::new("far-sighted", Window::Unbounded),
    ];
    let outcome = run_population(&agents, &scenario, &dist, 7).unwrap();
    for (spec, agent) in agents.iter().zip(&outcome.agents) {
        eprintln!(
            "{:<15} profit {:>4}  sell days {:>2}",
            spec.id, agent.profit, agent.sell_days
        );
    }
    write_traces(std::io::stdout().lock(), &outcome.traces()).unwrap();
}
