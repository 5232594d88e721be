//! Synthetic prosumer populations.
//!
//! Agents play a scenario with the threshold policy of their window. A
//! noisy agent flips each day's sell/hold decision with probability `ε`;
//! a flip to "sell" sells everything held.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{
    cutoff_schedule, optimal_action, CutoffSchedule, DecisionContext, DecisionError, Window,
};
use crate::fitting::{DayRecord, ParticipantTrace};
use crate::market::{
    generate_scenario, GenerationDistribution, PriceDistribution, Scenario, ValidationError,
};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("no agents to simulate")]
    NoAgents,
    #[error("no windows to sweep")]
    NoWindows,
    #[error("agent {id}: flip probability {noise} must lie in [0, 0.5)")]
    BadNoise { id: String, noise: f64 },
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub window: Window,
    /// Per-day probability of flipping the sell/hold decision.
    #[serde(default)]
    pub noise: f64,
}

impl AgentSpec {
    pub fn new(id: impl Into<String>, window: Window) -> Self {
        Self {
            id: id.into(),
            window,
            noise: 0.0,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn validate(&self) -> Result<(), SimulationError> {
        if !(0.0..0.5).contains(&self.noise) {
            return Err(SimulationError::BadNoise {
                id: self.id.clone(),
                noise: self.noise,
            });
        }
        if self.window == Window::Bounded(0) {
            return Err(DecisionError::ZeroWindow.into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub trace: ParticipantTrace,
    /// Price-level units; divide by ten for dollars.
    pub profit: u64,
    pub sell_days: usize,
    pub final_inventory: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    /// In the order the agents were given.
    pub agents: Vec<AgentOutcome>,
}

impl SimulationOutcome {
    pub fn traces(&self) -> Vec<ParticipantTrace> {
        self.agents.iter().map(|a| a.trace.clone()).collect()
    }
}

/// FNV-1a, used to derive a stable per-agent stream from its id.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn agent_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(id.as_bytes()));
    rng
}

/// Plays one agent through `scenario`.
pub fn run_agent(
    agent: &AgentSpec,
    scenario: &Scenario,
    schedule: &CutoffSchedule,
    seed: u64,
) -> Result<AgentOutcome, SimulationError> {
    agent.validate()?;
    let mut rng = agent_rng(seed, &agent.id);
    let mut inventory = scenario.initial_units;
    let mut records = Vec::with_capacity(scenario.horizon as usize);
    let mut profit = 0u64;
    for day in 1..=scenario.horizon {
        inventory += scenario.generated(day);
        let ctx = DecisionContext {
            day,
            horizon: scenario.horizon,
            units_available: inventory,
            offered_price: scenario.price(day),
            window: agent.window,
        };
        let mut sold = optimal_action(&ctx, schedule)?;
        // One draw per day keeps streams aligned across noise levels.
        let flip = rng.gen::<f64>() < agent.noise;
        if flip && inventory > 0 {
            sold = if sold == 0 { inventory } else { 0 };
        }
        records.push(DayRecord {
            offered_price: ctx.offered_price,
            units_available: inventory,
            units_sold: sold,
        });
        inventory -= sold;
        profit += sold as u64 * ctx.offered_price as u64;
    }
    let trace =
        ParticipantTrace::new(agent.id.clone(), records).expect("sales never exceed holdings");
    Ok(AgentOutcome {
        sell_days: trace.sell_days(),
        trace,
        profit,
        final_inventory: inventory,
    })
}

/// Runs every agent through `scenario` in parallel. Each agent draws noise
/// from its own stream keyed by `(seed, id)`, so results do not depend on
/// scheduling.
pub fn run_population(
    agents: &[AgentSpec],
    scenario: &Scenario,
    dist: &PriceDistribution,
    seed: u64,
) -> Result<SimulationOutcome, SimulationError> {
    if agents.is_empty() {
        return Err(SimulationError::NoAgents);
    }
    scenario.validate(dist.max_level())?;
    let schedule = cutoff_schedule(dist, scenario.horizon.saturating_sub(1));
    let agents = agents
        .par_iter()
        .map(|a| run_agent(a, scenario, &schedule, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimulationOutcome { agents })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub windows: Vec<Window>,
    pub scenarios: usize,
    pub horizon: u32,
    pub seed: u64,
    #[serde(default)]
    pub weekend_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: Window,
    /// Mean profit in price-level units.
    pub mean_profit: f64,
    /// Mean fraction of days with a sale.
    pub mean_sell_frequency: f64,
    pub mean_sell_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub summaries: Vec<WindowSummary>,
    /// `sell_days[s][k]` is the sell-day count on scenario `s` for window
    /// `windows[k]`.
    pub sell_days: Vec<Vec<usize>>,
    pub profits: Vec<Vec<u64>>,
}

/// Seed of the `index`-th scenario in a sweep.
pub fn scenario_seed(seed: u64, index: usize) -> u64 {
    seed ^ fnv1a(&(index as u64).to_le_bytes())
}

/// Plays noiseless agents for each window over freshly sampled scenarios
/// and averages their profit and sell frequency.
pub fn sweep_windows(
    config: &SweepConfig,
    dist: &PriceDistribution,
    gen: &GenerationDistribution,
) -> Result<SweepResult, SimulationError> {
    if config.windows.is_empty() {
        return Err(SimulationError::NoWindows);
    }
    let schedule = cutoff_schedule(dist, config.horizon.saturating_sub(1));
    let per_scenario = (0..config.scenarios)
        .into_par_iter()
        .map(|i| {
            let scenario = generate_scenario(
                dist,
                gen,
                config.horizon,
                scenario_seed(config.seed, i),
                config.weekend_offset,
            )?;
            config
                .windows
                .iter()
                .map(|&w| {
                    let outcome = run_agent(&AgentSpec::new("sweep", w), &scenario, &schedule, 0)?;
                    Ok((outcome.sell_days, outcome.profit))
                })
                .collect::<Result<Vec<_>, SimulationError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = config.scenarios.max(1) as f64;
    let summaries = config
        .windows
        .iter()
        .enumerate()
        .map(|(k, &window)| {
            let sell_days: usize = per_scenario.iter().map(|row| row[k].0).sum();
            let profit: u64 = per_scenario.iter().map(|row| row[k].1).sum();
            WindowSummary {
                window,
                mean_profit: profit as f64 / n,
                mean_sell_days: sell_days as f64 / n,
                mean_sell_frequency: sell_days as f64 / n / config.horizon as f64,
            }
        })
        .collect();
    Ok(SweepResult {
        summaries,
        sell_days: per_scenario
            .iter()
            .map(|r| r.iter().map(|x| x.0).collect())
            .collect(),
        profits: per_scenario
            .iter()
            .map(|r| r.iter().map(|x| x.1).collect())
            .collect(),
    })
}
