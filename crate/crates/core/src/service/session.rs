use serde::{Deserialize, Serialize};

use crate::decision::{cutoff_schedule, decide_series, Window};
use crate::fitting::{fit_window, DayRecord, Metric, ParticipantTrace};
use crate::market::{at_least_once_probabilities, dollars, PriceDistribution, Scenario};

use super::ServiceError;

/// An amount in price-level units together with its dollar rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Money {
    pub index_units: u64,
    pub dollars: String,
}

impl From<u64> for Money {
    fn from(index_units: u64) -> Self {
        Self {
            index_units,
            dollars: dollars(index_units),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceChance {
    pub level: u32,
    pub dollars: String,
    pub probability: f64,
}

/// What a player sees each morning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bulletin {
    pub session_id: String,
    pub status: SessionStatus,
    pub day: u32,
    pub horizon: u32,
    pub generated_yesterday: u32,
    pub stored_units: u32,
    pub profit: Money,
    /// Absent once the game is over.
    pub todays_price: Option<Money>,
    /// Chance of each price appearing at least once from today through the
    /// last day.
    pub at_least_once: Vec<PriceChance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub best_window: Window,
    pub score: f64,
    /// Every window scoring as well as the best one; windows sharing a
    /// cutoff class are indistinguishable.
    pub tied_windows: Vec<Window>,
    pub unbounded_score: f64,
}

/// End-of-game summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub session_id: String,
    pub profit: Money,
    /// Profit the full-horizon model would have made on this price path.
    pub model_profit: Money,
    /// Profit of selling every unit at the best price from its arrival on,
    /// with hindsight.
    pub hindsight_profit: Money,
    pub sell_days: usize,
    pub mean_deviation: Option<WindowFit>,
    pub proportional_deviation: Option<WindowFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionAck {
    pub day: u32,
    pub units: u32,
    pub revenue: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: DecisionAck,
    pub state: Bulletin,
    pub report: Option<FinalReport>,
}

/// One player's game. `day` is the day awaiting a decision; it runs one
/// past the horizon once the game is complete.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSession {
    id: String,
    scenario: Scenario,
    dist: PriceDistribution,
    day: u32,
    inventory: u32,
    profit: u64,
    records: Vec<DayRecord>,
}

impl GameSession {
    pub fn new(id: String, scenario: Scenario, dist: PriceDistribution) -> Self {
        let inventory = scenario.initial_units + scenario.generated(1);
        Self {
            id,
            scenario,
            dist,
            day: 1,
            inventory,
            profit: 0,
            records: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn distribution(&self) -> &PriceDistribution {
        &self.dist
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn inventory(&self) -> u32 {
        self.inventory
    }

    pub fn profit(&self) -> u64 {
        self.profit
    }

    pub fn status(&self) -> SessionStatus {
        if self.day > self.scenario.horizon {
            SessionStatus::Completed
        } else {
            SessionStatus::Active
        }
    }

    pub fn trace(&self) -> ParticipantTrace {
        ParticipantTrace::new(self.id.clone(), self.records.clone())
            .expect("decisions are validated")
    }

    pub fn bulletin(&self) -> Bulletin {
        let horizon = self.scenario.horizon;
        let active = self.status() == SessionStatus::Active;
        let (day, generated_yesterday, days_left) = if active {
            (
                self.day,
                self.scenario.generated(self.day),
                horizon - self.day + 1,
            )
        } else {
            (horizon, self.scenario.generated(horizon), 0)
        };
        let at_least_once = at_least_once_probabilities(&self.dist, days_left)
            .into_iter()
            .zip(self.dist.levels())
            .map(|(probability, level)| PriceChance {
                level,
                dollars: dollars(level as u64),
                probability,
            })
            .collect();
        Bulletin {
            session_id: self.id.clone(),
            status: self.status(),
            day,
            horizon,
            generated_yesterday,
            stored_units: self.inventory,
            profit: self.profit.into(),
            todays_price: active.then(|| (self.scenario.price(self.day) as u64).into()),
            at_least_once,
        }
    }

    /// Checks a decision for `day` without applying it.
    pub fn check_decision(&self, day: Option<u32>, units: u32) -> Result<u32, ServiceError> {
        if self.status() == SessionStatus::Completed {
            return Err(ServiceError::Conflict("the game is over".into()));
        }
        if let Some(d) = day {
            if d != self.day {
                return Err(ServiceError::Conflict(format!(
                    "a decision for day {d} was already recorded; today is day {}",
                    self.day
                )));
            }
        }
        if units > self.inventory {
            return Err(ServiceError::InsufficientUnits {
                requested: units,
                stored: self.inventory,
            });
        }
        Ok(self.day)
    }

    /// Records today's decision and moves to the next day.
    pub fn apply(&mut self, day: u32, units: u32) -> Result<DecisionAck, ServiceError> {
        self.check_decision(Some(day), units)?;
        let price = self.scenario.price(day);
        self.records.push(DayRecord {
            offered_price: price,
            units_available: self.inventory,
            units_sold: units,
        });
        self.inventory -= units;
        let revenue = units as u64 * price as u64;
        self.profit += revenue;
        self.day += 1;
        if self.day <= self.scenario.horizon {
            self.inventory += self.scenario.generated(self.day);
        }
        Ok(DecisionAck {
            day,
            units,
            revenue: revenue.into(),
        })
    }

    pub fn final_report(&self) -> Result<FinalReport, ServiceError> {
        if self.status() != SessionStatus::Completed {
            return Err(ServiceError::NotCompleted);
        }
        let trace = self.trace();
        let schedule = cutoff_schedule(&self.dist, self.scenario.horizon.saturating_sub(1));
        let model = decide_series(&self.scenario, Window::Unbounded, &schedule)?;
        let fit = |metric| {
            fit_window(&trace, &self.scenario, &self.dist, metric)
                .ok()
                .map(|f| WindowFit {
                    best_window: f.best_window,
                    score: f.best_score,
                    tied_windows: f
                        .scores
                        .iter()
                        .filter(|(_, &s)| s == f.best_score)
                        .map(|(&w, _)| w)
                        .collect(),
                    unbounded_score: f.unbounded_score(),
                })
        };
        Ok(FinalReport {
            session_id: self.id.clone(),
            profit: self.profit.into(),
            model_profit: model.profit.into(),
            hindsight_profit: hindsight_profit(&self.scenario).into(),
            sell_days: trace.sell_days(),
            mean_deviation: fit(Metric::Md),
            proportional_deviation: fit(Metric::Pd),
        })
    }
}

/// Each unit sells at the highest price offered on or after the day it
/// becomes available.
pub fn hindsight_profit(scenario: &Scenario) -> u64 {
    let mut best_ahead = 0u32;
    let mut profit = 0u64;
    for day in (1..=scenario.horizon).rev() {
        best_ahead = best_ahead.max(scenario.price(day));
        let mut arriving = scenario.generated(day) as u64;
        if day == 1 {
            arriving += scenario.initial_units as u64;
        }
        profit += arriving * best_ahead as u64;
    }
    profit
}
