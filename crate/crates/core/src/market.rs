//! Price and generation distributions, and the daily market scenarios
//! sampled from them.
//!
//! Prices are integer levels `1..=I`. A level `i` is displayed as
//! `i / 10` dollars, so the fifteen-level default runs from $0.10 to $1.50.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on probability sums.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Days of data used by default; the experiment ran ten weeks with two
/// days dropped.
pub const DEFAULT_HORIZON: u32 = 68;

/// Units every participant starts with.
pub const DEFAULT_INITIAL_UNITS: u32 = 5;

const STANDARD_PRICE_PROBS: [f64; 15] = [
    0.03, 0.06, 0.09, 0.12, 0.14, 0.11, 0.09, 0.08, 0.07, 0.06, 0.05, 0.04, 0.03, 0.02, 0.01,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("distribution has no price levels")]
    EmptyDistribution,
    #[error("probability {value} at position {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    BadSum { sum: f64 },
    #[error("generation distribution needs exactly 3 probabilities (0, 1, 2 units), got {0}")]
    GenerationArity(usize),
    #[error("horizon must be at least 1 day")]
    EmptyHorizon,
    #[error("weekend offset must be finite and non-negative, got {0}")]
    BadOffset(f64),
    #[error("{field} has {actual} entries but the horizon is {horizon}")]
    LengthMismatch {
        field: &'static str,
        actual: usize,
        horizon: u32,
    },
    #[error("day {day}: price level {price} is outside 1..={max}")]
    PriceOutOfRange { day: u32, price: u32, max: u32 },
    #[error("day {day}: generated {units} units, at most 2 allowed")]
    GenerationOutOfRange { day: u32, units: u32 },
}

fn check_probs(probs: &[f64]) -> Result<(), ValidationError> {
    for (index, &value) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(ValidationError::ProbabilityOutOfRange { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(ValidationError::BadSum { sum });
    }
    Ok(())
}

/// Single-day probabilities for price levels `1..=I`.
///
/// Serializes as a bare JSON array of probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceDistribution {
    probs: Vec<f64>,
}

impl PriceDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ValidationError> {
        if probs.is_empty() {
            return Err(ValidationError::EmptyDistribution);
        }
        check_probs(&probs)?;
        Ok(Self { probs })
    }

    /// Uniform distribution over `levels` prices.
    pub fn uniform(levels: u32) -> Result<Self, ValidationError> {
        Self::new(vec![1.0 / levels as f64; levels as usize])
    }

    /// Highest price level `I`.
    pub fn max_level(&self) -> u32 {
        self.probs.len() as u32
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        1..=self.max_level()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of price level `level` (1-based). Zero outside `1..=I`.
    pub fn prob(&self, level: u32) -> f64 {
        if level == 0 {
            return 0.0;
        }
        self.probs.get(level as usize - 1).copied().unwrap_or(0.0)
    }

    /// Mean price in level units.
    pub fn mean(&self) -> f64 {
        self.levels()
            .zip(&self.probs)
            .map(|(j, p)| j as f64 * p)
            .sum()
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.probs).expect("validated distribution has positive mass")
    }
}

impl TryFrom<Vec<f64>> for PriceDistribution {
    type Error = ValidationError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(probs)
    }
}

impl From<PriceDistribution> for Vec<f64> {
    fn from(d: PriceDistribution) -> Self {
        d.probs
    }
}

/// The fifteen-level price distribution used in the grid-game experiment.
pub fn standard_price_distribution() -> PriceDistribution {
    PriceDistribution::new(STANDARD_PRICE_PROBS.to_vec()).expect("table is a valid distribution")
}

/// Probabilities of generating 0, 1 or 2 surplus units on a day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GenerationDistribution {
    probs: [f64; 3],
}

impl GenerationDistribution {
    pub fn new(probs: [f64; 3]) -> Result<Self, ValidationError> {
        check_probs(&probs)?;
        Ok(Self { probs })
    }

    /// 15% zero-unit days, 50% one-unit days, 35% two-unit days.
    pub fn standard() -> Self {
        Self::new([0.15, 0.50, 0.35]).expect("valid")
    }

    pub fn probs(&self) -> [f64; 3] {
        self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs[1] + 2.0 * self.probs[2]
    }
}

impl Default for GenerationDistribution {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<f64>> for GenerationDistribution {
    type Error = ValidationError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let probs: [f64; 3] = v
            .as_slice()
            .try_into()
            .map_err(|_| ValidationError::GenerationArity(v.len()))?;
        Self::new(probs)
    }
}

impl From<GenerationDistribution> for Vec<f64> {
    fn from(g: GenerationDistribution) -> Self {
        g.probs.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayKind {
    Weekday,
    Weekend,
}

impl DayKind {
    /// Day 1 is a Monday.
    pub fn for_day(day: u32) -> Self {
        if (day.saturating_sub(1)) % 7 < 5 {
            DayKind::Weekday
        } else {
            DayKind::Weekend
        }
    }
}

/// A complete market path: one offered price and one generation count
/// per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: u32,
    pub offered_prices: Vec<u32>,
    pub generated_units: Vec<u32>,
    pub initial_units: u32,
    pub day_kinds: Vec<DayKind>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Scenario {
    /// Builds a scenario from explicit price and generation paths. Day kinds
    /// follow a Monday start.
    pub fn from_paths(
        offered_prices: Vec<u32>,
        generated_units: Vec<u32>,
        initial_units: u32,
    ) -> Self {
        let horizon = offered_prices.len() as u32;
        Self {
            horizon,
            day_kinds: (1..=horizon).map(DayKind::for_day).collect(),
            offered_prices,
            generated_units,
            initial_units,
            seed: None,
        }
    }

    pub fn validate(&self, max_level: u32) -> Result<(), ValidationError> {
        if self.horizon == 0 {
            return Err(ValidationError::EmptyHorizon);
        }
        let check_len = |field, actual: usize| {
            if actual != self.horizon as usize {
                Err(ValidationError::LengthMismatch {
                    field,
                    actual,
                    horizon: self.horizon,
                })
            } else {
                Ok(())
            }
        };
        check_len("offered_prices", self.offered_prices.len())?;
        check_len("generated_units", self.generated_units.len())?;
        check_len("day_kinds", self.day_kinds.len())?;
        for (day, &price) in (1..).zip(&self.offered_prices) {
            if price == 0 || price > max_level {
                return Err(ValidationError::PriceOutOfRange {
                    day,
                    price,
                    max: max_level,
                });
            }
        }
        for (day, &units) in (1..).zip(&self.generated_units) {
            if units > 2 {
                return Err(ValidationError::GenerationOutOfRange { day, units });
            }
        }
        Ok(())
    }

    /// Price offered on `day` (1-based).
    pub fn price(&self, day: u32) -> u32 {
        self.offered_prices[day as usize - 1]
    }

    pub fn generated(&self, day: u32) -> u32 {
        self.generated_units[day as usize - 1]
    }

    pub fn total_units(&self) -> u64 {
        self.initial_units as u64 + self.generated_units.iter().map(|&u| u as u64).sum::<u64>()
    }

    pub fn mean_price(&self) -> f64 {
        self.offered_prices.iter().map(|&p| p as f64).sum::<f64>() / self.horizon as f64
    }
}

/// Samples a scenario of `horizon` days.
///
/// Prices are drawn i.i.d. from `dist`. With a positive `weekend_offset`,
/// each weekend draw moves down by `round(offset * level)` and each weekday
/// draw moves up by `round(offset * level * weekend_days / weekday_days)`,
/// which balances the two shifts in expectation; results are clamped to
/// `1..=I`. An offset of zero leaves the draws untouched.
pub fn generate_scenario(
    dist: &PriceDistribution,
    gen: &GenerationDistribution,
    horizon: u32,
    seed: u64,
    weekend_offset: f64,
) -> Result<Scenario, ValidationError> {
    if horizon == 0 {
        return Err(ValidationError::EmptyHorizon);
    }
    if !weekend_offset.is_finite() || weekend_offset < 0.0 {
        return Err(ValidationError::BadOffset(weekend_offset));
    }
    // Revalidate: the fields may have been deserialized from untrusted input.
    let dist = PriceDistribution::new(dist.probs.clone())?;
    let gen = GenerationDistribution::new(gen.probs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let price_sampler = dist.sampler();
    let gen_sampler = WeightedIndex::new(gen.probs).expect("validated");

    let day_kinds: Vec<DayKind> = (1..=horizon).map(DayKind::for_day).collect();
    let mut offered_prices = Vec::with_capacity(horizon as usize);
    let mut generated_units = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        offered_prices.push(price_sampler.sample(&mut rng) as u32 + 1);
        generated_units.push(gen_sampler.sample(&mut rng) as u32);
    }

    if weekend_offset > 0.0 {
        let weekends = day_kinds.iter().filter(|k| **k == DayKind::Weekend).count() as f64;
        let weekdays = horizon as f64 - weekends;
        let weekday_scale = if weekdays > 0.0 {
            weekends / weekdays
        } else {
            0.0
        };
        let max = dist.max_level() as i64;
        for (price, kind) in offered_prices.iter_mut().zip(&day_kinds) {
            let level = *price as f64;
            let shifted = match kind {
                DayKind::Weekend => *price as i64 - (weekend_offset * level).round() as i64,
                DayKind::Weekday => {
                    *price as i64 + (weekend_offset * level * weekday_scale).round() as i64
                }
            };
            *price = shifted.clamp(1, max) as u32;
        }
    }

    Ok(Scenario {
        horizon,
        offered_prices,
        generated_units,
        initial_units: DEFAULT_INITIAL_UNITS,
        day_kinds,
        seed: Some(seed),
    })
}

/// Chance that each level is offered at least once over `days_remaining`
/// independent days, indexed by level - 1.
pub fn at_least_once_probabilities(dist: &PriceDistribution, days_remaining: u32) -> Vec<f64> {
    dist.probs
        .iter()
        .map(|&p| {
            if days_remaining == 1 {
                p
            } else {
                1.0 - (1.0 - p).powi(days_remaining as i32)
            }
        })
        .collect()
}

/// Formats a price level or a sum of levels as dollars, e.g. `7 -> "0.70"`.
pub fn dollars(index_units: u64) -> String {
    format!("{}.{:02}", index_units / 10, (index_units % 10) * 10)
}

/// A price level together with its dollar rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceLevel(pub u32);

impl fmt::Display for PriceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", dollars(self.0 as u64))
    }
}
