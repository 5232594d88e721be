//! Finite-horizon and time-window sell/hold models.
//!
//! Both models value a held unit by the expected gain of following the
//! threshold policy over the remaining opportunity days. With `k` future
//! days the hold value obeys
//!
//! ```text
//! f(0) = 0,  c(0) = 1
//! f(k) = sum_{j >= c(k-1)} p_j * j  +  f(k-1) * sum_{j < c(k-1)} p_j
//! c(k) = smallest integer price strictly greater than f(k)
//! ```
//!
//! The unbounded model indexes this by days remaining `D - d`; the windowed
//! model indexes it by `w = min(D - d, t)`. Either way a day's decision is
//! "sell everything if the offered price reaches `c(w)`, otherwise hold".

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::market::{PriceDistribution, Scenario};

/// Denominator size (bits) above which the recursion continues in `f64`.
const EXACT_BIT_BUDGET: u64 = 4096;

/// Distance from an integer below which an `f64` hold value is treated as
/// that integer.
const FLOAT_GUARD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecisionError {
    #[error("cannot sell {requested} units with only {available} available")]
    ExceedsAvailable { requested: u32, available: u32 },
    #[error("schedule covers indices up to {len}, index {needed} requested")]
    ScheduleTooShort { needed: u32, len: u32 },
    #[error("day {day} is outside the horizon 1..={horizon}")]
    DayOutOfRange { day: u32, horizon: u32 },
    #[error("time window must be at least 1 day")]
    ZeroWindow,
}

/// How far ahead a decision-maker looks when valuing a hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Window {
    /// Look at most `t` days ahead (`t >= 1`).
    Bounded(u32),
    /// Look to the end of the horizon.
    Unbounded,
}

impl Window {
    pub fn bounded(t: u32) -> Result<Self, DecisionError> {
        if t == 0 {
            Err(DecisionError::ZeroWindow)
        } else {
            Ok(Window::Bounded(t))
        }
    }

    /// Effective index `w = min(days_remaining, t)`.
    pub fn effective(self, days_remaining: u32) -> u32 {
        match self {
            Window::Bounded(t) => days_remaining.min(t),
            Window::Unbounded => days_remaining,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Bounded(t) => f.pad(&t.to_string()),
            Window::Unbounded => f.pad("unbounded"),
        }
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unbounded") || s.eq_ignore_ascii_case("eut") {
            return Ok(Window::Unbounded);
        }
        match s.parse::<u32>() {
            Ok(0) => Err("time window must be at least 1".into()),
            Ok(t) => Ok(Window::Bounded(t)),
            Err(_) => Err(format!(
                "invalid window `{s}`; expected a positive integer or `unbounded`"
            )),
        }
    }
}

// Bounded windows are JSON numbers (or numeric map keys), unbounded is the
// string "unbounded".
impl Serialize for Window {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Window::Bounded(t) => serializer.serialize_u32(*t),
            Window::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = Window;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"unbounded\"")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Window, E> {
                let t = u32::try_from(v).map_err(E::custom)?;
                Window::bounded(t).map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Window, E> {
                let v = u64::try_from(v).map_err(E::custom)?;
                self.visit_u64(v)
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Window, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// What a schedule's index counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    DaysRemaining,
    Window,
}

/// Cutoff prices and hold values for indices `0..=max_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSchedule {
    pub kind: ScheduleKind,
    cutoffs: Vec<u32>,
    hold_values: Vec<f64>,
    /// Exact hold values for the leading indices the rational recursion
    /// covered.
    #[serde(skip)]
    exact_hold_values: Vec<BigRational>,
}

impl CutoffSchedule {
    pub fn with_kind(mut self, kind: ScheduleKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn max_index(&self) -> u32 {
        self.cutoffs.len() as u32 - 1
    }

    pub fn cutoffs(&self) -> &[u32] {
        &self.cutoffs
    }

    pub fn hold_values(&self) -> &[f64] {
        &self.hold_values
    }

    pub fn cutoff(&self, index: u32) -> Result<u32, DecisionError> {
        self.cutoffs
            .get(index as usize)
            .copied()
            .ok_or(DecisionError::ScheduleTooShort {
                needed: index,
                len: self.max_index(),
            })
    }

    /// Exact hold value, if `index` lies within the rational prefix.
    pub fn exact_hold_value(&self, index: u32) -> Option<&BigRational> {
        self.exact_hold_values.get(index as usize)
    }

    pub fn hold_value(&self, index: u32) -> Result<f64, DecisionError> {
        self.hold_values
            .get(index as usize)
            .copied()
            .ok_or(DecisionError::ScheduleTooShort {
                needed: index,
                len: self.max_index(),
            })
    }

    /// Groups consecutive indices with equal cutoffs, highest cutoff first:
    /// `(cutoff, first_index, last_index)`. The final band is open-ended
    /// when it reaches `max_index`.
    pub fn bands(&self) -> Vec<(u32, u32, u32)> {
        let mut out: Vec<(u32, u32, u32)> = Vec::new();
        for (index, &c) in self.cutoffs.iter().enumerate() {
            match out.last_mut() {
                Some(band) if band.0 == c => band.2 = index as u32,
                _ => out.push((c, index as u32, index as u32)),
            }
        }
        out.reverse();
        out
    }

    /// CSV with header `index,cutoff,hold_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,cutoff,hold_value\n");
        for (index, (c, h)) in self.cutoffs.iter().zip(&self.hold_values).enumerate() {
            out.push_str(&format!("{index},{c},{h}\n"));
        }
        out
    }

    /// Cutoff/days-remaining table with an open-ended top band, e.g.
    /// `14 | >=31`.
    pub fn banded_table(&self) -> String {
        let mut out = String::from("cutoff | days remaining\n");
        let max = self.max_index();
        for (i, (c, lo, hi)) in self.bands().into_iter().enumerate() {
            let range = if i == 0 && hi == max && lo != hi {
                format!(">={lo}")
            } else if lo == hi {
                format!("{lo}")
            } else {
                format!("{lo}-{hi}")
            };
            out.push_str(&format!("{c} | {range}\n"));
        }
        out
    }
}

/// Converts a probability to the exact rational its shortest decimal
/// rendering denotes, so `0.03` becomes `3/100` rather than the nearest
/// binary fraction.
fn decimal_rational(p: f64) -> BigRational {
    let s = p.to_string();
    let (int_part, frac_part) = s.split_once('.').unwrap_or((&s, ""));
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().expect("f64 display is a plain decimal");
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    BigRational::new(numer, denom)
}

/// Prefix tables used by the recursion: `head[c] = sum_{j < c} p_j` and
/// `tail[c] = sum_{j >= c} p_j * j`, for `c` in `1..=I+1`.
struct Moments<T> {
    head: Vec<T>,
    tail: Vec<T>,
}

impl<T> Moments<T>
where
    T: Clone + Zero + for<'a> std::ops::Add<&'a T, Output = T>,
{
    fn build(probs: &[T], level: impl Fn(usize) -> T) -> Self
    where
        T: for<'a> std::ops::Mul<&'a T, Output = T>,
    {
        let n = probs.len();
        let mut head = vec![T::zero(); n + 2];
        for c in 2..=n + 1 {
            head[c] = head[c - 1].clone() + &probs[c - 2];
        }
        let mut tail = vec![T::zero(); n + 2];
        for c in (1..=n).rev() {
            tail[c] = tail[c + 1].clone() + &(level(c) * &probs[c - 1]);
        }
        Self { head, tail }
    }
}

fn floor_plus_one_exact(v: &BigRational) -> u32 {
    (v.floor().to_integer() + BigInt::one())
        .to_u32()
        .expect("hold values are bounded by the top price")
}

fn floor_plus_one_guarded(v: f64) -> u32 {
    let nearest = v.round();
    if (v - nearest).abs() < FLOAT_GUARD {
        nearest as u32 + 1
    } else {
        v.floor() as u32 + 1
    }
}

/// Computes cutoffs and hold values for indices `0..=max_index`, bottom up.
///
/// The recursion runs in exact rational arithmetic on the decimal values of
/// the probabilities. If the denominators outgrow [`EXACT_BIT_BUDGET`] it
/// continues in `f64`, treating values within `1e-9` of an integer as that
/// integer. A cutoff of `I + 1` means no price is worth selling at before
/// the deadline. That needs a hold value of exactly `I`, which only happens
/// when all mass sits on the top price; otherwise the hold value stays
/// below `I` and the cutoff is capped there.
pub fn cutoff_schedule(dist: &PriceDistribution, max_index: u32) -> CutoffSchedule {
    let top = dist.max_level();
    let all_on_top = dist.prob(top) == 1.0;
    let exact_probs: Vec<BigRational> = dist.probs().iter().map(|&p| decimal_rational(p)).collect();
    let exact = Moments::build(&exact_probs, |c| BigRational::from_integer(BigInt::from(c)));
    let float = Moments::build(dist.probs(), |c| c as f64);

    let len = max_index as usize + 1;
    let mut cutoffs = Vec::with_capacity(len);
    let mut hold_values = Vec::with_capacity(len);
    cutoffs.push(1u32);
    hold_values.push(0.0);

    let mut exact_hold = Some(BigRational::zero());
    let mut exact_hold_values = vec![BigRational::zero()];
    let mut float_hold = 0.0f64;
    for _ in 1..len {
        let prev = *cutoffs.last().unwrap() as usize;
        let cutoff = match exact_hold.take() {
            Some(h) => {
                let next = exact.tail[prev].clone() + &(h * &exact.head[prev]);
                float_hold = next.to_f64().expect("finite");
                let c = floor_plus_one_exact(&next);
                if next.denom().bits() <= EXACT_BIT_BUDGET {
                    exact_hold_values.push(next.clone());
                    exact_hold = Some(next);
                }
                c
            }
            None => {
                float_hold = float.tail[prev] + float_hold * float.head[prev];
                floor_plus_one_guarded(float_hold)
            }
        };
        cutoffs.push(if all_on_top { cutoff } else { cutoff.min(top) });
        hold_values.push(float_hold);
    }

    CutoffSchedule {
        kind: ScheduleKind::DaysRemaining,
        cutoffs,
        hold_values,
        exact_hold_values,
    }
}

/// Expected gain of holding one unit with `steps` future opportunity days.
pub fn hold_value(dist: &PriceDistribution, steps: u32) -> f64 {
    cutoff_schedule(dist, steps).hold_values[steps as usize]
}

/// State of one decision: day `d` of `horizon`, `units_available` held,
/// `offered_price` on offer, looking `window` days ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionContext {
    pub day: u32,
    pub horizon: u32,
    pub units_available: u32,
    pub offered_price: u32,
    pub window: Window,
}

impl DecisionContext {
    pub fn days_remaining(&self) -> u32 {
        self.horizon.saturating_sub(self.day)
    }

    /// `w = min(D - d, t)`.
    pub fn effective_window(&self) -> u32 {
        self.window.effective(self.days_remaining())
    }

    fn check(&self) -> Result<(), DecisionError> {
        if self.day == 0 || self.day > self.horizon {
            return Err(DecisionError::DayOutOfRange {
                day: self.day,
                horizon: self.horizon,
            });
        }
        if self.window == Window::Bounded(0) {
            return Err(DecisionError::ZeroWindow);
        }
        Ok(())
    }
}

/// Expected utility of selling `n` units now and holding the rest:
/// `n * i_d + (N_d - n) * f(w)`.
pub fn expected_utility(
    ctx: &DecisionContext,
    n: u32,
    schedule: &CutoffSchedule,
) -> Result<f64, DecisionError> {
    ctx.check()?;
    if n > ctx.units_available {
        return Err(DecisionError::ExceedsAvailable {
            requested: n,
            available: ctx.units_available,
        });
    }
    let hold = schedule.hold_value(ctx.effective_window())?;
    let held = (ctx.units_available - n) as f64;
    Ok(n as f64 * ctx.offered_price as f64 + held * hold)
}

/// [`expected_utility`] in exact arithmetic; `None` when the effective
/// window lies past the schedule's rational prefix.
pub fn expected_utility_exact(
    ctx: &DecisionContext,
    n: u32,
    schedule: &CutoffSchedule,
) -> Result<Option<BigRational>, DecisionError> {
    // Same checks and errors as the float version.
    expected_utility(ctx, n, schedule)?;
    let Some(hold) = schedule.exact_hold_value(ctx.effective_window()) else {
        return Ok(None);
    };
    let int = |v: u32| BigRational::from_integer(BigInt::from(v));
    Ok(Some(
        int(n) * int(ctx.offered_price) + int(ctx.units_available - n) * hold,
    ))
}

/// Units to sell: all of them when the offered price reaches the cutoff for
/// the effective window, none otherwise.
pub fn optimal_action(
    ctx: &DecisionContext,
    schedule: &CutoffSchedule,
) -> Result<u32, DecisionError> {
    ctx.check()?;
    let cutoff = schedule.cutoff(ctx.effective_window())?;
    Ok(if ctx.offered_price >= cutoff {
        ctx.units_available
    } else {
        0
    })
}

/// A model's day-by-day play of a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSeries {
    /// Units held at the moment of each day's decision, after that day's
    /// generation.
    pub available: Vec<u32>,
    pub sold: Vec<u32>,
    /// Sum of units sold times price, in price-level units.
    pub profit: u64,
}

impl DecisionSeries {
    pub fn sell_days(&self) -> usize {
        self.sold.iter().filter(|&&n| n > 0).count()
    }

    pub fn final_inventory(&self) -> u32 {
        match (self.available.last(), self.sold.last()) {
            (Some(a), Some(s)) => a - s,
            _ => 0,
        }
    }
}

/// Plays `scenario` with the threshold policy for `window`, tracking the
/// model's own inventory. Units generated on a day can be sold that day.
pub fn decide_series(
    scenario: &Scenario,
    window: Window,
    schedule: &CutoffSchedule,
) -> Result<DecisionSeries, DecisionError> {
    let horizon = scenario.horizon;
    let needed = window.effective(horizon.saturating_sub(1));
    if needed > schedule.max_index() {
        return Err(DecisionError::ScheduleTooShort {
            needed,
            len: schedule.max_index(),
        });
    }
    let mut inventory = scenario.initial_units;
    let mut available = Vec::with_capacity(horizon as usize);
    let mut sold = Vec::with_capacity(horizon as usize);
    let mut profit = 0u64;
    for day in 1..=horizon {
        inventory += scenario.generated(day);
        let ctx = DecisionContext {
            day,
            horizon,
            units_available: inventory,
            offered_price: scenario.price(day),
            window,
        };
        let n = optimal_action(&ctx, schedule)?;
        available.push(inventory);
        sold.push(n);
        inventory -= n;
        profit += n as u64 * ctx.offered_price as u64;
    }
    Ok(DecisionSeries {
        available,
        sold,
        profit,
    })
}
