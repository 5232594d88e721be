//! Participant traces and time-window fitting.
//!
//! A trace records, for each day, how many units a participant held, how
//! many they sold and the price on offer. Fitting plays the scenario under
//! every candidate window and scores each predicted series against the
//! trace with either the mean deviation of sold proportions or the
//! proportional deviation of sold units.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{
    cutoff_schedule, decide_series, optimal_action, CutoffSchedule, DecisionContext, DecisionError,
    DecisionSeries, Window,
};
use crate::market::{PriceDistribution, Scenario};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no day with units available; the fit is undefined")]
    NoAvailableDays,
    #[error("neither the model nor the participant sold anything; the fit is undefined")]
    NoSales,
    #[error("prediction covers {predicted} days but the trace has {trace}")]
    LengthMismatch { predicted: usize, trace: usize },
    #[error(
        "participant {participant}: trace covers {trace} days but the scenario has {scenario}"
    )]
    HorizonMismatch {
        participant: String,
        trace: usize,
        scenario: u32,
    },
    #[error("participant {participant}, day {day}: trace price {trace} differs from scenario price {scenario}")]
    PriceMismatch {
        participant: String,
        day: u32,
        trace: u32,
        scenario: u32,
    },
    #[error(
        "participant {participant}, day {day}: sold {sold} units with only {available} available"
    )]
    OversoldDay {
        participant: String,
        day: u32,
        available: u32,
        sold: u32,
    },
    #[error("participant {participant}: expected day {expected}, found day {found}")]
    DayGap {
        participant: String,
        expected: u32,
        found: u32,
    },
    #[error("participant {participant}: trace is empty")]
    EmptyTrace { participant: String },
    #[error("cohort report needs at least one fit")]
    EmptyCohort,
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRecord {
    pub offered_price: u32,
    pub units_available: u32,
    pub units_sold: u32,
}

/// One participant's decisions, days `1..=D` in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantTrace {
    pub participant_id: String,
    records: Vec<DayRecord>,
}

impl ParticipantTrace {
    pub fn new(
        participant_id: impl Into<String>,
        records: Vec<DayRecord>,
    ) -> Result<Self, FitError> {
        let participant_id = participant_id.into();
        for (day, r) in (1..).zip(&records) {
            if r.units_sold > r.units_available {
                return Err(FitError::OversoldDay {
                    participant: participant_id,
                    day,
                    available: r.units_available,
                    sold: r.units_sold,
                });
            }
        }
        Ok(Self {
            participant_id,
            records,
        })
    }

    /// Trace of a model's own play of `scenario`.
    pub fn from_series(
        participant_id: impl Into<String>,
        scenario: &Scenario,
        series: &DecisionSeries,
    ) -> Self {
        let records = series
            .available
            .iter()
            .zip(&series.sold)
            .zip(&scenario.offered_prices)
            .map(|((&a, &s), &p)| DayRecord {
                offered_price: p,
                units_available: a,
                units_sold: s,
            })
            .collect();
        Self {
            participant_id: participant_id.into(),
            records,
        }
    }

    pub fn records(&self) -> &[DayRecord] {
        &self.records
    }

    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn sell_days(&self) -> usize {
        self.records.iter().filter(|r| r.units_sold > 0).count()
    }

    pub fn profit(&self) -> u64 {
        self.records
            .iter()
            .map(|r| r.units_sold as u64 * r.offered_price as u64)
            .sum()
    }

    /// Checks that the trace covers the scenario day for day at the same
    /// prices, naming the first mismatching day.
    pub fn check_against(&self, scenario: &Scenario) -> Result<(), FitError> {
        if self.records.len() != scenario.horizon as usize {
            return Err(FitError::HorizonMismatch {
                participant: self.participant_id.clone(),
                trace: self.records.len(),
                scenario: scenario.horizon,
            });
        }
        for (day, (r, &p)) in (1..).zip(self.records.iter().zip(&scenario.offered_prices)) {
            if r.offered_price != p {
                return Err(FitError::PriceMismatch {
                    participant: self.participant_id.clone(),
                    day,
                    trace: r.offered_price,
                    scenario: p,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Mean deviation of sold proportions.
    Md,
    /// Proportional deviation of sold units.
    Pd,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" => Ok(Metric::Md),
            "pd" => Ok(Metric::Pd),
            _ => Err(format!("unknown metric `{s}`; expected md or pd")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Md => "md",
            Metric::Pd => "pd",
        })
    }
}

/// How predicted series are generated for comparison with a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// The model plays the whole scenario with its own inventory.
    #[default]
    SelfConsistent,
    /// Each day the model decides for the participant's actual holdings.
    CounterfactualDaily,
}

impl FromStr for PredictionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "self-consistent" => Ok(PredictionMode::SelfConsistent),
            "counterfactual-daily" => Ok(PredictionMode::CounterfactualDaily),
            _ => Err(format!(
                "unknown prediction mode `{s}`; expected self-consistent or counterfactual-daily"
            )),
        }
    }
}

fn check_lengths(trace: &ParticipantTrace, predicted: &DecisionSeries) -> Result<(), FitError> {
    if predicted.sold.len() != trace.records.len()
        || predicted.available.len() != trace.records.len()
    {
        return Err(FitError::LengthMismatch {
            predicted: predicted.sold.len(),
            trace: trace.records.len(),
        });
    }
    Ok(())
}

/// Mean, over days on which the participant held units, of the absolute
/// difference between predicted and actual sold proportions.
///
/// Each proportion is taken against the holdings of whoever made the
/// decision: the participant's `N_d` for the actual sale and the model's
/// own availability for the prediction. The two coincide whenever the
/// inventories agree.
pub fn mean_deviation(
    trace: &ParticipantTrace,
    predicted: &DecisionSeries,
) -> Result<f64, FitError> {
    check_lengths(trace, predicted)?;
    let mut total = 0.0;
    let mut days = 0usize;
    for (r, (&avail, &sold)) in trace
        .records
        .iter()
        .zip(predicted.available.iter().zip(&predicted.sold))
    {
        if r.units_available == 0 {
            continue;
        }
        let actual = r.units_sold as f64 / r.units_available as f64;
        let model = if avail == 0 {
            0.0
        } else {
            sold as f64 / avail as f64
        };
        total += (model - actual).abs();
        days += 1;
    }
    if days == 0 {
        return Err(FitError::NoAvailableDays);
    }
    Ok(total / days as f64)
}

/// `sum |n*_d - n_d| / sum max(n*_d, n_d)` over days on which the
/// participant held units; 0 is a perfect fit.
pub fn proportional_deviation(
    trace: &ParticipantTrace,
    predicted: &DecisionSeries,
) -> Result<f64, FitError> {
    check_lengths(trace, predicted)?;
    let mut diff = 0u64;
    let mut denom = 0u64;
    for (r, &sold) in trace.records.iter().zip(&predicted.sold) {
        if r.units_available == 0 {
            continue;
        }
        diff += sold.abs_diff(r.units_sold) as u64;
        denom += sold.max(r.units_sold) as u64;
    }
    if denom == 0 {
        return Err(FitError::NoSales);
    }
    Ok(diff as f64 / denom as f64)
}

pub fn deviation(
    metric: Metric,
    trace: &ParticipantTrace,
    predicted: &DecisionSeries,
) -> Result<f64, FitError> {
    match metric {
        Metric::Md => mean_deviation(trace, predicted),
        Metric::Pd => proportional_deviation(trace, predicted),
    }
}

/// Model decisions for the participant's actual holdings, day by day.
pub fn counterfactual_series(
    trace: &ParticipantTrace,
    scenario: &Scenario,
    window: Window,
    schedule: &CutoffSchedule,
) -> Result<DecisionSeries, FitError> {
    let mut available = Vec::with_capacity(trace.records.len());
    let mut sold = Vec::with_capacity(trace.records.len());
    let mut profit = 0u64;
    for (day, r) in (1..).zip(&trace.records) {
        let ctx = DecisionContext {
            day,
            horizon: scenario.horizon,
            units_available: r.units_available,
            offered_price: r.offered_price,
            window,
        };
        let n = optimal_action(&ctx, schedule)?;
        available.push(r.units_available);
        sold.push(n);
        profit += n as u64 * r.offered_price as u64;
    }
    Ok(DecisionSeries {
        available,
        sold,
        profit,
    })
}

/// Candidate windows for a horizon: `1..=D-1`, then unbounded.
pub fn candidate_windows(horizon: u32) -> Vec<Window> {
    (1..horizon)
        .map(Window::Bounded)
        .chain(std::iter::once(Window::Unbounded))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub participant_id: String,
    pub metric: Metric,
    pub scores: BTreeMap<Window, f64>,
    pub best_window: Window,
    pub best_score: f64,
    /// Days on which the participant sold at least one unit.
    pub sell_days: usize,
}

impl FitResult {
    /// Score of the unbounded (full-horizon) model.
    pub fn unbounded_score(&self) -> f64 {
        self.scores[&Window::Unbounded]
    }

    /// Lowest score among bounded windows, if any were candidates.
    pub fn best_bounded_score(&self) -> Option<f64> {
        self.scores
            .iter()
            .filter(|(w, _)| matches!(w, Window::Bounded(_)))
            .map(|(_, &s)| s)
            .min_by(f64::total_cmp)
    }
}

/// Precomputed cutoffs shared across fits on one scenario.
#[derive(Debug, Clone)]
pub struct Fitter<'a> {
    scenario: &'a Scenario,
    schedule: CutoffSchedule,
    mode: PredictionMode,
}

impl<'a> Fitter<'a> {
    pub fn new(scenario: &'a Scenario, dist: &PriceDistribution, mode: PredictionMode) -> Self {
        let schedule = cutoff_schedule(dist, scenario.horizon.saturating_sub(1));
        Self {
            scenario,
            schedule,
            mode,
        }
    }

    pub fn schedule(&self) -> &CutoffSchedule {
        &self.schedule
    }

    pub fn predict(
        &self,
        trace: &ParticipantTrace,
        window: Window,
    ) -> Result<DecisionSeries, FitError> {
        match self.mode {
            PredictionMode::SelfConsistent => {
                Ok(decide_series(self.scenario, window, &self.schedule)?)
            }
            PredictionMode::CounterfactualDaily => {
                counterfactual_series(trace, self.scenario, window, &self.schedule)
            }
        }
    }

    /// Scores every candidate window; ties go to the smallest window.
    pub fn fit(&self, trace: &ParticipantTrace, metric: Metric) -> Result<FitResult, FitError> {
        trace.check_against(self.scenario)?;
        let mut scores = BTreeMap::new();
        let mut best: Option<(Window, f64)> = None;
        for window in candidate_windows(self.scenario.horizon) {
            let predicted = self.predict(trace, window)?;
            let score = deviation(metric, trace, &predicted)?;
            scores.insert(window, score);
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((window, score));
            }
        }
        let (best_window, best_score) = best.expect("unbounded is always a candidate");
        Ok(FitResult {
            participant_id: trace.participant_id.clone(),
            metric,
            scores,
            best_window,
            best_score,
            sell_days: trace.sell_days(),
        })
    }

    /// Fits every trace in parallel; results come back ordered by
    /// participant id.
    pub fn fit_all(
        &self,
        traces: &[ParticipantTrace],
        metric: Metric,
    ) -> Result<Vec<FitResult>, FitError> {
        let mut fits = traces
            .par_iter()
            .map(|t| self.fit(t, metric))
            .collect::<Result<Vec<_>, _>>()?;
        fits.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
        Ok(fits)
    }
}

/// Best-fitting window for one participant, with self-consistent
/// predictions.
pub fn fit_window(
    trace: &ParticipantTrace,
    scenario: &Scenario,
    dist: &PriceDistribution,
    metric: Metric,
) -> Result<FitResult, FitError> {
    Fitter::new(scenario, dist, PredictionMode::SelfConsistent).fit(trace, metric)
}

/// Histogram bins for best-fitting windows: 1 through 30, then everything
/// from 31 up including the unbounded model.
pub const OPEN_BIN_START: u32 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WindowBin {
    Single(u32),
    Open,
}

impl WindowBin {
    pub fn of(window: Window) -> Self {
        match window {
            Window::Bounded(t) if t < OPEN_BIN_START => WindowBin::Single(t),
            _ => WindowBin::Open,
        }
    }

    pub fn all() -> impl Iterator<Item = WindowBin> {
        (1..OPEN_BIN_START)
            .map(WindowBin::Single)
            .chain(std::iter::once(WindowBin::Open))
    }
}

impl fmt::Display for WindowBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowBin::Single(t) => f.pad(&t.to_string()),
            WindowBin::Open => f.pad(&format!("{OPEN_BIN_START}+")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationPair {
    pub participant_id: String,
    pub sell_days: usize,
    pub unbounded_score: f64,
    pub best_score: f64,
    pub best_window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub metric: Metric,
    pub participants: usize,
    pub histogram: Vec<HistogramBin>,
    /// Ordered by sell days, then participant id.
    pub deviation_pairs: Vec<DeviationPair>,
    /// Ordered by participant id.
    pub sell_day_counts: BTreeMap<String, usize>,
}

impl CohortReport {
    pub fn count(&self, bin: WindowBin) -> usize {
        let label = bin.to_string();
        self.histogram
            .iter()
            .find(|b| b.bin == label)
            .map_or(0, |b| b.count)
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin,count,fraction\n");
        for b in &self.histogram {
            out.push_str(&format!("{},{},{}\n", b.bin, b.count, b.fraction));
        }
        out
    }
}

/// Aggregates fits into the best-window histogram and the per-participant
/// deviation pairs.
pub fn cohort_report(fits: &[FitResult]) -> Result<CohortReport, FitError> {
    let first = fits.first().ok_or(FitError::EmptyCohort)?;
    let mut counts: BTreeMap<WindowBin, usize> = WindowBin::all().map(|b| (b, 0)).collect();
    for fit in fits {
        *counts.entry(WindowBin::of(fit.best_window)).or_default() += 1;
    }
    let total = fits.len();
    let histogram = counts
        .into_iter()
        .map(|(bin, count)| HistogramBin {
            bin: bin.to_string(),
            count,
            fraction: count as f64 / total as f64,
        })
        .collect();

    let mut deviation_pairs: Vec<DeviationPair> = fits
        .iter()
        .map(|f| DeviationPair {
            participant_id: f.participant_id.clone(),
            sell_days: f.sell_days,
            unbounded_score: f.unbounded_score(),
            best_score: f.best_score,
            best_window: f.best_window,
        })
        .collect();
    deviation_pairs.sort_by(|a, b| {
        a.sell_days
            .cmp(&b.sell_days)
            .then_with(|| a.participant_id.cmp(&b.participant_id))
    });

    Ok(CohortReport {
        metric: first.metric,
        participants: total,
        histogram,
        deviation_pairs,
        sell_day_counts: fits
            .iter()
            .map(|f| (f.participant_id.clone(), f.sell_days))
            .collect(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    participant_id: String,
    day: u32,
    offered_price: u32,
    units_available: u32,
    units_sold: u32,
}

/// Reads the trace CSV
/// (`participant_id,day,offered_price,units_available,units_sold`).
///
/// Rows may be in any order; each participant's days must run `1..=D`
/// without gaps. Traces come back ordered by participant id.
pub fn read_traces<R: Read>(reader: R) -> Result<Vec<ParticipantTrace>, FitError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut grouped: BTreeMap<String, Vec<TraceRow>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: TraceRow = row?;
        grouped
            .entry(row.participant_id.clone())
            .or_default()
            .push(row);
    }
    grouped
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|r| r.day);
            for (expected, r) in (1..).zip(&rows) {
                if r.day != expected {
                    return Err(FitError::DayGap {
                        participant: id,
                        expected,
                        found: r.day,
                    });
                }
            }
            if rows.is_empty() {
                return Err(FitError::EmptyTrace { participant: id });
            }
            let records = rows
                .iter()
                .map(|r| DayRecord {
                    offered_price: r.offered_price,
                    units_available: r.units_available,
                    units_sold: r.units_sold,
                })
                .collect();
            ParticipantTrace::new(id, records)
        })
        .collect()
}

/// Writes traces in the same CSV layout [`read_traces`] accepts.
pub fn write_traces<W: Write>(writer: W, traces: &[ParticipantTrace]) -> Result<(), FitError> {
    let mut wtr = csv::Writer::from_writer(writer);
    // Header even with no rows.
    wtr.write_record([
        "participant_id",
        "day",
        "offered_price",
        "units_available",
        "units_sold",
    ])?;
    for t in traces {
        for (day, r) in (1..).zip(&t.records) {
            wtr.serialize((
                &t.participant_id,
                day,
                r.offered_price,
                r.units_available,
                r.units_sold,
            ))?;
        }
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn traces_to_csv(traces: &[ParticipantTrace]) -> String {
    let mut buf = Vec::new();
    write_traces(&mut buf, traces).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}
