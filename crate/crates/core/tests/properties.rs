mod common;

use proptest::prelude::*;
use prosumer::decision::{cutoff_schedule, decide_series, Window};
use prosumer::fitting::{
    mean_deviation, proportional_deviation, DayRecord, Fitter, Metric, ParticipantTrace,
    PredictionMode,
};
use prosumer::market::{
    at_least_once_probabilities, generate_scenario, standard_price_distribution,
    GenerationDistribution, PriceDistribution, Scenario,
};
use prosumer::simulation::{run_population, sweep_windows, AgentSpec, SweepConfig};
use prosumer::DecisionSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn distribution() -> impl Strategy<Value = PriceDistribution> {
    (1usize..=15, any::<u64>()).prop_map(|(levels, seed)| {
        common::random_distribution(&mut ChaCha8Rng::seed_from_u64(seed), levels)
    })
}

fn scenario(horizon: u32, seed: u64) -> Scenario {
    generate_scenario(
        &standard_price_distribution(),
        &GenerationDistribution::standard(),
        horizon,
        seed,
        0.0,
    )
    .unwrap()
}

fn records() -> impl Strategy<Value = Vec<DayRecord>> {
    prop::collection::vec((1u32..=15, 0u32..=8, 0u32..=8), 1..40).prop_map(|days| {
        days.into_iter()
            .map(|(price, a, s)| DayRecord {
                offered_price: price,
                units_available: a,
                units_sold: s.min(a),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn at_least_once_grows_with_days(dist in distribution(), days in 1u32..200) {
        let now = at_least_once_probabilities(&dist, days);
        let later = at_least_once_probabilities(&dist, days + 1);
        for (a, b) in now.iter().zip(&later) {
            prop_assert!(a <= b);
            prop_assert!((0.0..=1.0).contains(b));
        }
    }

    #[test]
    fn cutoffs_and_hold_values_never_decrease(dist in distribution(), max_index in 0u32..300) {
        let s = cutoff_schedule(&dist, max_index);
        prop_assert_eq!(s.cutoffs()[0], 1);
        prop_assert!(s.cutoffs().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.hold_values().windows(2).all(|w| w[0] <= w[1]));
        let top = dist.max_level();
        prop_assert!(s.hold_values().iter().all(|&h| h <= top as f64 + 1e-9));
    }

    #[test]
    fn threshold_replay_matches_decide_series(seed in any::<u64>(), horizon in 1u32..90, t in 1u32..100) {
        let sc = scenario(horizon, seed);
        let s = cutoff_schedule(&standard_price_distribution(), horizon - 1);
        for w in [Window::Bounded(t), Window::Unbounded] {
            let series = decide_series(&sc, w, &s).unwrap();
            prop_assert_eq!(&series.sold, &common::replay_with_cutoffs(&sc, w, s.cutoffs()));
            prop_assert_eq!(series.final_inventory(), 0);
        }
    }

    #[test]
    fn long_windows_equal_the_unbounded_model(seed in any::<u64>(), horizon in 1u32..90, extra in 0u32..20) {
        let sc = scenario(horizon, seed);
        let s = cutoff_schedule(&standard_price_distribution(), horizon - 1);
        let eut = decide_series(&sc, Window::Unbounded, &s).unwrap();
        let long = decide_series(&sc, Window::Bounded(horizon.saturating_sub(1).max(1) + extra), &s).unwrap();
        prop_assert_eq!(eut, long);
    }

    #[test]
    fn metrics_ignore_participant_labels(recs in records(), pred_seed in any::<u64>()) {
        let a = ParticipantTrace::new("alice", recs.clone()).unwrap();
        let b = ParticipantTrace::new("p-017", recs).unwrap();
        let pred = prediction(&a, pred_seed);
        prop_assert_eq!(mean_deviation(&a, &pred).ok(), mean_deviation(&b, &pred).ok());
        prop_assert_eq!(proportional_deviation(&a, &pred).ok(), proportional_deviation(&b, &pred).ok());
    }

    #[test]
    fn metrics_ignore_idle_days(recs in records(), pred_seed in any::<u64>(), idle in 1usize..5) {
        let base = ParticipantTrace::new("p", recs.clone()).unwrap();
        let pred = prediction(&base, pred_seed);
        let mut padded_recs = recs;
        let mut padded_pred = pred.clone();
        for _ in 0..idle {
            padded_recs.push(DayRecord { offered_price: 3, units_available: 0, units_sold: 0 });
            padded_pred.available.push(0);
            padded_pred.sold.push(0);
        }
        let padded = ParticipantTrace::new("p", padded_recs).unwrap();
        prop_assert_eq!(mean_deviation(&base, &pred).ok(), mean_deviation(&padded, &padded_pred).ok());
        prop_assert_eq!(
            proportional_deviation(&base, &pred).ok(),
            proportional_deviation(&padded, &padded_pred).ok()
        );
    }

    #[test]
    fn simulated_agents_conserve_units(seed in any::<u64>(), horizon in 1u32..80, noise in 0.0f64..0.45) {
        let sc = scenario(horizon, seed);
        let agents: Vec<AgentSpec> = [Window::Bounded(1), Window::Bounded(7), Window::Unbounded]
            .into_iter()
            .enumerate()
            .map(|(k, w)| AgentSpec::new(format!("a{k}"), w).with_noise(noise))
            .collect();
        let dist = standard_price_distribution();
        let first = run_population(&agents, &sc, &dist, seed).unwrap();
        let again = run_population(&agents, &sc, &dist, seed).unwrap();
        prop_assert_eq!(&first, &again);
        for a in &first.agents {
            let sold: u64 = a.trace.records().iter().map(|r| r.units_sold as u64).sum();
            prop_assert_eq!(sold + a.final_inventory as u64, sc.total_units());
            let revenue: u64 = a.trace.records().iter().map(|r| r.units_sold as u64 * r.offered_price as u64).sum();
            prop_assert_eq!(revenue, a.profit);
        }
    }
}

/// A model-like prediction for `trace`: sells all or nothing of a random
/// availability each day.
fn prediction(trace: &ParticipantTrace, seed: u64) -> DecisionSeries {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let available: Vec<u32> = trace
        .records()
        .iter()
        .map(|_| rng.gen_range(0..=8))
        .collect();
    let sold = available
        .iter()
        .map(|&a| if rng.gen_bool(0.4) { a } else { 0 })
        .collect();
    DecisionSeries {
        available,
        sold,
        profit: 0,
    }
}

#[test]
fn sampled_prices_follow_the_table() {
    let dist = standard_price_distribution();
    let horizon = 20_000;
    for seed in [1u64, 2, 3] {
        let sc = generate_scenario(
            &dist,
            &GenerationDistribution::standard(),
            horizon,
            seed,
            0.0,
        )
        .unwrap();
        let mut counts = [0f64; 15];
        for &p in &sc.offered_prices {
            counts[p as usize - 1] += 1.0;
        }
        let n = horizon as f64;
        let stat: f64 = counts
            .iter()
            .zip(dist.probs())
            .map(|(&o, &p)| (o - n * p).powi(2) / (n * p))
            .sum();
        let critical = ChiSquared::new(14.0).unwrap().inverse_cdf(0.999);
        assert!(
            stat < critical,
            "seed {seed}: chi-square {stat} >= {critical}"
        );
        assert!(
            (sc.mean_price() - 6.61).abs() < 0.1,
            "mean {}",
            sc.mean_price()
        );
        let none = sc.generated_units.iter().filter(|&&g| g == 0).count() as f64 / n;
        assert!((none - 0.15).abs() < 0.02, "zero-generation share {none}");
    }
}

#[test]
fn all_price_one_path_sells_only_at_the_deadline() {
    let sc = Scenario::from_paths(vec![1; 68], vec![1; 68], 5);
    let s = cutoff_schedule(&standard_price_distribution(), 67);
    let out = run_population(
        &[AgentSpec::new("eut", Window::Unbounded)],
        &sc,
        &standard_price_distribution(),
        0,
    )
    .unwrap();
    let agent = &out.agents[0];
    assert_eq!(agent.sell_days, 1);
    assert_eq!(agent.trace.records()[67].units_sold, 73);
    assert_eq!(agent.profit, 73);
    let all_top = Scenario::from_paths(vec![15; 10], vec![1; 10], 5);
    let series = decide_series(&all_top, Window::Unbounded, &s).unwrap();
    assert!(series.sold.iter().all(|&n| n > 0));
}

#[test]
fn window_sweep_population_trends() {
    let windows: Vec<Window> = (1..=20)
        .map(Window::Bounded)
        .chain([Window::Bounded(68), Window::Unbounded])
        .collect();
    let config = SweepConfig {
        windows: windows.clone(),
        scenarios: 1000,
        horizon: 68,
        seed: 11,
        weekend_offset: 0.0,
    };
    let result = sweep_windows(
        &config,
        &standard_price_distribution(),
        &GenerationDistribution::standard(),
    )
    .unwrap();
    let freq: Vec<f64> = result.summaries.iter().map(|s| s.mean_sell_days).collect();
    assert!(freq[..20].windows(2).all(|w| w[1] <= w[0]), "{freq:?}");
    assert!(freq[19] < freq[0]);
    let long = &result.summaries[20];
    let eut = &result.summaries[21];
    assert_eq!(long.mean_sell_days, eut.mean_sell_days);
    assert_eq!(long.mean_profit, eut.mean_profit);
    assert!(eut.mean_profit >= result.summaries[0].mean_profit);
    // Per path, sell days never grow with the window.
    for row in &result.sell_days {
        assert!(row.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fits_are_insensitive_to_trace_order_and_threads() {
    let dist = standard_price_distribution();
    let sc = scenario(68, 4);
    let agents: Vec<AgentSpec> = (1..=12)
        .map(|t| AgentSpec::new(format!("a{t:02}"), Window::Bounded(t)).with_noise(0.1))
        .collect();
    let traces = run_population(&agents, &sc, &dist, 3).unwrap().traces();
    let fitter = Fitter::new(&sc, &dist, PredictionMode::SelfConsistent);
    let forward = fitter.fit_all(&traces, Metric::Pd).unwrap();
    let mut reversed = traces.clone();
    reversed.reverse();
    assert_eq!(forward, fitter.fit_all(&reversed, Metric::Pd).unwrap());
    let serial: Vec<_> = traces
        .iter()
        .map(|t| fitter.fit(t, Metric::Pd).unwrap())
        .collect();
    assert_eq!(forward, serial);
}
