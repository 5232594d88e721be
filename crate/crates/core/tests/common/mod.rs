//! Brute-force references shared by the integration tests. None of these
//! call into the hold-value recursion.

#![allow(dead_code)]

use prosumer::decision::Window;
use prosumer::market::{PriceDistribution, Scenario};
use rand::Rng;

/// Mean price, as a direct dot product.
pub fn mean(probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1) as f64 * p)
        .sum()
}

/// Every price path of length `days` over `levels` prices with its
/// probability, in lexicographic order.
pub fn all_paths(probs: &[f64], days: usize) -> Vec<(Vec<u32>, f64)> {
    let levels = probs.len();
    let total = levels.pow(days as u32);
    (0..total)
        .map(|mut code| {
            let mut path = Vec::with_capacity(days);
            let mut prob = 1.0;
            for _ in 0..days {
                let level = code % levels;
                code /= levels;
                path.push(level as u32 + 1);
                prob *= probs[level];
            }
            (path, prob)
        })
        .collect()
}

/// Expected revenue of one unit when it is sold on the first day `d`
/// whose price reaches `threshold_by_remaining[D - d]`, by enumerating every
/// price path. The unit is sold on the last day whatever the price.
pub fn threshold_policy_revenue(probs: &[f64], days: usize, threshold_by_remaining: &[u32]) -> f64 {
    all_paths(probs, days)
        .into_iter()
        .map(|(path, prob)| {
            let sale = path
                .iter()
                .enumerate()
                .find(|(d, &price)| {
                    let remaining = days - 1 - d;
                    remaining == 0 || price >= threshold_by_remaining[remaining]
                })
                .map(|(_, &p)| p)
                .expect("last day always sells");
            prob * sale as f64
        })
        .sum()
}

/// Best achievable expected revenue for one unit over `days`, by expanding
/// the full tree of price histories: at each node the seller either takes
/// today's price or continues, and continuing averages over every possible
/// next price.
pub fn expectimax_revenue(probs: &[f64], days: usize) -> f64 {
    fn node(probs: &[f64], history: &mut Vec<u32>, days: usize) -> f64 {
        let today = *history.last().unwrap() as f64;
        if history.len() == days {
            return today;
        }
        let mut cont = 0.0;
        for (i, p) in probs.iter().enumerate() {
            history.push(i as u32 + 1);
            cont += p * node(probs, history, days);
            history.pop();
        }
        today.max(cont)
    }
    let mut history = Vec::with_capacity(days);
    let mut total = 0.0;
    for (i, p) in probs.iter().enumerate() {
        history.push(i as u32 + 1);
        total += p * node(probs, &mut history, days);
        history.pop();
    }
    total
}

/// Best expected revenue over every policy that, on each day, sells at an
/// arbitrary subset of prices (`2^(I*(D-1))` policies), each scored by full
/// path enumeration. Only feasible for tiny `I` and `D`.
pub fn best_price_set_policy(probs: &[f64], days: usize) -> f64 {
    let levels = probs.len();
    let paths = all_paths(probs, days);
    let bits = levels * (days - 1);
    let mut best = f64::NEG_INFINITY;
    for policy in 0u64..(1u64 << bits) {
        let sells = |day: usize, price: u32| -> bool {
            day == days - 1 || policy >> (day * levels + price as usize - 1) & 1 == 1
        };
        let value: f64 = paths
            .iter()
            .map(|(path, prob)| {
                let d = (0..days).find(|&d| sells(d, path[d])).unwrap();
                prob * path[d] as f64
            })
            .sum();
        best = best.max(value);
    }
    best
}

/// Random distribution with two-decimal probabilities over `levels` prices.
pub fn random_distribution(rng: &mut impl Rng, levels: usize) -> PriceDistribution {
    let mut weights = vec![0u32; levels];
    for _ in 0..100 {
        weights[rng.gen_range(0..levels)] += 1;
    }
    let probs: Vec<f64> = weights.iter().map(|&w| w as f64 / 100.0).collect();
    PriceDistribution::new(probs).expect("hundredths summing to one")
}

/// Window candidates in increasing order of patience.
pub fn all_windows(horizon: u32) -> Vec<Window> {
    (1..horizon)
        .map(Window::Bounded)
        .chain(std::iter::once(Window::Unbounded))
        .collect()
}

/// Independent re-implementation of a model's play: sells everything held
/// whenever the price reaches `cutoffs[min(D - d, t)]`.
pub fn replay_with_cutoffs(scenario: &Scenario, window: Window, cutoffs: &[u32]) -> Vec<u32> {
    let mut held = scenario.initial_units;
    let mut sold = Vec::new();
    for d in 1..=scenario.horizon {
        held += scenario.generated_units[d as usize - 1];
        let remaining = scenario.horizon - d;
        let w = match window {
            Window::Bounded(t) => remaining.min(t),
            Window::Unbounded => remaining,
        };
        let n = if scenario.offered_prices[d as usize - 1] >= cutoffs[w as usize] {
            held
        } else {
            0
        };
        sold.push(n);
        held -= n;
    }
    sold
}
