//! Expected utility of selling `n` of `N` units at a few prices, showing
//! that the best choice is always all or nothing.
//!
//!     cargo run --example expected_utility

use prosumer::decision::{
    cutoff_schedule, expected_utility, optimal_action, DecisionContext, Window,
};
use prosumer::market::standard_price_distribution;

fn main() {
    let schedule = cutoff_schedule(&standard_price_distribution(), 67);
    for (window, price) in [
        (Window::Bounded(1), 6),
        (Window::Bounded(1), 7),
        (Window::Bounded(5), 9),
        (Window::Bounded(5), 10),
        (Window::Unbounded, 13),
        (Window::Unbounded, 14),
    ] {
        let ctx = DecisionContext {
            day: 20,
            horizon: 68,
            units_available: 4,
            offered_price: price,
            window,
        };
        let utilities: Vec<String> = (0..=4)
            .map(|n| format!("{:.3}", expected_utility(&ctx, n, &schedule).unwrap()))
            .collect();
        println!(
            "window {window:>9}, price {price:>2}: EU(n = 0..4) = [{}] -> sell {}",
            utilities.join(", "),
            optimal_action(&ctx, &schedule).unwrap()
        );
    }
}
