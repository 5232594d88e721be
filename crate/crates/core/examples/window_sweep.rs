//! Mean profit and sell frequency by window over many sampled scenarios.
//!
//!     cargo run --release --example window_sweep [scenarios]

use prosumer::decision::Window;
use prosumer::market::{standard_price_distribution, GenerationDistribution};
use prosumer::simulation::{sweep_windows, SweepConfig};

fn main() {
    let scenarios = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2000);
    let config = SweepConfig {
        windows: [1, 2, 3, 4, 5, 6, 9, 16, 31]
            .into_iter()
            .map(Window::Bounded)
            .chain([Window::Unbounded])
            .collect(),
        scenarios,
        horizon: 68,
        seed: 0,
        weekend_offset: 0.0,
    };
    let result = sweep_windows(
        &config,
        &standard_price_distribution(),
        &GenerationDistribution::standard(),
    )
    .unwrap();
    println!("   window  mean profit  sell days  sell freq");
    for s in &result.summaries {
        println!(
            "{:>9}  {:>11.2}  {:>9.2}  {:>9.3}",
            s.window, s.mean_profit, s.mean_sell_days, s.mean_sell_frequency
        );
    }
}
