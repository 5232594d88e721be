//! Samples a price and generation path, with and without a weekend price
//! dip, and prints the at-least-once table a player sees on day one.
//!
//!     cargo run --example scenario_generation [seed]

use prosumer::market::{
    at_least_once_probabilities, generate_scenario, standard_price_distribution, DayKind,
    GenerationDistribution,
};

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let dist = standard_price_distribution();
    let gen = GenerationDistribution::standard();

    let flat = generate_scenario(&dist, &gen, 68, seed, 0.0).unwrap();
    let dipped = generate_scenario(&dist, &gen, 68, seed, 0.2).unwrap();
    println!("day kind     price  dipped  generated");
    for day in 1..=14 {
        let kind = match flat.day_kinds[day as usize - 1] {
            DayKind::Weekday => "weekday",
            DayKind::Weekend => "weekend",
        };
        println!(
            "{day:>3} {kind:<8} {:>5} {:>7} {:>10}",
            flat.price(day),
            dipped.price(day),
            flat.generated(day)
        );
    }
    println!(
        "mean price {:.3} flat, {:.3} with weekend dip; {} units over {} days",
        flat.mean_price(),
        dipped.mean_price(),
        flat.total_units(),
        flat.horizon
    );

    println!("\nchance of each price at least once in the 68 days");
    for (level, p) in dist.levels().zip(at_least_once_probabilities(&dist, 68)) {
        println!("{level:>3}  {p:.4}");
    }
}
