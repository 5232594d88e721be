//! Cutoff prices for the fifteen-level price table, as bands and as the
//! full per-index table.
//!
//!     cargo run --example cutoff_table [max_index]

use prosumer::decision::cutoff_schedule;
use prosumer::market::standard_price_distribution;

fn main() {
    let max_index: u32 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("max_index must be a number"))
        .unwrap_or(67);
    let dist = standard_price_distribution();
    println!(
        "mean price level {:.2} (${:.3})",
        dist.mean(),
        dist.mean() / 10.0
    );

    let schedule = cutoff_schedule(&dist, max_index);
    println!();
    print!("{}", schedule.banded_table());

    println!("\nindex  cutoff  hold value");
    for (k, (c, h)) in schedule
        .cutoffs()
        .iter()
        .zip(schedule.hold_values())
        .enumerate()
        .take(12)
    {
        println!("{k:>5}  {c:>6}  {h:.6}");
    }
}
