//! Fits a best window to each member of a noisy synthetic cohort under both
//! deviation metrics and prints the window histogram.
//!
//!     cargo run --release --example fit_cohort

use prosumer::decision::Window;
use prosumer::fitting::{cohort_report, Fitter, Metric, PredictionMode, WindowBin};
use prosumer::market::{generate_scenario, standard_price_distribution, GenerationDistribution};
use prosumer::simulation::{run_population, AgentSpec};

fn main() {
    let dist = standard_price_distribution();
    let scenario =
        generate_scenario(&dist, &GenerationDistribution::standard(), 68, 3, 0.0).unwrap();
    let agents: Vec<AgentSpec> = [1, 2, 3, 4, 5, 7, 10, 20]
        .into_iter()
        .map(Window::Bounded)
        .chain([Window::Unbounded])
        .flat_map(|w| (0..4).map(move |k| AgentSpec::new(format!("{w}-{k}"), w).with_noise(0.05)))
        .collect();
    let traces = run_population(&agents, &scenario, &dist, 11)
        .unwrap()
        .traces();
    let fitter = Fitter::new(&scenario, &dist, PredictionMode::SelfConsistent);

    for metric in [Metric::Md, Metric::Pd] {
        let fits = fitter.fit_all(&traces, metric).unwrap();
        let report = cohort_report(&fits).unwrap();
        println!("{metric}:");
        for fit in fits.iter().take(6) {
            println!(
                "  {:<14} best {:>9} score {:.3} (unbounded {:.3})",
                fit.participant_id,
                fit.best_window,
                fit.best_score,
                fit.unbounded_score()
            );
        }
        let bars: Vec<String> = WindowBin::all()
            .filter(|&b| report.count(b) > 0)
            .map(|b| format!("{b}: {}", "#".repeat(report.count(b))))
            .collect();
        println!("  histogram\n    {}", bars.join("\n    "));
    }
}
