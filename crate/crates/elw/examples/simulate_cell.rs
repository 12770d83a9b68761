//! One Monte Carlo cell through the replication harness, from the library
//! API rather than the CLI.
//!
//! ```bash
//! cargo run --example simulate_cell
//! ```

use elw::simulation::{run_replications, ExampleConfig, IntervalMode, SimulationConfig};

fn main() {
    let example = ExampleConfig::MissingData { gamma: 2.5, c: 1.0 };
    let config = SimulationConfig {
        example,
        model: 2,
        n_total: 2000,
        reps: 500, // the published tables use 5000; 500 keeps this instant
        seed: 42,
        estimators: SimulationConfig::default_estimators(&example),
        intervals: IntervalMode::Wald,
        level: 0.95,
        fit_scores: false,
    };
    let table = run_replications(&config).unwrap();

    println!("missing-data cell: gamma 2.5, noise 1.0, model 2, N = 2000, {} reps\n", config.reps);
    println!("{:<10} {:>8} {:>9} {:>9} {:>9} {:>6}", "estimator", "rmse", "bias", "coverage", "length", "used");
    for row in &table.rows {
        println!(
            "{:<10} {:>8.3} {:>9.5} {:>9} {:>9} {:>6}",
            row.estimator,
            row.rmse,
            row.bias,
            row.coverage.map(|v| format!("{:.3}", v)).unwrap_or_else(|| "-".into()),
            row.avg_length.map(|v| format!("{:.4}", v)).unwrap_or_else(|| "-".into()),
            row.reps_used,
        );
    }

    // The same table serialized the way the CLI emits it.
    println!("\nCSV form:");
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    print!("{}", String::from_utf8(buf).unwrap());
}
