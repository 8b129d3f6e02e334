//! Drives the experiment harness from code instead of the CLI: parse a
//! config, run the grid, inspect the rows, write the CSV/SVG artifacts.
//!
//!     cargo run --release --example run_experiment

use suplab::harness::{run_experiment, write_outputs, ExperimentConfig, OutputFormat};
use suplab::Result;

fn main() -> Result<()> {
    let config = ExperimentConfig::from_toml_str(
        r#"
        kind = "interference"
        seed = 7
        trials = 30

        [world]
        d1 = 64

        [sweep]
        d2 = [8, 16, 32, 48]
        "#,
    )?;

    let result = run_experiment(&config)?;
    println!(
        "{} rows, {} failed grid points, seed {}",
        result.rows.len(),
        result.failures.len(),
        result.provenance.seed
    );
    println!("{:>4} {:>10} {:>18} {:>10} {:>26}", "d2", "estimator", "metric", "mean", "90% ci");
    for row in &result.rows {
        println!(
            "{:>4} {:>10} {:>18} {:>10.4} [{:>10.4}, {:>10.4}]",
            row.axis("d2").unwrap_or("?"),
            row.axis("estimator").unwrap_or("?"),
            row.metric,
            row.mean,
            row.ci_low,
            row.ci_high
        );
    }

    let out = std::env::temp_dir().join("suplab-example-out");
    let written = write_outputs(&result, &out, OutputFormat::Both, "interference")?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
