//! Runs a small synthetic experiment through the harness, as the
//! `synth-run` subcommand does, and prints the aggregate trace.

use itkm::harness::{run_synthetic, ExperimentConfig};

fn main() -> itkm::Result<()> {
    let mut cfg = ExperimentConfig::from_json(
        r#"{
            "d": 32,
            "sparsity": 2,
            "iterations": 10,
            "signals_per_iteration": 4000,
            "trials": 2,
            "init_ratio": "1:1",
            "record_time": false
        }"#,
    )?;
    cfg.output_dir = std::env::temp_dir().join("itkm-harness-example");
    let report = run_synthetic(&cfg)?;
    println!("{:>4} {:>6} {:>12} {:>12}", "iter", "alg", "mean d", "recovered");
    for row in &report.aggregate {
        println!(
            "{:>4} {:>6} {:>12.4e} {:>11.0}%",
            row.iteration,
            row.algorithm.name(),
            row.d_asym.map_or(f64::NAN, |s| s.mean),
            100.0 * row.recovery_rate.map_or(f64::NAN, |s| s.mean)
        );
    }
    println!("files in {}", cfg.output_dir.display());
    Ok(())
}
