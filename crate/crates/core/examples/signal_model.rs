//! Draws signals from the sparse model with flat and geometric coefficients
//! and prints the gap statistics that enter the convergence bounds.

use itkm::dictionary::make_dirac_dct;
use itkm::model::{draw_batch, statistics, unit_snr_sigma, CoefficientSpec};
use itkm::rng::seeded;

fn main() -> itkm::Result<()> {
    let dict = make_dirac_dct(32)?;
    let k = dict.n_atoms();
    let s = 4;
    let cases = [
        ("flat, noiseless", CoefficientSpec::flat(s, k)?, 0.0),
        ("geometric, SNR 1", CoefficientSpec::geometric(s, k)?, unit_snr_sigma(32)),
    ];
    for (name, spec, sigma) in cases {
        let batch = draw_batch(&dict, &spec, sigma, 2000, &mut seeded(5))?;
        let stats = statistics(&spec, sigma, dict.dim(), 50_000, &mut seeded(6))?;
        let max_norm = batch.signals.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        println!("{name}");
        println!("  first support    {:?} signs {:?}", batch.supports[0], batch.signs[0]);
        println!("  coefficients     {:?}", batch.coefficients[0]);
        println!("  max signal norm  {max_norm:.4}");
        println!(
            "  beta {:.4}  Delta {:.4}  gamma1 {:.4}  gamma2 {:.4}  C_r {:.4}  (MC samples {})",
            stats.beta_s, stats.delta_s, stats.gamma1_s, stats.gamma2_s, stats.c_r, stats.mc_samples
        );
    }
    Ok(())
}
