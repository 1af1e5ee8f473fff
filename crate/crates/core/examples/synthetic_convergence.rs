//! Runs ITKsM and ITKrM side by side from a 1:1 perturbation of the
//! Dirac+DCT dictionary and prints the distance to the generator per
//! iteration.
//!
//! ```text
//! cargo run --release --example synthetic_convergence -- [d] [S] [N] [iterations] [noisy]
//! ```

use itkm::dictionary::{make_dirac_dct, perturb_init, InitRatio};
use itkm::learner::{learn, Algorithm, LearnerConfig, SyntheticSource};
use itkm::model::{unit_snr_sigma, CoefficientSpec};
use itkm::rng::seeded;

fn main() -> itkm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let d = arg(0, 64);
    let s = arg(1, 4);
    let n = arg(2, 8192);
    let iterations = arg(3, 40);
    let noisy = args.get(4).is_some_and(|a| a == "noisy");

    let generating = make_dirac_dct(d)?;
    let k = generating.n_atoms();
    let (spec, sigma) = if noisy {
        (CoefficientSpec::geometric(s, k)?, unit_snr_sigma(d))
    } else {
        (CoefficientSpec::flat(s, k)?, 0.0)
    };
    let init = perturb_init(&generating, InitRatio::new(1.0, 1.0)?, &mut seeded(1));

    let mut traces = Vec::new();
    for algorithm in [Algorithm::Itksm, Algorithm::Itkrm] {
        let mut source = SyntheticSource {
            dictionary: generating.clone(),
            spec,
            noise_sigma: sigma,
        };
        let mut config = LearnerConfig::new(algorithm, s, iterations, n);
        config.parallel = true;
        config.seed = 7;
        traces.push(learn(&init, &config, &mut source)?.metrics);
    }

    println!("{:>5} {:>14} {:>14}", "iter", "itksm", "itkrm");
    for (a, b) in traces[0].iter().zip(&traces[1]) {
        println!(
            "{:>5} {:>14.6e} {:>14.6e}",
            a.iteration,
            a.d_asym.unwrap_or(f64::NAN),
            b.d_asym.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
