//! Convergence radii, limiting errors and iteration counts for the
//! Dirac+DCT dictionary, noiseless and at SNR 1.

use itkm::bounds::{self, TheoryInputs};
use itkm::dictionary::{compute_metrics, make_dirac_dct};
use itkm::model::{statistics, unit_snr_sigma, CoefficientSpec};
use itkm::rng::seeded;

fn main() -> itkm::Result<()> {
    let d = 256;
    let dict = make_dirac_dct(d)?;
    let metrics = compute_metrics(&dict);
    for (s, sigma) in [(2, 0.0), (4, unit_snr_sigma(d))] {
        let spec = CoefficientSpec::flat(s, dict.n_atoms())?;
        let stats = statistics(&spec, sigma, d, 20_000, &mut seeded(0))?;
        let inputs = TheoryInputs::from_parts(d, dict.n_atoms(), s, &metrics, &stats, sigma, 1e-3);
        println!("S = {s}, rho = {sigma:.4}");
        println!("{}", bounds::report(&inputs)?);
    }
    Ok(())
}
