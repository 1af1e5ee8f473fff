//! Coherence, frame bounds and restricted isometry constants of the
//! Dirac+DCT dictionary and of a random one of the same size.
//!
//! ```text
//! cargo run --example dictionary_metrics -- [d]
//! ```

use itkm::dictionary::{
    coherence, compute_metrics, make_dirac_dct, random_dictionary, restricted_isometry,
    DEFAULT_SUPPORT_CAP,
};
use itkm::rng::seeded;

fn main() -> itkm::Result<()> {
    let d: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    let dirac_dct = make_dirac_dct(d)?;
    let random = random_dictionary(d, dirac_dct.n_atoms(), &mut seeded(3))?;

    for (name, dict) in [("dirac+dct", &dirac_dct), ("random", &random)] {
        let m = compute_metrics(dict);
        println!("{name} ({}x{})", dict.dim(), dict.n_atoms());
        println!("  coherence        {:.6}  (sqrt(2/d) = {:.6})", m.coherence, (2.0 / d as f64).sqrt());
        println!("  frame bounds     [{:.4}, {:.4}]", m.frame_lower, m.frame_upper);
        for s in 1..=3 {
            match restricted_isometry(dict, s, DEFAULT_SUPPORT_CAP) {
                Ok(delta) => println!("  delta_{s}          {delta:.4}"),
                Err(e) => println!("  delta_{s}          skipped: {e}"),
            }
        }
        assert_eq!(coherence(dict), m.coherence);
    }
    Ok(())
}
