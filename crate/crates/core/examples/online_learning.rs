//! The streaming form of one iteration: signals are pushed one at a time
//! and only the per-atom sums are kept. Several such passes make a short
//! learning run.

use itkm::dictionary::{distance_asym, make_dirac_dct, perturb_init, InitRatio};
use itkm::learner::{Accumulator, Algorithm, ReplacementPolicy};
use itkm::model::{draw_signal, CoefficientSpec};
use itkm::rng::seeded;
use itkm::sparse::ProjectionStrategy;

fn main() -> itkm::Result<()> {
    let generating = make_dirac_dct(16)?;
    let spec = CoefficientSpec::flat(2, generating.n_atoms())?;
    let mut dict = perturb_init(&generating, InitRatio::new(2.0, 1.0)?, &mut seeded(0));
    let mut rng = seeded(9);
    println!("iter 0: d = {:.3e}", distance_asym(&dict, &generating)?);
    for it in 1..=8 {
        let mut acc = Accumulator::new(&dict, Algorithm::Itkrm, 2, ProjectionStrategy::GramPrecompute)?;
        for _ in 0..4000 {
            let signal = draw_signal(&generating, &spec, 0.0, &mut rng)?;
            acc.push(&signal.signal)?;
        }
        dict = acc.finish(ReplacementPolicy::RandomRedraw, &mut rng).dictionary;
        println!("iter {it}: d = {:.3e}", distance_asym(&dict, &generating)?);
    }
    Ok(())
}
