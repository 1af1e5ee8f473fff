//! Thresholding and orthogonal projection for one signal, then the
//! thresholding failure rate of the generating dictionary on a batch.

use itkm::dictionary::make_dirac_dct;
use itkm::model::{draw_batch, CoefficientSpec};
use itkm::rng::seeded;
use itkm::sparse::{count_failures, project, threshold, ProjectionStrategy, ProjectionWorkspace};

fn main() -> itkm::Result<()> {
    let dict = make_dirac_dct(32)?;
    let spec = CoefficientSpec::flat(3, dict.n_atoms())?;
    let batch = draw_batch(&dict, &spec, 0.0, 5000, &mut seeded(1))?;

    let y = batch.signals.column(0).into_owned();
    let support = threshold(&dict, &y, 3)?;
    println!("generating support {:?}", batch.supports[0]);
    println!("thresholded        {:?} (scores {:.4?})", support.indices(), support.scores());

    for strategy in [ProjectionStrategy::GramPrecompute, ProjectionStrategy::FactorPerSignal] {
        let mut ws = ProjectionWorkspace::new(&dict, strategy);
        let p = project(&dict, support.indices(), &y, &mut ws)?;
        println!("{strategy:?}: residual norm {:.3e}", p.residual.norm());
    }

    let f = count_failures(&dict, &batch, 3)?;
    println!(
        "failures on {} signals: {} supports, {} signs",
        batch.len(),
        f.support_mismatches,
        f.sign_mismatches
    );
    Ok(())
}
