//! Asymmetric and symmetric distances, atom alignment and recovery rates
//! between a dictionary and a shuffled, sign-flipped, perturbed copy.

use itkm::dictionary::{
    distance_asym, distance_sym, make_dirac_dct, perturb_init, recovery_stats, InitRatio,
    RECOVERY_THRESHOLD,
};
use itkm::rng::seeded;
use rand::seq::SliceRandom;

fn main() -> itkm::Result<()> {
    let phi = make_dirac_dct(16)?;
    let k = phi.n_atoms();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut seeded(4));
    let signs: Vec<f64> = (0..k).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
    let shuffled = phi.permuted(&perm, &signs)?;

    for ratio in ["1:0", "10:1", "1:1"] {
        let psi = perturb_init(&shuffled, ratio.parse::<InitRatio>()?, &mut seeded(8));
        let sym = distance_sym(&phi, &psi)?;
        let (aligned, _) = psi.aligned_to(&phi)?;
        println!(
            "ratio {ratio:>5}: d(psi, phi) {:.4}  d(phi, psi) {:.4}  d_sym {:.4}  recovered {:.0}%",
            distance_asym(&psi, &phi)?,
            distance_asym(&phi, &psi)?,
            sym.distance,
            100.0 * recovery_stats(&psi, &phi, RECOVERY_THRESHOLD)?.rate
        );
        let worst = (0..k)
            .map(|j| (aligned.atom(j) - phi.atom(j)).norm())
            .fold(0.0, f64::max);
        println!("             after alignment max atom error {worst:.4}");
    }
    Ok(())
}
