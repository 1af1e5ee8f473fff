//! Writes a dictionary as binary and CSV, reads both back, and saves a
//! signal batch with its oracle sidecar.

use itkm::dataio::{
    load_dictionary, read_batch_sidecar, save_dictionary, save_signal_batch, sidecar_path,
};
use itkm::dictionary::make_dirac_dct;
use itkm::model::{draw_batch, CoefficientSpec};
use itkm::rng::seeded;

fn main() -> itkm::Result<()> {
    let dir = std::env::temp_dir().join("itkm-file-formats");
    std::fs::create_dir_all(&dir).map_err(|e| itkm::Error::Io { path: dir.clone(), source: e })?;
    let dict = make_dirac_dct(8)?;

    for name in ["dict.itkm", "dict.csv"] {
        let path = dir.join(name);
        save_dictionary(&path, &dict)?;
        let back = load_dictionary(&path)?;
        println!("{}: identical = {}", path.display(), back == dict);
    }

    let spec = CoefficientSpec::geometric(2, dict.n_atoms())?;
    let batch = draw_batch(&dict, &spec, 0.05, 4, &mut seeded(2))?;
    let path = dir.join("batch.itkm");
    save_signal_batch(&path, &batch)?;
    let side = sidecar_path(&path);
    let records = read_batch_sidecar(std::fs::File::open(&side).unwrap())?;
    println!("{} oracle rows in {}", records.len(), side.display());
    println!("first: {:?}", records[0]);
    Ok(())
}
