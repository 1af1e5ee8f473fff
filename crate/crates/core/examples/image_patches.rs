//! Learns a patch dictionary on a PGM image (or a generated test pattern)
//! and writes the mosaic as a PGM.
//!
//! ```text
//! cargo run --release --example image_patches -- [image.pgm] [iterations]
//! ```

use itkm::dataio::{
    encode_pgm, extract_patches, mosaic, parse_pgm, preprocess_patches, read_pgm, GrayImage,
    Preprocess,
};
use itkm::dictionary::random_dictionary;
use itkm::harness::with_constant_atom;
use itkm::learner::{learn, Algorithm, DatasetSource, LearnerConfig, Sampling};
use itkm::rng::seeded;

fn pattern() -> GrayImage {
    let (w, h) = (64, 64);
    let data = (0..w * h)
        .map(|i| {
            let (r, c) = ((i / w) as f64, (i % w) as f64);
            0.5 + 0.25 * (r / 3.0).sin() + 0.25 * ((r + 2.0 * c) / 5.0).cos()
        })
        .collect();
    // round-trip through the 8-bit format like a real image
    parse_pgm(&encode_pgm(&GrayImage::new(w, h, data).unwrap(), true)).unwrap()
}

fn main() -> itkm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let image = match args.first() {
        Some(path) => read_pgm(path)?,
        None => pattern(),
    };
    let iterations = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(10);

    let raw = extract_patches(&image, 8)?;
    let patches = preprocess_patches(&raw, Preprocess::default());
    println!(
        "{}x{} image: {} patches, {} flat ones dropped",
        image.width, image.height, patches.len(), patches.dropped
    );

    let init = random_dictionary(64, 63, &mut seeded(0))?;
    let mut source = DatasetSource::new(patches.patches, Sampling::WithReplacement)?;
    let mut config = LearnerConfig::new(Algorithm::Itkrm, 5, iterations, 2000);
    config.parallel = true;
    let learned = learn(&init, &config, &mut source)?.dictionary;

    let tiles = mosaic(with_constant_atom(&learned)?.matrix(), 8)?;
    let img = GrayImage::new(tiles.ncols(), tiles.nrows(), tiles.transpose().as_slice().to_vec())?;
    let out = std::env::temp_dir().join("itkm-mosaic.pgm");
    std::fs::write(&out, encode_pgm(&img, true)).map_err(|e| itkm::Error::Io { path: out.clone(), source: e })?;
    println!("mosaic written to {}", out.display());
    Ok(())
}
