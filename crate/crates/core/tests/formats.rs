use std::fs;

use nalgebra::DMatrix;

use itkm::dataio::{self, GrayImage, Preprocess};
use itkm::dictionary::make_dirac_dct;
use itkm::model::{draw_batch, CoefficientSpec};
use itkm::rng::seeded;

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_2x3.itkm");
const RAMP: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/ramp.pgm");

fn golden_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 0.0, 0.1, 1e300, -0.0])
}

#[test]
fn binary_layout_matches_golden_file() {
    let bytes = fs::read(GOLDEN).unwrap();
    assert_eq!(bytes.len(), 4 + 4 + 8 + 8 + 6 * 8);
    assert_eq!(&bytes[..4], b"ITKM");
    assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
    assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
    assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
    // column-major: the second stored value is row 1 of column 0
    assert_eq!(&bytes[32..40], &0.1f64.to_le_bytes());

    let mut written = Vec::new();
    dataio::write_matrix(&mut written, &golden_matrix()).unwrap();
    assert_eq!(written, bytes);

    let m = dataio::load_matrix(GOLDEN).unwrap();
    assert_eq!(m, golden_matrix());
    assert!(m[(1, 2)].is_sign_negative());
}

#[test]
fn large_matrix_round_trips_through_files() {
    let m = DMatrix::from_fn(64, 96, |i, j| ((i * 96 + j) as f64).sin() * 10f64.powi((j % 7) as i32 - 3));
    let dir = tempfile::tempdir().unwrap();
    for name in ["m.itkm", "m.csv", "m.bin"] {
        let path = dir.path().join(name);
        dataio::save_matrix(&path, &m).unwrap();
        assert_eq!(dataio::load_matrix(&path).unwrap(), m, "{name}");
    }
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 64);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 96);
}

#[test]
fn truncated_file_is_a_format_error() {
    let bytes = fs::read(GOLDEN).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.itkm");
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = dataio::load_matrix(&path).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn ascii_pgm_file() {
    let img = dataio::read_pgm(RAMP).unwrap();
    assert_eq!((img.width, img.height), (5, 4));
    assert_eq!(img.pixel(0, 0), 0.0);
    assert_eq!(img.pixel(1, 2), 7.0 / 15.0);
    assert_eq!(img.pixel(3, 4), 1.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ramp5.pgm");
    dataio::write_pgm(&path, &img, true).unwrap();
    let back = dataio::read_pgm(&path).unwrap();
    for (a, b) in img.data.iter().zip(&back.data) {
        assert!((a - b).abs() <= 0.5 / 255.0);
    }
}

#[test]
fn full_size_image_patch_count() {
    let data = (0..256 * 256).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
    let img = GrayImage::new(256, 256, data).unwrap();
    let ps = dataio::extract_patches(&img, 8).unwrap();
    assert_eq!(ps.patches.shape(), (64, 249 * 249));
    assert_eq!(dataio::patch_count(256, 256, 8), 62001);
    // patch at grid position (r, c) = (3, 5)
    let col = ps.patches.column(3 * 249 + 5);
    assert_eq!(col[0], img.pixel(3, 5));
    assert_eq!(col[9], img.pixel(4, 6));
}

#[test]
fn preprocessing_is_idempotent() {
    let img = dataio::read_pgm(RAMP).unwrap();
    let ps = dataio::extract_patches(&img, 2).unwrap();
    let once = dataio::preprocess_patches(&ps, Preprocess::default());
    let twice = dataio::preprocess_patches(&once, Preprocess::default());
    assert_eq!(once.patches.ncols(), twice.patches.ncols());
    for (a, b) in once.patches.iter().zip(twice.patches.iter()) {
        assert!((a - b).abs() < 1e-14);
    }
    for col in once.patches.column_iter() {
        assert!((col.norm() - 1.0).abs() < 1e-12);
        assert!(col.sum().abs() < 1e-12);
    }
}

#[test]
fn signal_batch_and_sidecar() {
    let dict = make_dirac_dct(8).unwrap();
    let spec = CoefficientSpec::geometric(3, dict.n_atoms()).unwrap();
    let batch = draw_batch(&dict, &spec, 0.1, 25, &mut seeded(11)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.itkm");
    dataio::save_signal_batch(&path, &batch).unwrap();

    assert_eq!(dataio::load_matrix(&path).unwrap(), batch.signals);
    let sidecar = dataio::sidecar_path(&path);
    let text = fs::read_to_string(&sidecar).unwrap();
    assert_eq!(text.lines().next().unwrap(), dataio::SIDECAR_HEADER);
    let records = dataio::read_batch_sidecar(fs::File::open(&sidecar).unwrap()).unwrap();
    assert_eq!(records.len(), 25);
    for (n, r) in records.iter().enumerate() {
        assert_eq!(r.support, batch.supports[n]);
        assert_eq!(r.signs, batch.signs[n]);
        assert_eq!(r.coefficients, batch.coefficients[n]);
        assert_eq!(r.decay, batch.decays[n]);
        assert_eq!(r.noise_norm, batch.noise_norms[n]);
    }
}
