mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::*;
use nalgebra::DMatrix;
use placeholder_zsl::dataset::{
    decode_matrix, encode_matrix, generate_synthetic_with_truth, load_dataset_dir, save_dataset, DatasetFormat,
};
use placeholder_zsl::numerics::Matrix;
use placeholder_zsl::Error;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny")
}

fn copy_fixture(to: &Path) {
    for name in ["features.csv", "attributes.csv", "split.txt"] {
        fs::copy(fixture().join(name), to.join(name)).unwrap();
    }
}

#[test]
fn csv_fixture_loads() {
    let ds = load_dataset_dir(&fixture()).unwrap();
    assert_eq!(ds.num_samples(), 8);
    assert_eq!((ds.feature_dim(), ds.attribute_dim(), ds.num_classes()), (3, 2, 3));
    assert_eq!(ds.labels(), &[0, 0, 0, 1, 1, 1, 2, 2]);
    assert_eq!(ds.split().train, vec![0, 1, 3, 4]);
    assert_eq!(ds.split().unseen, vec![2]);
    assert_eq!(ds.features()[(2, 2)], 0.6f32 as f64);
    // already unit length: kept as written
    assert_eq!(ds.attributes().row(2), &[0.6f32 as f64, 0.8f32 as f64]);
}

#[test]
fn round_trips_are_byte_identical() {
    let ds = small_dataset(3);
    for format in [DatasetFormat::Csv, DatasetFormat::Binary] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        save_dataset(&ds, a.path(), format).unwrap();
        let loaded = load_dataset_dir(a.path()).unwrap();
        assert_eq!(loaded.features(), ds.features(), "{format:?}");
        assert_eq!(loaded.labels(), ds.labels());
        assert_eq!(loaded.split(), ds.split());
        assert_eq!(loaded.attributes().values(), ds.attributes().values());
        assert_eq!(loaded.fingerprint(), ds.fingerprint());
        save_dataset(&loaded, b.path(), format).unwrap();
        for entry in fs::read_dir(a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        }
    }
}

#[test]
fn matrix_encoding_layout() {
    let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-0.5, 0.25, 8.0]]).unwrap();
    let bytes = encode_matrix(&m);
    assert_eq!(&bytes[..4], b"LPLF");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1.0);
    assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), 0.25);
    assert_eq!(bytes.len(), 12 + 6 * 4);
    assert_eq!(decode_matrix(&bytes, Path::new("m")).unwrap(), m);
    assert!(matches!(decode_matrix(&bytes[..20], Path::new("m")), Err(Error::Format { .. })));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_matrix(&bad, Path::new("m")), Err(Error::Format { .. })));
}

#[test]
fn out_of_range_split_id_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let split = fs::read_to_string(dir.path().join("split.txt")).unwrap().replace("test_unseen: 6 7", "test_unseen: 6 99");
    fs::write(dir.path().join("split.txt"), split).unwrap();
    let err = load_dataset_dir(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    assert!(err.to_string().contains("99"), "{err}");
}

#[test]
fn bad_cell_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let features = fs::read_to_string(dir.path().join("features.csv")).unwrap().replace("0.9,0.1,0.4", "0.9,oops,0.4");
    fs::write(dir.path().join("features.csv"), features).unwrap();
    match load_dataset_dir(dir.path()).unwrap_err() {
        Error::Format { line, column, .. } => assert_eq!((line, column), (3, 4)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn missing_directory_is_missing_input() {
    let err = load_dataset_dir(Path::new("/definitely/not/here")).unwrap_err();
    assert!(matches!(err, Error::MissingInput(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn ridge_regression_recovers_the_hidden_map() {
    let mut cfg = small_config(5, 0.0);
    cfg.attr_dim = 4;
    let bench = generate_synthetic_with_truth(&cfg).unwrap();
    let ds = &bench.dataset;
    let n = ds.num_samples();
    let a = DMatrix::from_fn(n, ds.attribute_dim(), |i, d| ds.attributes().row(ds.labels()[i])[d]);
    let x = DMatrix::from_fn(n, ds.feature_dim(), |i, c| ds.features()[(i, c)]);
    let lambda = 1e-12;
    let gram = a.transpose() * &a + DMatrix::identity(ds.attribute_dim(), ds.attribute_dim()) * lambda;
    let gt = gram.lu().solve(&(a.transpose() * x)).unwrap();
    let truth = &bench.ground_truth_map;
    let mut worst = 0.0f64;
    for c in 0..ds.feature_dim() {
        for d in 0..ds.attribute_dim() {
            worst = worst.max((gt[(d, c)] - truth[(c, d)]).abs());
        }
    }
    assert!(worst < 1e-6, "max |G - Ĝ| = {worst:e}");
}
