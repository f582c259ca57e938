use std::fs;

use nalgebra::DMatrix;
use spod::{Boundary, Grid1D, SnapshotSet, TimeAxis};
use spod_cli::format::{decode_snapshots, encode_snapshots, read_snapshots_csv, write_snapshots_csv};
use spod_cli::{read_snapshots, write_snapshots, CliError};

fn fixture(values: &[f64]) -> Vec<u8> {
    let mut bytes = b"SPOD-SNAPSHOTS 1\nm=4 n=2 h=0.25 boundary=periodic\nblock=q:4\ndata\n".to_vec();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn data_error(r: Result<SnapshotSet, CliError>) -> String {
    match r {
        Err(CliError::Data(msg)) => msg,
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn hand_written_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.bin");
    fs::write(&path, fixture(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])).unwrap();
    let set = read_snapshots(&path).unwrap();
    assert_eq!(*set.grid(), Grid1D::new(4, 0.25, Boundary::Periodic).unwrap());
    assert_eq!(set.grid().length(), 1.0);
    assert_eq!(set.blocks().len(), 1);
    assert_eq!(set.blocks()[0].name, "q");
    assert_eq!(set.blocks()[0].rows, 0..4);
    assert_eq!(set.time().values(), &[0.0, 1.0]);
    assert_eq!(set.data()[(3, 0)], 4.0);
    assert_eq!(set.data()[(0, 1)], 5.0);
}

#[test]
fn truncated_data_names_counts() {
    let msg = data_error(decode_snapshots(&fixture(&[1.0, 2.0, 3.0, 4.0, 5.0])));
    assert!(msg.contains("holds 5 elements"), "{msg}");
    assert!(msg.contains("expected 8 elements"), "{msg}");

    let mut partial = fixture(&[1.0; 7]);
    partial.extend_from_slice(&[0u8; 3]);
    let msg = data_error(decode_snapshots(&partial));
    assert!(msg.contains("holds 7 elements (59 bytes)"), "{msg}");
}

#[test]
fn trailing_data_rejected() {
    let msg = data_error(decode_snapshots(&fixture(&[0.0; 9])));
    assert!(msg.contains("holds 9 elements"), "{msg}");
}

#[test]
fn non_finite_reports_offset() {
    let mut values = [0.0; 8];
    values[6] = f64::NAN;
    let header_len = fixture(&[]).len();
    let msg = data_error(decode_snapshots(&fixture(&values)));
    assert!(msg.contains("element 6"), "{msg}");
    assert!(msg.contains("row 2, column 1"), "{msg}");
    assert!(msg.contains(&format!("byte offset {}", header_len + 48)), "{msg}");
}

#[test]
fn header_errors_name_lines() {
    let msg = data_error(decode_snapshots(b"SPOD-SNAPSHOTS 1\nm=4 n=2 h=0.25 boundary=wrapped\ndata\n"));
    assert!(msg.contains("line 2") && msg.contains("wrapped"), "{msg}");

    let msg = data_error(decode_snapshots(b"SPOD-SNAPSHOTS 1\nm=4 n=2 h=0.25 boundary=periodic\nblock=q:3\ndata\n"));
    assert!(msg.contains("block `q` has height 3"), "{msg}");

    let msg = data_error(decode_snapshots(b"SPOD-SNAPSHOTS 1\nm=4 n=2 boundary=periodic\ndata\n"));
    assert!(msg.contains("missing `h`"), "{msg}");

    let msg = data_error(decode_snapshots(b"SPOD-SNAPSHOTS 1\nm=4 n=2 h=0.25 boundary=periodic\n"));
    assert!(msg.contains("without a `data` line"), "{msg}");

    let msg = data_error(decode_snapshots(b"matrix\n"));
    assert!(msg.contains("signature"), "{msg}");

    let msg = data_error(decode_snapshots(b"SPOD-SNAPSHOTS 1\nm=4 n=2 h=0.25 boundary=periodic\ntime=0,1,2\ndata\n"));
    assert!(msg.contains("time axis has 3 values"), "{msg}");
}

fn awkward_set() -> SnapshotSet {
    let specials = [
        0.1,
        -0.0,
        f64::MIN_POSITIVE / 3.0,
        1e300,
        -1e-300,
        std::f64::consts::PI,
        1.0 / 3.0,
        f64::EPSILON,
    ];
    let data = DMatrix::from_fn(10, 3, |i, j| specials[(i + 3 * j) % 8] * (1.0 + i as f64).sqrt());
    let grid = Grid1D::with_length(5, 0.7, Boundary::NonPeriodic).unwrap();
    let time = TimeAxis::new(vec![0.0, 0.1, 0.30000000000000004]).unwrap();
    SnapshotSet::new(data, grid, time, &["density", "species"]).unwrap()
}

fn assert_bit_identical(a: &SnapshotSet, b: &SnapshotSet) {
    assert_eq!(a.grid(), b.grid());
    assert_eq!(a.blocks(), b.blocks());
    let bits = |s: &SnapshotSet| s.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a), bits(b));
    let tbits = |s: &SnapshotSet| s.time().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(tbits(a), tbits(b));
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.bin");
    let set = awkward_set();
    write_snapshots(&set, &path).unwrap();
    let back = read_snapshots(&path).unwrap();
    assert_bit_identical(&set, &back);
    assert_eq!(encode_snapshots(&back), fs::read(&path).unwrap());
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.csv");
    let set = awkward_set();
    write_snapshots_csv(&set, &path).unwrap();
    let back = read_snapshots_csv(&path, Boundary::NonPeriodic).unwrap();
    assert_bit_identical(&set, &back);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("variable,node,x,0,0.1,0.30000000000000004\n"), "{text}");
}
