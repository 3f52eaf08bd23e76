use modnls::io::{field_metadata, read_field, read_field_from, read_trajectory, write_field, write_field_to, write_trajectory};
use modnls::spectral::{uniform_times, GridSpec, SpectralField, Trajectory};
use modnls::Complex64 as C64;

fn sample(g: GridSpec) -> SpectralField {
    let values = (0..g.len()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos() - 0.5)).collect();
    SpectralField::from_values(g, values).unwrap()
}

#[test]
fn field_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for g in [GridSpec::with_periods(1, 4, 64).unwrap(), GridSpec::with_periods(2, 4, 16).unwrap()] {
        let f = sample(g);
        let path = dir.path().join("f.bin");
        write_field(&path, &f).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, 24 + 16 * g.len());
        let back = read_field(&path).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
    }
}

#[test]
fn trajectory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::with_periods(1, 4, 32).unwrap();
    let times = uniform_times(0.0, 1.0, 3);
    let fields = times.iter().map(|&t| sample(g).scale(C64::new(t, 1.0))).collect();
    let u = Trajectory::new(times, fields).unwrap();
    let path = dir.path().join("u.bin");
    write_trajectory(&path, &u).unwrap();
    let back = read_trajectory(&path).unwrap();
    assert_eq!(back.times(), u.times());
    for (a, b) in back.fields().iter().zip(u.fields()) {
        assert_eq!(a.values(), b.values());
    }
}

#[test]
fn truncated_or_bogus_records_are_rejected() {
    let g = GridSpec::with_periods(1, 4, 32).unwrap();
    let mut buf = Vec::new();
    write_field_to(&mut buf, &sample(g)).unwrap();
    assert!(read_field_from(&mut &buf[..buf.len() - 1]).is_err());
    let mut bad = buf.clone();
    bad[..8].copy_from_slice(&7u64.to_le_bytes());
    assert!(read_field_from(&mut &bad[..]).is_err());
    let mut off_grid = buf;
    off_grid[8..16].copy_from_slice(&10.0f64.to_le_bytes());
    assert!(read_field_from(&mut &off_grid[..]).is_err());
}

#[test]
fn metadata_reports_the_grid() {
    let g = GridSpec::with_periods(2, 4, 32).unwrap();
    let m = field_metadata(&SpectralField::constant(g, C64::new(2.0, 0.0))).unwrap();
    assert_eq!((m.dim, m.periods, m.points), (2, 4, 32));
    assert!((m.sup_norm - 2.0).abs() < 1e-14);
    assert!((m.l2_norm - 2.0 * 2.0 * g.half_period()).abs() < 1e-10);
}
