use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qwave_core::units::UnitSystem;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn qwave(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwave"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .env_remove("QWAVE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

/// Writes a variant of a bundled scenario.
fn variant(dir: &Path, base: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let text = edit(fs::read_to_string(scenario(base)).unwrap());
    let path = dir.join(base);
    fs::write(&path, text).unwrap();
    path
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| if c.is_empty() { f64::NAN } else { c.parse().unwrap_or(f64::NAN) }).collect())
        .collect();
    (header, rows)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn ramp_field_spans_device_with_241_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qwave(&["scatter"], &scenario("ramp_dtbc.toml"), dir.path()));
    let (header, rows) = csv(&dir.path().join("field.csv"));
    assert_eq!(header, ["x_nm", "re", "im", "density"]);
    assert_eq!(rows.len(), 241);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[240][0], 120.0);
    let (h, s) = csv(&dir.path().join("summary.csv"));
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let (r, t) = (s[0][col("reflection")], s[0][col("transmission")]);
    assert!((r + t - 1.0).abs() < 1e-10, "R + T = {}", r + t);
    // injected exactly at the barrier top: no propagating channel on the right
    assert!(t.abs() < 1e-12, "T = {t}");
}

#[test]
fn missing_energy_is_a_located_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "ramp_dtbc.toml", |t| t.replace("energy = \"25 meV\"", ""));
    let o = qwave(&["scatter"], &path, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 17") && e.contains("energy"), "{e}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn rk4_step_above_stability_limit_is_rejected_before_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "three_packets.toml", |t| {
        t.replace("method = \"dtbc\"", "method = \"pml\"")
            .replace("integrator = \"cn\"", "integrator = \"rk4\"")
            .replace("dt = \"0.1 fs\"", "dt = \"0.3 fs\"")
    });
    let out = dir.path().join("out");
    let o = qwave(&["evolve"], &path, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stability limit"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn resume_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = qwave(&["evolve", "--resume"], &scenario("three_packets.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not supported"));
}

#[test]
fn unreadable_scenario_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = qwave(&["scatter"], &dir.path().join("absent.toml"), dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn manifest_matches_directory_listing() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "three_packets.toml", |t| t.replace("t_end = \"1 ps\"", "t_end = \"0.05 ps\""));
    let out = dir.path().join("out");
    ok(&qwave(&["evolve", "--snapshot-every", "200"], &path, &out));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> =
        manifest["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert_eq!(listed, listing(&out));
    assert_eq!(listed.iter().filter(|f| f.starts_with("snap_")).count(), 3);
    assert_eq!(manifest["stats"]["steps"], 500);
    assert_eq!(manifest["stats"]["factorizations"], 1);
    assert_eq!(manifest["timings"].as_array().unwrap().len(), 11);
    let (_, traj) = csv(&out.join("trajectory.csv"));
    assert_eq!(traj.len(), 11);
    assert!(traj.windows(2).all(|w| w[1][2] <= w[0][2] + 1e-12), "device norm grows");
}

#[test]
fn outputs_are_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&qwave(&["scatter", "--sweep", "energy:1:100:6:log"], &scenario("free_pml6.toml"), out));
    }
    let files = listing(&a);
    assert_eq!(files, listing(&b));
    for f in files.iter().filter(|f| *f != "manifest.json") {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let hash = |d: &Path| {
        let m: serde_json::Value = serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap();
        m["scenario_sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(&a), hash(&b));
    assert_eq!(hash(&a).len(), 64);
}

#[test]
fn energy_sweep_reports_plane_wave_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qwave(&["scatter", "--sweep", "energy:1:100:6:log", "--threads", "1"], &scenario("free_pml6.toml"), dir.path()));
    let (header, rows) = csv(&dir.path().join("sweep.csv"));
    assert_eq!(header.last().unwrap(), "plane_wave_error");
    assert_eq!(rows.len(), 6);
    assert!((rows[0][0] - 1.0).abs() < 1e-12 && (rows[5][0] - 100.0).abs() < 1e-9);
    for r in &rows {
        assert!(r[4] < 1e-4, "order-6 error {} at {} meV", r[4], r[0]);
        assert!((r[3] - 1.0).abs() < 1e-3);
    }
}

#[test]
fn zero_modes_requested_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "parabolic_guide.toml", |t| t.replace("count = 2", "count = 0"));
    let o = qwave(&["modes"], &path, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least one mode"));
}

#[test]
fn parabolic_lead_has_oscillator_levels() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qwave(&["modes"], &scenario("parabolic_guide.toml"), dir.path()));
    let text = fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let energies: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 4);
    for (e, want) in energies.iter().zip([16.45, 49.36, 16.45, 49.36]) {
        assert!((e / want - 1.0).abs() < 0.01, "{e} vs {want}");
    }
}

#[test]
fn square_well_levels_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qwave(&["eigs"], &scenario("square_well.toml"), dir.path()));
    let (_, eigs) = csv(&dir.path().join("eigs.csv"));
    let (_, vecs) = csv(&dir.path().join("eigenvectors.csv"));
    assert_eq!(eigs.len(), 4);
    let n = vecs.len() / 4;
    let u = UnitSystem::default();
    let dx = 0.25;
    for (i, row) in eigs.iter().enumerate() {
        let s = ((i + 1) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin();
        let want = 4.0 * u.kinetic_prefactor() / (dx * dx) * s * s;
        assert!((row[1] / want - 1.0).abs() < 1e-8, "level {i}: {} vs {want}", row[1]);
    }
}

#[test]
fn binary_snapshots_carry_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "three_packets.toml", |t| t.replace("t_end = \"1 ps\"", "t_end = \"0.01 ps\""));
    let out = dir.path().join("out");
    ok(&qwave(&["evolve", "--binary", "--snapshot-every", "100"], &path, &out));
    let snaps: Vec<String> = listing(&out).into_iter().filter(|f| f.ends_with(".bin")).collect();
    assert_eq!(snaps.len(), 2);
    let bytes = fs::read(out.join(&snaps[0])).unwrap();
    assert_eq!(&bytes[..8], b"QWAVEF01");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 241);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
    assert_eq!(bytes.len(), 16 + 241 * 16);
}
