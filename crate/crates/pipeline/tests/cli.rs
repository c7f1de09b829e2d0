use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use surge_core::tensor_file::read_tensor;
use surge_pipeline::dataset::{read_skip_report, write_field, DataSource, DatasetManifest, SplitTag};
use surge_core::SurgeField;

fn surge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surge")).args(args).output().expect("run surge")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> String {
    let out = surge(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Toy tracks plus one storm that stays far offshore.
fn tracks_with_offshore(dir: &Path) -> std::path::PathBuf {
    let tracks = dir.join("tracks.csv");
    ok(&["make-toy-tracks", "--seed", "3", "--count", "6", "--out", s(&tracks)]);
    let mut text = fs::read_to_string(&tracks).unwrap();
    for k in 0..20 {
        text.push_str(&format!("OFFSHORE,NA,{},{},100.3,40,950,50\n", 3 * k, 5.0 + 0.3 * k as f64));
    }
    fs::write(&tracks, text).unwrap();
    tracks
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&surge(&["--help"])), 0);
    assert_eq!(code(&surge(&["train"])), 1);
    assert_eq!(code(&surge(&["no-such-command"])), 1);
    assert_eq!(code(&surge(&["make-toy-tracks", "--basins", "XX"])), 1);
}

#[test]
fn missing_input_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = surge(&["evaluate", "--manifest", s(&dir.path().join("none.json")), "--ckpt", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn pack_runs_balances_basins() {
    let dir = tempfile::tempdir().unwrap();
    let tracks = dir.path().join("t.csv");
    ok(&["make-toy-tracks", "--seed", "1", "--count", "9", "--basins", "NA,EP,WP", "--out", s(&tracks)]);
    let csv = ok(&["pack-runs", "--tracks", s(&tracks)]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("run_id,basin,storm_id"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    let runs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(runs.len(), 3);
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tracks = tracks_with_offshore(d);
    let ds = d.join("ds");
    ok(&["build-dataset", "--tracks", s(&tracks), "--toy-seed", "3", "--res", "16", "--out", s(&ds)]);

    let skipped = read_skip_report(&ds.join("skipped.csv")).unwrap();
    assert!(skipped.iter().any(|k| k.storm_id == "OFFSHORE" && k.reason.contains("landfall")), "{skipped:?}");
    let manifest_path = ds.join("manifest.json");
    let manifest = DatasetManifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.storms.len(), 6);
    assert_eq!(manifest.source, DataSource::Toy { seed: 3 });
    let tags: Vec<SplitTag> = manifest.storms.iter().map(|e| e.split).collect();
    assert_eq!(manifest.recompute_split().unwrap(), tags);

    let ckpt = d.join("ck");
    let history = ok(&[
        "train", "--manifest", s(&manifest_path), "--arch", "cnn", "--layers", "1", "--base-width", "4",
        "--epochs", "2", "--batch", "2", "--out", s(&ckpt),
    ]);
    assert!(history.lines().any(|l| l == "epoch,step,lr,train_loss,val_loss"), "{history}");
    assert!(ckpt.join("manifest.json").exists() && ckpt.join("history.csv").exists());

    let report = d.join("report.csv");
    ok(&["evaluate", "--manifest", s(&manifest_path), "--ckpt", s(&ckpt), "--split", "train", "--report", s(&report)]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("model,basin,n_storms,rmse_near_land_m,rmse_all_points_m"), "{text}");
    assert!(text.lines().any(|l| l.contains(",ALL,")));

    let pred = d.join("pred.srgt");
    let features = ds.join(&manifest.storms[0].features);
    ok(&["predict", "--ckpt", s(&ckpt), "--features", s(&features), "--out", s(&pred)]);
    let field = read_tensor(&pred).unwrap();
    assert_eq!(field.dims, vec![16, 16]);
    assert!(field.data.iter().all(|v| v.is_finite()));

    let grid = d.join("grid.json");
    fs::write(&grid, serde_json::to_string(&manifest.storms[0].grid).unwrap()).unwrap();
    let g = manifest.storms[0].grid;
    let gauges = d.join("gauges.csv");
    fs::write(
        &gauges,
        format!(
            "gauge_id,lat,lon,storm_id,observed_max_m\ng1,{},{},{},0.5\ng2,{},{},{},0.2\nfar,0,0,x,1\n",
            g.center_lat, g.center_lon, manifest.storms[0].id, g.center_lat + 0.3, g.center_lon - 0.3, manifest.storms[0].id
        ),
    )
    .unwrap();
    let scatter = d.join("scatter.csv");
    ok(&["gauges", "--field", s(&pred), "--grid", s(&grid), "--gauges", s(&gauges), "--out", s(&scatter)]);
    let rows = fs::read_to_string(&scatter).unwrap();
    assert_eq!(rows.lines().count(), 3, "{rows}");

    // A NaN label makes the loss non-finite.
    let target = ds.join(&manifest.storms.iter().find(|e| e.split == SplitTag::Train).unwrap().target);
    write_field(&target, &SurgeField::filled(16, 16, f32::NAN)).unwrap();
    let out = surge(&[
        "train", "--manifest", s(&manifest_path), "--arch", "cnn", "--layers", "1", "--base-width", "4",
        "--epochs", "1", "--out", s(&d.join("nan")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epoch") && err.contains("lr"), "{err}");
}

#[test]
fn rebuild_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["build-dataset", "--toy-seed", "8", "--count", "4", "--res", "16", "--out", s(out)]);
    }
    let manifest = DatasetManifest::load(&a.join("manifest.json")).unwrap();
    for e in &manifest.storms {
        for rel in [&e.features, &e.target] {
            assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
        }
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

/// Regular 0.1 degree mesh over [0, 4] x [0, 4]: water west of 2.5E, dry land east of it.
fn write_mesh(dir: &Path) -> usize {
    let n = 41;
    let mut nodes = String::new();
    for j in 0..n {
        for i in 0..n {
            let lon = i as f64 * 0.1;
            let depth = if lon < 2.45 { 20.0 } else { -3.0 };
            nodes.push_str(&format!("{} {lon:.1} {:.1} {depth}\n", j * n + i + 1, j as f64 * 0.1));
        }
    }
    let mut elems = String::new();
    let mut k = 0;
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let a = j * n + i + 1;
            let (b, c, d) = (a + 1, a + n + 1, a + n);
            k += 1;
            elems.push_str(&format!("{k} 3 {a} {b} {c}\n"));
            k += 1;
            elems.push_str(&format!("{k} 3 {a} {c} {d}\n"));
        }
    }
    fs::write(dir.join("fort.14"), format!("tiny\n{k} {}\n{nodes}{elems}", n * n)).unwrap();
    for (id, scale) in [("M1", 0.05), ("M2", 0.08)] {
        let values: String = (0..n * n)
            .map(|idx| {
                let lon = (idx % n) as f64 * 0.1;
                if lon < 2.45 { format!("{}\n", scale * lon) } else { "nan\n".into() }
            })
            .collect();
        fs::write(dir.join("maxele").join(format!("{id}.txt")), values).unwrap();
    }
    n * n
}

#[test]
fn mesh_mode_builds_from_fort14() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("maxele")).unwrap();
    write_mesh(d);
    let mut tracks = String::from("storm_id,basin,t_hours,lat,lon,rmax_km,pmin_hpa,vmax_ms\n");
    for (id, lat) in [("M1", 1.8), ("M2", 2.2)] {
        for k in 0..=17 {
            let t = 3.0 * k as f64;
            tracks.push_str(&format!("{id},NA,{t},{lat},{},30,960,45\n", 1.2 + 0.05 * t));
        }
    }
    fs::write(d.join("tracks.csv"), tracks).unwrap();
    let ds = d.join("ds");
    let out = surge(&[
        "build-dataset", "--tracks", s(&d.join("tracks.csv")), "--mesh", s(&d.join("fort.14")), "--maxele",
        s(&d.join("maxele")), "--extent", "1.0", "--res", "8", "--out", s(&ds),
    ]);
    assert_eq!(code(&out), 0, "{:?}", fs::read_to_string(ds.join("skipped.csv")));
    let manifest = DatasetManifest::load(&ds.join("manifest.json")).unwrap();
    assert_eq!(manifest.storms.len(), 2);
    assert!(matches!(manifest.source, DataSource::Mesh { .. }));
    for e in &manifest.storms {
        assert!((e.landfall.lon - 2.45).abs() < 0.06, "{:?}", e.landfall);
        let y = read_tensor(&ds.join(&e.target)).unwrap();
        assert!(y.data.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(y.data.iter().any(|&v| v > 0.0));
    }
}
