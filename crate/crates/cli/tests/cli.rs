use std::path::Path;
use std::process::{Command, Output};

fn dolfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dolfit"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_single_line_failure(o: &Output) {
    assert!(!o.status.success());
    let e = stderr(o);
    assert_eq!(e.trim_end().lines().count(), 1, "{e}");
}

const SPEC: &str = r#"{
  "frames": 3,
  "frame_rate": 50.0,
  "altitude": [4.0, 4.1, 4.2],
  "resolution": [60, 40],
  "albedo_resolution": [16, 16],
  "motion": {"kind": "swim", "start": [0.0, 0.0, -0.2], "heading": 0.2, "speed": 1.5},
  "albedo": {"kind": "constant", "value": 0.5},
  "water": [0.5, 0.5, 0.5],
  "seed": 3
}"#;

const CONFIG: &str = r#"{
  "render_resolution": [60, 40],
  "albedo_resolution": [16, 16],
  "epochs": 2,
  "vertical_drift": false
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn synth_reconstruct_report_compose() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.json", SPEC);
    let config = write(dir.path(), "c.json", CONFIG);
    let seq = dir.path().join("d");
    let out = dir.path().join("r");
    let (seq_s, out_s) = (seq.to_str().unwrap(), out.to_str().unwrap());

    let o = dolfit(&["synth", "--spec", &spec, "--out", seq_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "frames/000002.png",
        "masks/000000.png",
        "altitude.csv",
        "camera.json",
        "groundtruth.json",
    ] {
        assert!(seq.join(f).exists(), "{f}");
    }

    let o = dolfit(&[
        "--threads",
        "1",
        "reconstruct",
        seq_s,
        "--config",
        &config,
        "--out",
        out_s,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(out.join("meshes")).unwrap().count(), 3);
    assert_eq!(std::fs::read_dir(out.join("previews")).unwrap().count(), 3);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("id,volume_3d"));
    assert!(report.lines().nth(1).unwrap().starts_with("d,"));

    let gt = seq.join("groundtruth.json");
    let est = out.join("params.json");
    let o = dolfit(&[
        "report",
        "--gt",
        gt.to_str().unwrap(),
        "--est",
        est.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in [
        "volume_rel_error",
        "mean_iou",
        "trajectory_rmse",
        "orientation_error",
    ] {
        assert!(r[key].as_f64().unwrap().is_finite(), "{key}");
    }

    let o = dolfit(&[
        "report",
        "--gt",
        gt.to_str().unwrap(),
        "--est",
        gt.to_str().unwrap(),
    ]);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["trajectory_rmse"].as_f64(), Some(0.0));
    assert_eq!(r["mean_iou"].as_f64(), Some(1.0));
}

#[test]
fn misspelled_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", r#"{"lamda_mask": 2.0}"#);
    let o = dolfit(&[
        "reconstruct",
        dir.path().to_str().unwrap(),
        "--config",
        &config,
        "--out",
        "unused",
    ]);
    assert_single_line_failure(&o);
    assert!(stderr(&o).contains("lamda_mask"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_fails() {
    assert_single_line_failure(&dolfit(&[
        "baseline",
        "--profile",
        "x.csv",
        "--hw-ratio",
        "y.csv",
    ]));
    assert_single_line_failure(&dolfit(&["frobnicate"]));
}

#[test]
fn missing_sequence_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = dolfit(&[
        "reconstruct",
        dir.path().join("nothing").to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_single_line_failure(&o);
}

#[test]
fn baseline_prints_a_report_row() {
    let dir = tempfile::tempdir().unwrap();
    let sites = [
        5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95,
    ];
    let header: Vec<String> = sites.iter().map(|s| format!("W{s:02}")).collect();
    let widths = vec!["0.4"; 19].join(",");
    let profile = write(
        dir.path(),
        "p.csv",
        &format!("id,BL,{}\nhuey,2.0,{widths}\n", header.join(",")),
    );
    let hw = write(dir.path(), "hw.csv", &vec!["1.0"; 19].join(","));
    let o = dolfit(&["baseline", "--profile", &profile, "--hw", &hw]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,volume_3d,volume_elliptical,bci,density,mass_3d,mass_elliptical"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "huey");
    assert!(row[1].is_empty() && row[5].is_empty());
    let v: f64 = row[2].parse().unwrap();
    // Sixteen full cylinder segments plus tapered ends.
    let segment = 0.1 * std::f64::consts::PI * 0.04;
    assert!(v > 16.0 * segment && v < 20.0 * segment, "{v}");
    let m: f64 = row[6].parse().unwrap();
    assert!(m > 0.0);

    let strict = dolfit(&[
        "baseline",
        "--profile",
        &profile,
        "--hw",
        &hw,
        "--strict-paper-integrand",
    ]);
    assert!(strict.status.success());
}
