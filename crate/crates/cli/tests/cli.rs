use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use segplan::volumes::{write_mask, MaskVolume};

fn segplan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segplan"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEGPLAN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SPEC: &str = r#"[
  {"name": "cube", "dims": [12, 12, 12], "kind": "cuboid", "corner": [1, 1, 1], "edges": [10, 10, 10]},
  {"name": "ball", "dims": [30, 30, 30], "kind": "sphere", "center": [15, 15, 15], "radius": 9},
  {"name": "blobs", "dims": [32, 32, 32], "kind": "blob_set", "count": 2, "radius_min": 3, "radius_max": 5, "min_separation": 2, "seed": 3}
]"#;

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.json"), SPEC).unwrap();
    assert_eq!(code(&segplan(dir.path(), &["synth", "spec.json", "--out", "masks"])), 0);
    dir
}

fn observations(dir: &Path, name: &str, ys: impl Fn(f64) -> f64) {
    let mut s = String::from("x,y,unit_tag\n");
    for x in (5..=60).step_by(5) {
        s.push_str(&format!("{x},{:.6},cases\n", ys(x as f64)));
    }
    fs::write(dir.join(name), s).unwrap();
}

#[test]
fn synth_is_byte_reproducible_and_rejects_bad_specs() {
    let dir = fixture();
    let first = fs::read(dir.path().join("masks/blobs.nii.gz")).unwrap();
    assert_eq!(code(&segplan(dir.path(), &["synth", "spec.json", "--out", "again"])), 0);
    assert_eq!(first, fs::read(dir.path().join("again/blobs.nii.gz")).unwrap());

    fs::write(dir.path().join("bad.json"), r#"{"dims": [8, 8, 8], "kind": "sphere", "center": [4, 4, 4], "radius": 6}"#).unwrap();
    let o = segplan(dir.path(), &["synth", "bad.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("below 0"));
}

#[test]
fn stats_flags_empty_masks_and_averages_rows() {
    let dir = fixture();
    write_mask(&MaskVolume::empty([4, 4, 4]).unwrap(), dir.path().join("masks/zz_empty.nii")).unwrap();
    let o = segplan(dir.path(), &["stats", "masks", "--out", "s"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warnings: 1"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s/stats.json")).unwrap()).unwrap();
    let cases = report["cases"].as_array().unwrap();
    let cube = cases.iter().find(|c| c["name"] == "cube").unwrap();
    assert_eq!(cube["surface"], 488);
    assert_eq!(cube["ratio_c"], 0.488);
    assert_eq!(cases.last().unwrap()["empty"], true);
    let ratios: Vec<f64> = cases.iter().filter_map(|c| c["ratio_c"].as_f64()).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((report["aggregate"]["mean_ratio_c"].as_f64().unwrap() - mean).abs() < 1e-9);
    assert_eq!(report["header"]["tool"], "segplan");
}

#[test]
fn minbat_exit_codes_and_target_only() {
    let dir = fixture();
    assert_eq!(code(&segplan(dir.path(), &["minbat", "masks", "--sizes", "5"])), 2);
    assert_eq!(code(&segplan(dir.path(), &["minbat", "masks", "--profile", "bogus"])), 2);
    let o = segplan(dir.path(), &["minbat", "masks", "--trials", "2", "--target-only", "--profile", "wide3"]);
    assert_eq!(code(&o), 0);
    let printed = String::from_utf8_lossy(&o.stdout).trim().to_string();
    let t: f64 = printed.parse().unwrap();
    assert!(t > 0.0 && t < 1.0);
    assert!(!dir.path().join("minbat_report.json").exists());
}

#[test]
fn theory_domain_and_single_point() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&segplan(dir.path(), &["theory", "--c", "1"])), 2);
    let o = segplan(dir.path(), &["theory", "--grid", "0.3:0.3:0.1", "--samples", "1000"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("theory_curve.csv")).unwrap();
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    assert!(csv.starts_with("# tool=segplan"));
}

#[test]
fn reps_banner_coverage_and_small_images() {
    let dir = tempfile::tempdir().unwrap();
    let big = r#"{"dims": [100, 90, 80], "kind": "ellipsoid", "center": [50, 45, 40], "semi_axes": [40, 30, 10]}"#;
    fs::write(dir.path().join("big.json"), big).unwrap();
    assert_eq!(code(&segplan(dir.path(), &["synth", "big.json", "--out", "m", "--plain"])), 0);
    let o = segplan(dir.path(), &["reps", "m/case_000.nii", "--epochs", "2", "--check-coverage", "--out", "r"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("d_p/d_o/d_b = 64/16/16"));
    assert!(stdout.contains("coverage check passed"));
    let e1 = fs::read(dir.path().join("r/reps_epoch_001.json")).unwrap();
    assert_eq!(code(&segplan(dir.path(), &["reps", "m/case_000.nii", "--epochs", "2", "--out", "r2", "--check-coverage"])), 0);
    assert_eq!(e1, fs::read(dir.path().join("r2/reps_epoch_001.json")).unwrap());

    fs::write(dir.path().join("small.json"), r#"{"dims": [20, 20, 20], "kind": "sphere", "center": [10, 10, 10], "radius": 4}"#).unwrap();
    assert_eq!(code(&segplan(dir.path(), &["synth", "small.json", "--out", "s"])), 0);
    assert_eq!(code(&segplan(dir.path(), &["reps", "s/case_000.nii.gz"])), 2);
}

#[test]
fn fit_and_predict_contracts() {
    let dir = tempfile::tempdir().unwrap();
    observations(dir.path(), "log.csv", |x| 8.0 * (x + 5.0).ln() + 40.0);
    let o = segplan(dir.path(), &["fit", "log.csv", "--laws", "logarithmic", "--target", "75", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let fits: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("curve_fits.json")).unwrap()).unwrap();
    let exact = (35.0f64 / 8.0).exp() - 5.0;
    let n = fits["fits"][0]["crossing"]["n"].as_f64().unwrap();
    assert!((n - exact).abs() / exact < 0.01, "{n} vs {exact}");

    // Asymptote 95, target 97.
    observations(dir.path(), "sat.csv", |x| 95.0 - 60.0 / x.sqrt());
    assert_eq!(code(&segplan(dir.path(), &["predict", "sat.csv", "--laws", "power", "--target", "0.97", "--format", "csv"])), 0);
    let csv = fs::read_to_string(dir.path().join("curve_predictions.csv")).unwrap();
    assert!(csv.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).all(|l| l.contains("unreachable")), "{csv}");

    fs::write(dir.path().join("few.csv"), "x,y,unit_tag\n1,50,cases\n2,60,cases\n3,65,cases\n").unwrap();
    assert_eq!(code(&segplan(dir.path(), &["fit", "few.csv"])), 2);
    assert_eq!(code(&segplan(dir.path(), &["predict", "few.csv", "--target", "0.9"])), 2);
    fs::write(dir.path().join("nohead.csv"), "1,50\n2,60\n").unwrap();
    assert_eq!(code(&segplan(dir.path(), &["fit", "nohead.csv"])), 2);
}

#[test]
fn pipeline_verdicts() {
    let dir = fixture();
    observations(dir.path(), "high.csv", |x| 96.0 + x / 100.0);
    let o = segplan(dir.path(), &["pipeline", "masks", "high.csv", "--trials", "2", "--out", "p"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p/pipeline_verdict.json")).unwrap()).unwrap();
    assert_eq!(v["sufficient"], true);
    assert!(v["required_n"].as_f64().unwrap() <= v["current_n"].as_f64().unwrap());

    fs::write(dir.path().join("empty.csv"), "x,y,unit_tag\n").unwrap();
    assert_eq!(code(&segplan(dir.path(), &["pipeline", "masks", "empty.csv", "--trials", "2", "--out", "q"])), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("q/pipeline_verdict.json")).unwrap()).unwrap();
    assert_eq!(v["sufficient"], "unknown");
    assert!(v["target"].as_f64().unwrap() > 0.0);
}

#[test]
fn out_dir_from_environment_and_threads_do_not_change_output() {
    let dir = fixture();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_segplan"))
            .args(["minbat", "masks", "--trials", "3", "--sizes", "1,3", "--seed", "9", "--threads", threads])
            .current_dir(dir.path())
            .env("SEGPLAN_OUT_DIR", out)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        fs::read(dir.path().join(out).join("minbat_report.json")).unwrap()
    };
    assert_eq!(run("1", "t1"), run("4", "t4"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&segplan(dir.path(), &["nonsense"])), 2);
    assert_eq!(code(&segplan(dir.path(), &["stats"])), 2);
    assert_eq!(code(&segplan(dir.path(), &["stats", "missing.nii"])), 2);
    assert_eq!(code(&segplan(dir.path(), &["theory", "--threads", "0"])), 2);
    assert_eq!(code(&segplan(dir.path(), &["--version"])), 0);
}

#[test]
fn corrupt_mask_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("junk.nii"), vec![7u8; 400]).unwrap();
    assert_eq!(code(&segplan(dir.path(), &["stats", "junk.nii"])), 1);
}
