use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jjbarrier::io::{read_records, write_iv_csv, write_records, JunctionIvData, JunctionRecord};
use jjbarrier::rng::{KeyedRng, Stream};
use jjbarrier::simmons::{linspace, IvCurve, Simmons, SimmonsParams};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jjbarrier"));
    c.env_remove("JJBARRIER_OUT").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("--out-dir").arg(out).args(args).output().unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "command failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

const AREA: f64 = 57_600.0;
const T: f64 = 0.78;
const PHI: f64 = 1.48;
const VBD: f64 = 1.0;

/// Simmons IV up to `VBD`, ohmic beyond it, with multiplicative noise of
/// relative sd `noise`.
fn synthetic_junction(k: u32, noise: f64) -> JunctionIvData {
    let p = SimmonsParams::new(AREA, T, PHI).unwrap();
    let grid: Vec<f64> = linspace(-1.2, 1.2, 241);
    let model = Simmons::<f64>::default();
    let r_short = 7000.0 / 50.0;
    let rng = KeyedRng::new(99);
    let pts = grid
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let i_clean = model.current(&p, v.clamp(-VBD, VBD)).unwrap();
            let extra = if v.abs() > VBD {
                (v - v.signum() * VBD) / r_short
            } else {
                0.0
            };
            let factor = 1.0 + noise * rng.standard_normal(Stream::Synthetic, k, i as u32, 0);
            (v, i_clean * factor + extra)
        })
        .collect();
    JunctionIvData {
        junction_id: format!("J{k:02}"),
        wafer: Some(((k % 5) as i64, (k / 5) as i64)),
        curve: IvCurve::new(pts).unwrap(),
    }
}

fn write_dataset(dir: &Path, noise: f64) -> PathBuf {
    let data: Vec<JunctionIvData> = (0..20).map(|k| synthetic_junction(k, noise)).collect();
    let path = dir.join("iv.csv");
    write_iv_csv(&path, &data).unwrap();
    path
}

fn within(a: f64, b: f64, rel: f64) -> bool {
    ((a - b) / b).abs() <= rel
}

#[test]
fn fit_iv_recovers_synthetic_parameters() {
    let d = tempfile::tempdir().unwrap();
    let input = write_dataset(d.path(), 0.01);
    let out = d.path().join("fit");
    ok(&run(&["fit-iv", "--input", input.to_str().unwrap()], &out));

    let records = read_records(&out.join("records.csv")).unwrap();
    assert_eq!(records.len(), 20);
    let r0 = 1.0
        / Simmons::<f64>::default()
            .zero_bias_conductance(&SimmonsParams::new(AREA, T, PHI).unwrap())
            .unwrap();
    let s = json(&out.join("summary.json"));
    let median = |k: &str| s[k]["median"].as_f64().unwrap();
    assert!(
        within(median("resistance_ohm"), r0, 0.02),
        "R {} vs {r0}",
        median("resistance_ohm")
    );
    assert!(within(median("t_fit_nm"), T, 0.02), "t {}", median("t_fit_nm"));
    assert!(within(median("phi_fit_v"), PHI, 0.02), "phi {}", median("phi_fit_v"));
    // Increment noise at 1% can trigger the jump detector early, never late.
    for r in &records {
        let v = r.v_bd_v.unwrap();
        assert!(v <= VBD + 1e-9 && v > 0.5, "{}: V_bd {v}", r.junction_id);
    }
    assert_eq!(s["n_converged"].as_u64(), Some(20));
    for f in ["hist_resistance.csv", "hist_t_fit.svg", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn empty_dataset_is_a_clean_error() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("empty.csv");
    std::fs::write(&input, "voltage_V,current_A\n").unwrap();
    let o = run(&["fit-iv", "--input", input.to_str().unwrap()], &d.path().join("out"));
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no IV data"), "{err}");
    assert!(!err.contains("panicked"), "{err}");
}

#[test]
fn missing_input_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["fit-iv"], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--input"));
}

#[test]
fn small_sweep_writes_every_table() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("sweep");
    let args = [
        "sweep",
        "--mean-start",
        "0.8",
        "--mean-end",
        "0.825",
        "--sd-start",
        "0",
        "--sd-end",
        "0.025",
        "--n-junctions",
        "3",
        "--width-nm",
        "20",
        "--height-nm",
        "20",
    ];
    ok(&run(&args, &out));
    assert_eq!(csv_rows(&out.join("sweep.csv")).len(), 4);
    for m in ["resistance", "spread", "phi_fit", "t_fit", "match_count"] {
        let rows = csv_rows(&out.join(format!("heatmap_{m}.csv")));
        assert_eq!(rows.len(), 4, "{m}");
        assert!(out.join(format!("heatmap_{m}.svg")).exists());
    }
    let first = &csv_rows(&out.join("sweep.csv"))[0];
    assert_eq!((&first[0], &first[1]), ("0.8", "0"));
}

#[test]
fn invalid_sweep_rejected_before_compute() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("bad");
    let o = run(&["sweep", "--barrier-height", "0.5", "--fit-v-max", "1.2"], &out);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Simmons domain"));
    assert!(!out.join("sweep.csv").exists());
}

#[test]
fn replay_is_byte_identical_and_detects_changed_input() {
    let d = tempfile::tempdir().unwrap();
    let input = write_dataset(d.path(), 0.01);
    let first = d.path().join("first");
    ok(&run(&["fit-iv", "--input", input.to_str().unwrap()], &first));
    let second = d.path().join("second");
    ok(&run(
        &["replay", first.join("manifest.json").to_str().unwrap()],
        &second,
    ));
    for name in ["records.csv", "summary.json", "manifest.json"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }

    std::fs::write(&input, "voltage_V,current_A\n0,0\n").unwrap();
    let o = run(
        &["replay", first.join("manifest.json").to_str().unwrap()],
        &d.path().join("third"),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("changed"));
}

#[test]
fn config_file_and_flags_merge_in_order() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "[breakdown]\nn_junctions = 12\nseed = 5\nmean = 1.1\n").unwrap();
    let out = d.path().join("bd");
    let o = bin()
        .args(["--out-dir", out.to_str().unwrap(), "--config", cfg.to_str().unwrap()])
        .args(["breakdown", "--seed", "6", "--mesh-nm", "1"])
        .output()
        .unwrap();
    ok(&o);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["n_junctions"], 12);
    assert_eq!(m["config"]["mean"], 1.1);
    assert_eq!(m["config"]["seed"], 6);
    assert_eq!(m["seed"], 6);
    assert_eq!(csv_rows(&out.join("minima.csv")).len(), 12);

    std::fs::write(&cfg, "[breakdown]\nmesh = 1\n").unwrap();
    let o = bin()
        .args([
            "--out-dir",
            out.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "breakdown",
        ])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key 'mesh'"));
}

#[test]
fn output_dir_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("from-env");
    let o = bin()
        .env("JJBARRIER_OUT", &out)
        .args(["breakdown", "--n-junctions", "4", "--mesh-nm", "2"])
        .output()
        .unwrap();
    ok(&o);
    assert!(out.join("minima.csv").exists());
}

#[test]
fn breakdown_on_measured_data() {
    let d = tempfile::tempdir().unwrap();
    let input = write_dataset(d.path(), 0.001);
    let out = d.path().join("bd");
    ok(&run(&["breakdown", "--input", input.to_str().unwrap()], &out));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["n_breakdown"], 20);
    assert!(s["relative_sd"].as_f64().unwrap() < 0.01);
    for row in csv_rows(&out.join("breakdown.csv")) {
        let v: f64 = row[1].parse().unwrap();
        assert!((v - VBD).abs() < 1e-9, "{}: {v}", &row[0]);
    }
    // Every junction breaks below 1.3 V.
    assert_eq!(s["grouping"]["low"]["count"], 20);
    assert_eq!(csv_rows(&out.join("breakdown.csv")).len(), 20);
}

#[test]
fn simulated_breakdown_calibrates() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("bd");
    ok(&run(
        &[
            "breakdown",
            "--n-junctions",
            "30",
            "--mesh-nm",
            "1",
            "--target-vbd",
            "1.3",
            "--cumulative",
        ],
        &out,
    ));
    let cal = json(&out.join("calibration.json"));
    let s = json(&out.join("summary.json"));
    let e = cal["e_ds"].as_f64().unwrap();
    let tmin = s["mean_min_thickness_nm"].as_f64().unwrap();
    assert!((e * tmin - 1.3).abs() < 1e-12);
    let a50 = s["a50"].as_f64().unwrap();
    assert!(a50 > 0.0 && a50 <= 0.5);
    assert!(out.join("cumulative_conductance.csv").exists());
}

#[test]
fn flat_stem_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let sim = d.path().join("sim");
    ok(&run(
        &["stem", "simulate", "--rms", "0", "--noise-sd", "0", "--blur-nm", "0"],
        &sim,
    ));
    for f in ["topography.txt", "region_0.txt", "region_0.pgm"] {
        assert!(sim.join(f).exists(), "{f} missing");
    }
    let ana = d.path().join("ana");
    ok(&run(
        &[
            "stem",
            "analyze",
            "--image",
            sim.join("region_0.txt").to_str().unwrap(),
            "--deltas",
            "0",
        ],
        &ana,
    ));
    let s = json(&ana.join("summary.json"));
    let mean = s[0]["deltas"][0]["mean_nm"].as_f64().unwrap();
    let sd = s[0]["deltas"][0]["sd_nm"].as_f64().unwrap();
    assert!((mean - 2.0).abs() <= 0.15, "mean {mean}");
    assert!(sd < 1e-9, "sd {sd}");
}

fn record(id: &str, x: Option<i64>, y: Option<i64>, r: f64) -> JunctionRecord {
    JunctionRecord {
        junction_id: id.into(),
        wafer_x: x,
        wafer_y: y,
        resistance_ohm: Some(r),
        t_fit_nm: Some(0.78),
        phi_fit_v: Some(1.48),
        v_bd_v: None,
        residual: Some(1e-14),
        converged: true,
    }
}

#[test]
fn report_builds_wafer_grid() {
    let d = tempfile::tempdir().unwrap();
    let recs: Vec<JunctionRecord> = (0..16)
        .map(|k| record(&format!("J{k}"), Some(k % 4), Some(k / 4), 7000.0 + k as f64))
        .collect();
    let path = d.path().join("records.csv");
    write_records(&path, &recs).unwrap();
    let out = d.path().join("rep");
    ok(&run(&["report", "--input", path.to_str().unwrap()], &out));
    assert_eq!(csv_rows(&out.join("grid.csv")).len(), 16);
    let map = csv_rows(&out.join("map_resistance_ohm.csv"));
    assert_eq!(map.len(), 4);
    assert_eq!(map[2].len(), 5);
    assert_eq!(&map[2][0], "2");
    assert_eq!(&map[2][3], "7010");
    assert!(std::fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .contains("junctions 16"));
}

#[test]
fn report_falls_back_without_coordinates() {
    let d = tempfile::tempdir().unwrap();
    let recs = vec![record("A", Some(0), Some(0), 7000.0), record("B", None, None, 7100.0)];
    let path = d.path().join("records.csv");
    write_records(&path, &recs).unwrap();
    let out = d.path().join("rep");
    ok(&run(&["report", "--input", path.to_str().unwrap()], &out));
    assert!(!out.join("grid.csv").exists());
    assert_eq!(read_records(&out.join("table.csv")).unwrap(), recs);
}

#[test]
fn iv_csv_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let data: Vec<JunctionIvData> = (0..3).map(|k| synthetic_junction(k, 0.01)).collect();
    let path = d.path().join("iv.csv");
    write_iv_csv(&path, &data).unwrap();
    assert_eq!(jjbarrier::io::read_iv_csv(&path).unwrap(), data);
}
