use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbs-steer"))
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "lead_id": "left",
  "scenario": {{ "synthetic": {{ "spec": {{ "regions": [
    {{ "name": "motor", "center": [1.6, 0.4, 5.0], "semi_axes": [2.4, 1.8, 2.2], "count": 60 }},
    {{ "name": "associative", "center": [-2.6, 1.8, 4.2], "semi_axes": [1.8, 1.6, 1.8], "count": 40 }},
    {{ "name": "limbic", "center": [-1.6, -2.6, 2.0], "semi_axes": [1.6, 1.4, 1.6], "count": 40 }}
  ] }} }} }},
  "lead": {{ "model_id": "boston_cartesia_8", "tip": [-0.8, 0.9, 0.0], "axis": [0, 0, 1] }},
  "problem": {{ "voxel_mm": 1.5 }},
  "solver": {{ "time_limit_s": 60, "seed": 3 }},
  "output_dir": "{}"{extra}
}}"#,
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn generate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    for out in ["a", "b"] {
        let status = bin()
            .args(["generate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    let a = std::fs::read(dir.path().join("a/cloud.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/cloud.csv")).unwrap());
    dbs_steer::cloud::load_cloud(dir.path().join("a/cloud.csv")).unwrap();
}

#[test]
fn optimize_sweep_compare_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = bin()
        .args([
            "optimize",
            "--method",
            "lp",
            "--theta",
            "0,0.2,0.4,0.6,0.8,1.0",
            "--config",
        ])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            (name.starts_with("report_lp_") && name.ends_with(".json")).then_some(name)
        })
        .collect();
    assert_eq!(reports.len(), 6);

    let status = bin()
        .args(["optimize", "--method", "milp", "--config"])
        .arg(&cfg)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/report_milp.json")).unwrap()).unwrap();
    assert_eq!(report["input_digest"].as_str().unwrap().len(), 64);
    assert!(report["beta"].as_f64().unwrap() <= 0.5);

    let o = dir.path().join("out");
    let out = bin()
        .arg("compare")
        .args([
            o.join("report_milp.json"),
            o.join("report_lp_theta0.json"),
            o.join("report_lp_theta1.json"),
        ])
        .arg("--out")
        .arg(&o)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(o.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3);

    let status = bin()
        .args(["optimize", "--theta", "1.5", "--config"])
        .arg(&cfg)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(4));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"problem": {}}"#).unwrap();
    let status = bin().args(["generate", "--config"]).arg(&bad).output().unwrap().status;
    assert_eq!(status.code(), Some(4));
}

#[test]
fn milp_timeout_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("\"time_limit_s\": 60", "\"time_limit_s\": 0");
    std::fs::write(&cfg, text).unwrap();
    let status = bin()
        .args(["optimize", "--method", "milp", "--config"])
        .arg(&cfg)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn bench_rows_and_downsample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let status = bin()
        .args(["bench", "--voxel", "2.5,2.0,1.5", "--jobs", "2", "--config"])
        .arg(&cfg)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "voxel_mm,n_t,n_c,method,wall_time_s,status,beta,objective");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines
        .iter()
        .filter(|l| l.contains(",lp,"))
        .all(|l| l.contains(",optimal,")));

    let status = bin()
        .args(["downsample", "--voxel", "1.0,0.95", "--config"])
        .arg(&cfg)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("out/cloud_voxel_0.95.csv").exists());
}
