use lima::simulator::CSV_HEADER;
use std::path::Path;
use std::process::{Command, Output};

fn lima(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lima")).args(args).output().expect("spawn lima")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_prints_header_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"area_side_km": 3.0, "sim_hours": 0.5}"#);
    let out = lima(&["run", "--config", &cfg, "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("lima,3.0,9,4,"), "{}", lines[1]);
}

#[test]
fn golden_header() {
    assert_eq!(
        CSV_HEADER,
        "mode,area_side_km,ed_count,lr_count,traffic_period_s,packets_per_hour,sim_hours,seeds,sent,delivered,in_flight,\
         lost_radio,lost_mesh,lost_duty_cycle,pdr_percent,energy_per_ed_j,latency_ms_mean,energy_per_lr_j,\
         energy_per_lr_total_j,lr_avg_power_w,drop_dnof,drop_not_der,drop_duplicate,drop_no_route,drop_stale,\
         drop_too_large,lima_frames_sent,downlinks_sent"
    );
}

#[test]
fn out_writes_csv_and_json_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"area_side_km": 2.0, "sim_hours": 0.5, "mode": "baseline"}"#);
    let csv_path = dir.path().join("r.csv");
    let out = lima(&["run", "--config", &cfg, "--out", csv_path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with(CSV_HEADER));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.json")).unwrap()).unwrap();
    assert_eq!(sidecar["scenario"]["mode"], "lorawan_baseline");
    assert_eq!(sidecar["seeds"], serde_json::json!([1]));
    assert_eq!(sidecar["metrics"][0]["lr_count"], 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"area_side_km": 5.0, "sim_hours": 2.0, "traffic_period_s": 600}"#);
    let a = lima(&["run", "--config", &cfg, "--seed", "9"]);
    let b = lima(&["run", "--config", &cfg, "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = lima(&["run", "--config", &cfg, "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"area_side_km": 3.0, "sim_hours": 0.3}"#);
    let trace = dir.path().join("t.jsonl");
    let out = lima(&["run", "--config", &cfg, "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.lines().count() > 10);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["t"].is_u64() && v["ev"].is_string(), "{line}");
    }
}

#[test]
fn missing_config_exits_2() {
    let out = lima(&["run", "--config", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"area_side_km": "#);
    assert_eq!(lima(&["run", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "o.json", r#"{"area_side_km": 12.0}"#);
    assert_eq!(lima(&["run", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn disconnected_mesh_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"area_side_km": 10.0, "sim_hours": 0.1,
            "layout": {"lgs": [{"x": 0.0, "y": 0.0}], "lrs": [{"x": 1000.0, "y": 0.0}, {"x": 9000.0, "y": 9000.0}], "eds": [{"x": 500.0, "y": 0.0}]}}"#,
    );
    let out = lima(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_exits_1() {
    let out = lima(&["run", "--hours", "0.1", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inspect_decodes_and_rejects() {
    let out = lima(&["inspect", "40 04 03 02 01 00 00 00 01 02 03 04 05"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("UnconfirmedDataUp"));
    assert_eq!(lima(&["inspect", "0xZZ"]).status.code(), Some(2));
}

#[test]
fn dump_routes_lists_every_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"area_side_km": 6.0, "sim_hours": 0.5}"#);
    let out = lima(&["dump-routes", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("# LR")).count(), 9);
    assert_eq!(text.lines().filter(|l| l.starts_with("# LG")).count(), 1);
    assert!(text.lines().any(|l| l.starts_with("up\t")));
}
