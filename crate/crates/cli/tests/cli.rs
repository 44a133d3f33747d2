// SPDX-License-Identifier: Apache-2.0 OR MIT

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn uatg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uatg"))
        .args(args)
        .env_remove("UATG_THREADS")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn plan_numbers(dir: &TempDir) -> String {
    let out = path(dir, "numbers.plan.json");
    let o = uatg(&["plan", &scenario("numbers-16.json"), "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

#[test]
fn plan_reports_three_transitions() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "plan.json");
    let o = uatg(&["plan", &scenario("numbers-16.json"), "--out", &out, "--dt", "0.05", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("16 drones, 3 stages"), "{text}");
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("stage")).count(), 3);
    assert!(text.contains("min separation"));
    let plan = read_json(&out);
    assert_eq!(plan["schema_version"], 1);
    assert_eq!(plan["stages"].as_array().unwrap().len(), 3);
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", "{\n  \"schema_version\": 1,\n  \"n_drones\": \n}");
    let o = uatg(&["plan", &cfg, "--out", &path(&dir, "x.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let missing = uatg(&["plan", &path(&dir, "nope.json"), "--out", &path(&dir, "x.json")]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn too_few_drones_exits_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "few.json",
        r#"{"schema_version": 1, "n_drones": 2,
            "initial_layout": {"grid": {"spacing": 2.25}},
            "stages": [{"goals": {"points": [[0, 0, 10], [3, 0, 10], [6, 0, 10]]}}]}"#,
    );
    let o = uatg(&["plan", &cfg, "--out", &path(&dir, "x.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2 drones"), "{}", stderr(&o));
}

#[test]
fn validate_accepts_planner_output_and_is_monotone_in_dt() {
    let dir = TempDir::new().unwrap();
    let plan = plan_numbers(&dir);
    let coarse = uatg(&["validate", &plan, "--dt", "0.05"]);
    let fine = uatg(&["validate", &plan, "--dt", "0.01"]);
    assert_eq!(coarse.status.code(), Some(0));
    assert_eq!(fine.status.code(), Some(0));
    let min = |o: &Output| serde_json::from_str::<Value>(&stdout(o)).unwrap()["min_distance"].as_f64().unwrap();
    assert!(min(&fine) <= min(&coarse));
    assert!(min(&fine) >= 1.5);
}

#[test]
fn validate_flags_two_drones_on_one_path() {
    let dir = TempDir::new().unwrap();
    let plan = plan_numbers(&dir);
    let mut doc = read_json(&plan);
    doc["drones"][1]["phases"] = doc["drones"][0]["phases"].clone();
    let edited = write(&dir, "edited.json", &doc.to_string());
    let o = uatg(&["validate", &edited]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let first = &report["violations"][0];
    assert_eq!(first["pair"], serde_json::json!([0, 1]));
    assert_eq!(first["min_distance"], 0.0);
}

#[test]
fn validate_and_export_reject_unparsable_plans() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "[1, 2");
    assert_eq!(uatg(&["validate", &bad]).status.code(), Some(2));
    assert_eq!(uatg(&["export", &bad, "--out", &path(&dir, "f.csv")]).status.code(), Some(2));
}

#[test]
fn export_of_a_ten_second_plan_has_101_frames() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "one.json",
        r#"{"schema_version": 1, "n_drones": 1,
            "initial_layout": {"points": [[0, 0, 0]]},
            "landing": false,
            "stages": [{"label": "up", "arrival_time": 8.0, "goals": {"points": [[0, 0, 9]]}}]}"#,
    );
    let plan = path(&dir, "one.plan.json");
    assert_eq!(uatg(&["plan", &cfg, "--out", &plan]).status.code(), Some(0));
    let doc = read_json(&plan);
    assert!((doc["tf"].as_f64().unwrap() - 10.0).abs() < 1e-9);

    let csv = path(&dir, "frames.csv");
    let o = uatg(&["export", &plan, "--dt", "0.1", "--out", &csv]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(text.lines().next().unwrap(), "t,drone_id,x,y,z,vx,vy,vz,led");
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r[8] == 0.0 || r[8] == 1.0));
    // At the arrival frame the drone sits on its goal, at rest, lit.
    let at = rows.iter().find(|r| (r[0] - 8.0).abs() < 1e-9).unwrap();
    assert!((at[4] - 9.0).abs() < 1e-6 && at[2].abs() < 1e-6 && at[3].abs() < 1e-6);
    assert!(at[5..8].iter().all(|v| v.abs() < 1e-6));
    assert_eq!(at[8], 1.0);
    assert_eq!(rows[0][8], 0.0);
}

#[test]
fn export_rows_hit_stage_goals() {
    let dir = TempDir::new().unwrap();
    let plan = plan_numbers(&dir);
    let doc = read_json(&plan);
    let csv = path(&dir, "frames.csv");
    assert_eq!(uatg(&["export", &plan, "--dt", "0.05", "--out", &csv]).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let n = doc["drones"].as_array().unwrap().len();
    let tf = doc["tf"].as_f64().unwrap();
    assert_eq!(text.lines().count() - 1, n * ((tf / 0.05 + 1e-9).floor() as usize + 1));
    // Hover end times are on the export grid here; check positions there.
    for stage in doc["stages"].as_array().unwrap() {
        let t = stage["hover_end"].as_f64().unwrap();
        let goals = stage["goals"].as_array().unwrap();
        for (d, g) in stage["assignment"]["drone_to_goal"].as_array().unwrap().iter().enumerate() {
            let Some(g) = g.as_u64() else { continue };
            let row: Vec<f64> = text
                .lines()
                .skip(1)
                .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect::<Vec<f64>>())
                .find(|r| (r[0] - t).abs() < 1e-6 && r[1] as usize == d)
                .expect("frame at hover end");
            let goal: Vec<f64> = goals[g as usize].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            for k in 0..3 {
                assert!((row[2 + k] - goal[k]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn bench_writes_one_row_per_size_deterministically() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = path(&dir, name);
        let o = uatg(&["bench", "--sizes", "16,64", "--seed", "4", "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("drones"));
        std::fs::read_to_string(out).unwrap()
    };
    let strip = |csv: &str| -> Vec<String> {
        csv.lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                [&f[..2], &f[6..]].concat().join(",")
            })
            .collect()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a.lines().count(), 3);
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn glyph_command_rasterizes_text() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "tsag.json");
    let o = uatg(&["glyph", "TSAG", "--cell-size", "2.25", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(&out).as_array().unwrap().len(), 58);

    let bad = uatg(&["glyph", "?", "--cell-size", "1", "--out", &path(&dir, "q.json")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("unsupported glyph"));

    let small = path(&dir, "small.json");
    let large = path(&dir, "large.json");
    uatg(&["glyph", "123", "--cell-size", "1", "--out", &small, "--anchor", "0,0,0"]);
    uatg(&["glyph", "123", "--cell-size", "3", "--out", &large, "--anchor", "0,0,0"]);
    let (s, l) = (read_json(&small), read_json(&large));
    let (s, l) = (s.as_array().unwrap(), l.as_array().unwrap());
    assert_eq!(s.len(), l.len());
    for (p, q) in s.iter().zip(l) {
        for k in 0..3 {
            assert!((p[k].as_f64().unwrap() * 3.0 - q[k].as_f64().unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn thread_cap_is_honoured_and_checked() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "g.json");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_uatg"))
            .args(["glyph", "A", "--cell-size", "1", "--out", &out])
            .env("UATG_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("0").status.code(), Some(0));
    assert_eq!(run("many").status.code(), Some(2));
    assert!(Path::new(&out).exists());
}
