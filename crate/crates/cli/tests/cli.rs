use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fts_core::domains::{scenes, ProblemSpec};
use fts_core::io::{problem_json, RunReport};
use fts_core::value::Value;
use tempfile::TempDir;

fn fts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fts"))
        .args(args)
        .env_remove("FTS_SEED")
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn problem(dir: &TempDir, name: &str, spec: &ProblemSpec) -> PathBuf {
    write(dir, name, &problem_json(spec))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(out: &Output) -> RunReport {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn satisfied_goal_exits_zero_with_empty_plan() {
    let dir = TempDir::new().unwrap();
    let mut spec = scenes::line_pick_place();
    spec.objects[0].pose = vec![2.5];
    let p = problem(&dir, "p.json", &ProblemSpec::Manip(spec));
    let out = fts(&["solve", s(&p)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out).plan.unwrap().is_empty());
}

#[test]
fn unplaceable_goal_exits_two() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "p.json", &scenes::named("line-unplaceable").unwrap());
    let out = fts(&["solve", s(&p), "--algo", "focused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(report(&out).plan.is_none());
}

#[test]
fn exhausted_time_budget_exits_three() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "p.json", &scenes::named("regrasp").unwrap());
    let out = fts(&["solve", s(&p), "--timeout-s", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_and_parse_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(fts(&["solve"]).status.code(), Some(1));
    assert_eq!(fts(&["solve", "missing.json"]).status.code(), Some(1));
    let bad = write(
        &dir,
        "bad.json",
        "{\"domain\": \"motion\", \"surprise\": 1}",
    );
    assert_eq!(fts(&["solve", s(&bad)]).status.code(), Some(1));
    assert_eq!(
        fts(&["bench", "--experiment", "distractors", "--sizes", "99"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(fts(&["--help"]).status.code(), Some(0));
}

#[test]
fn reports_validate_and_corrupted_plans_do_not() {
    let dir = TempDir::new().unwrap();
    for name in ["line", "line-mobile", "obstructed-pick"] {
        let p = problem(&dir, "p.json", &scenes::named(name).unwrap());
        let out = fts(&["solve", s(&p), "--seed", "4"]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let r = write(&dir, "r.json", std::str::from_utf8(&out.stdout).unwrap());
        let v = fts(&["validate", s(&p), s(&r)]);
        assert_eq!(v.status.code(), Some(0), "{name}");

        let mut plan = report(&out).plan.unwrap();
        let step = plan
            .controls
            .iter()
            .position(|u| matches!(u[0], Value::Traj(_)))
            .unwrap();
        let Value::Traj(pts) = &plan.controls[step][0] else {
            unreachable!()
        };
        let mut pts = pts.to_vec();
        pts[0][0] += 0.125;
        plan.controls[step][0] = Value::traj(pts);
        let bad = write(&dir, "bad.json", &serde_json::to_string(&plan).unwrap());
        let v = fts(&["validate", s(&p), s(&bad)]);
        assert_eq!(v.status.code(), Some(4), "{name}");
        let text = String::from_utf8(v.stdout).unwrap();
        assert!(text.contains(&format!("step {}", step + 1)), "{text}");
    }
    let p = problem(&dir, "p.json", &scenes::named("line").unwrap());
    assert_eq!(
        fts(&["validate", s(&p), "missing.json"]).status.code(),
        Some(1)
    );
}

#[test]
fn same_invocation_gives_identical_reports() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "p.json", &scenes::named("obstructed-pick").unwrap());
    let args = ["solve", s(&p), "--seed", "11", "--search", "hff"];
    let a = fts(&args);
    let b = fts(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_defaults_from_environment() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "p.json", &scenes::named("line").unwrap());
    let flag = fts(&["solve", s(&p), "--seed", "5"]);
    let env = Command::new(env!("CARGO_BIN_EXE_fts"))
        .args(["solve", s(&p)])
        .env("FTS_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(report(&env).seed, 5);
    assert_eq!(flag.stdout, env.stdout);
}

fn without_seconds(csv: &[u8]) -> Vec<String> {
    std::str::from_utf8(csv)
        .unwrap()
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(5);
            f.join(",")
        })
        .collect()
}

#[test]
fn bench_rows_are_sorted_and_reproducible() {
    let one = fts(&[
        "bench",
        "--experiment",
        "distractors",
        "--sizes",
        "1",
        "--trials",
        "1",
    ]);
    assert_eq!(one.status.code(), Some(0));
    let lines = without_seconds(&one.stdout);
    assert_eq!(lines[0], "experiment,size,trial,algo,outcome,sampler_calls");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("distractors,1,0,incremental,solved"));
    assert!(lines[2].starts_with("distractors,1,0,focused,solved"));

    let args = [
        "bench",
        "--experiment",
        "tabletop-grid",
        "--sizes",
        "2,1",
        "--trials",
        "2",
        "--algos",
        "focused",
    ];
    let a = fts(&args);
    let b = fts(&args);
    let rows = without_seconds(&a.stdout);
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("tabletop-grid,1,0,"));
    assert!(rows[4].starts_with("tabletop-grid,2,1,"));
    assert_eq!(rows, without_seconds(&b.stdout));
}

#[test]
fn examples_parse_back() {
    for name in scenes::NAMES {
        let out = fts(&["example", name]);
        assert_eq!(out.status.code(), Some(0));
        let spec = fts_core::io::parse_problem(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        assert_eq!(spec, scenes::named(name).unwrap());
    }
    assert_eq!(fts(&["example", "nope"]).status.code(), Some(1));
}
