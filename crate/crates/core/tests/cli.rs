//! End-to-end runs of the `optcar` binary and the file formats.

mod common;

use std::fs;
use std::process::{Command, Output};

use optcar::io::{parse_problem, read_trajectory_csv, RunOutput};

fn optcar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optcar"))
        .args(args)
        .env_remove("OPTCAR_JOBS")
        .output()
        .expect("binary runs")
}

fn path(name: &str) -> String {
    common::problem_path(name).display().to_string()
}

#[test]
fn bundled_linear_problem_parses() {
    let p = parse_problem(common::problem_path("linear.json")).unwrap();
    assert_eq!(p.system.pieces.len(), 1);
    assert_eq!(p.system.proposition_names(), vec!["goal", "free"]);
    assert_eq!(p.x0, vec![0.9, 0.9]);
}

#[test]
fn bundled_two_tank_problem_has_two_dynamics() {
    let p = parse_problem(common::problem_path("twotank.json")).unwrap();
    let mut names: Vec<&str> = p.system.pieces.iter().map(|pc| pc.name.as_str()).collect();
    names.dedup();
    assert_eq!(names, vec!["below_pipe", "above_pipe"]);
    assert_eq!(p.system.pieces[0].map.apply(&[0.0, 0.0], &[0.0005])[0], 342.6753 * 0.0005);
    // the pipe level switches the dynamics
    assert_eq!(p.system.piece_of(&[0.1, 0.1]), Some(0));
    assert_eq!(p.system.piece_of(&[0.3, 0.1]), Some(1));
    assert_eq!(p.system.piece_of(&[0.1, 0.3]), Some(2));
}

#[test]
fn toy_game_costs_two() {
    let out = optcar(&["solve", &path("toy_game.json")]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("cost 2"));
    assert!(stdout.contains("choices 0 "));
}

#[test]
fn zero_inputs_follow_the_hand_computed_first_step() {
    let out = optcar(&["simulate", &path("linear.json"), "--inputs", "zeros(6)"]);
    assert!(out.status.success());
    let table = read_trajectory_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(table.states.len(), 7);
    assert!((table.states[1][0] - 0.486).abs() < 1e-15);
    assert!((table.states[1][1] - 0.738).abs() < 1e-15);
    assert!(table.stage_costs.iter().all(|&c| c == 0.0));
}

#[test]
fn two_iterations_do_not_increase_the_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = optcar(&[
        "synthesize",
        &path("linear.json"),
        "--iterations",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(out_dir.join("report.json")).unwrap();
    let run = RunOutput::from_json(&text).unwrap();
    assert_eq!(run.reports.len(), 2);
    assert!(run.reports[1].abstract_cost <= run.reports[0].abstract_cost);
    assert!(out_dir.join("timings.json").exists());

    // round trip is exact, down to the bytes
    assert_eq!(run.to_json(), text);

    // replaying a trajectory table reproduces its states
    let csv = out_dir.join("trajectory_1.csv");
    let recorded = read_trajectory_csv(fs::File::open(&csv).unwrap()).unwrap();
    let replay = optcar(&["simulate", &path("linear.json"), "--table", csv.to_str().unwrap()]);
    let replayed = read_trajectory_csv(replay.stdout.as_slice()).unwrap();
    for (a, b) in recorded.states.iter().zip(&replayed.states) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn reports_do_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for jobs in ["1", "4"] {
        let out_dir = dir.path().join(jobs);
        let out = optcar(&[
            "--jobs",
            jobs,
            "--seed",
            "5",
            "synthesize",
            &path("linear.json"),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        reports.push(fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn losing_problem_exits_with_two() {
    let out = optcar(&["synthesize", &path("twotank.json"), "--iterations", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let run = RunOutput::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(!run.reports[0].winning);
    assert!(run.reports[0].abstract_cost.is_infinite());
}

#[test]
fn invalid_problem_exits_with_one_and_names_the_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let mut problem: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(common::problem_path("twotank.json")).unwrap()).unwrap();
    problem["pieces"][0]["region"]["upper"] = serde_json::json!([0.5, 0.5]);
    let file = dir.path().join("bad.json");
    fs::write(&file, problem.to_string()).unwrap();
    let out = optcar(&["synthesize", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("`below_pipe`") && stderr.contains("`above_pipe`"), "{stderr}");
}

#[test]
fn check_passes_on_the_linear_problem() {
    let out = optcar(&["check", &path("linear.json"), "--samples", "300"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("ok")).count(), 5, "{stdout}");
}

#[test]
fn abstraction_dump_lists_every_cell() {
    let out = optcar(&["abstract", &path("linear.json")]);
    assert!(out.status.success());
    let dump: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(dump["cells"].as_array().unwrap().len(), 400);
    assert_eq!(dump["sink"], 400);
    assert_eq!(dump["epsilon"], serde_json::json!(["1/10", "1/10"]));
}
