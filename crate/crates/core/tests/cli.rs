//! End-to-end runs of the `sbm` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use sbm::cli::config::RunConfig;
use sbm::cli::convergence::solve_manufactured;
use sbm::cli::vtk::{read_vtk, sample_on_lattice};
use sbm::geometry::manufactured_poisson_2d;

fn sbm(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sbm"))
        .args(args)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn convergence_with_one_level_has_empty_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, log) = sbm(&["convergence", "--levels", "1", "-o", out]);
    assert_eq!(code, 0, "{log}");
    let rows = csv_rows(&dir.path().join("convergence.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][6], "rate");
    assert_eq!(rows[1][6], "");
    let meta = fs::read_to_string(dir.path().join("metadata.json")).unwrap();
    assert!(meta.contains("cell edge length"));
}

#[test]
fn convergence_exit_code_follows_rate_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    let cfg = write_config(dir.path(), r#"{"p": 1, "mesh": {"cells": 8, "levels": 3}}"#);
    let (code, log) = sbm(&["convergence", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{log}");
    let rows = csv_rows(&out.join("convergence.csv"));
    let rate: f64 = rows[3][6].parse().unwrap();
    assert!((1.7..=2.3).contains(&rate), "{rate}");

    let cfg = write_config(dir.path(), r#"{"p": 1, "rate_band": [5.0, 6.0], "mesh": {"levels": 2}}"#);
    let out = dir.path().join("bad");
    let (code, _) = sbm(&["convergence", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn identical_runs_give_identical_csv_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let (code, log) = sbm(&["convergence", "-p", "2", "--levels", "2", "--threads", "2", "-o", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{log}");
        csv_rows(&out.join("convergence.csv"))
            .into_iter()
            .map(|mut r| {
                r.pop(); // seconds
                r
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn solve_matches_convergence_level_and_vtk_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"p": 2, "discretization": "dg", "mesh": {"cells": 8, "levels": 2}}"#;
    let cfg = write_config(dir.path(), json);
    let conv = dir.path().join("conv");
    let solve = dir.path().join("solve");
    assert_eq!(sbm(&["convergence", "-c", &cfg, "-o", conv.to_str().unwrap()]).0, 0);
    let (code, log) = sbm(&["solve", "-c", &cfg, "-o", solve.to_str().unwrap()]);
    assert_eq!(code, 0, "{log}");

    let levels = csv_rows(&conv.join("convergence.csv"));
    let summary = csv_rows(&solve.join("solve_summary.csv"));
    assert_eq!(
        summary[0],
        ["dofs", "active_cells", "iterations", "residual", "converged", "seconds", "l2_error"]
    );
    let e_conv: f64 = levels[2][5].parse().unwrap();
    let e_solve: f64 = summary[1][6].parse().unwrap();
    assert!((e_conv - e_solve).abs() <= 1e-14, "{e_conv} vs {e_solve}");
    assert_eq!(levels[2][4], summary[1][0]);

    // recompute the field in-process and compare bit for bit
    let c = RunConfig::from_json_str(json).unwrap();
    let ls = c.levelset().unwrap();
    let run = solve_manufactured(
        c.sequence().mesh(1).unwrap(),
        ls.as_ref(),
        c.operator(),
        &c.solver,
        &manufactured_poisson_2d(),
    )
    .unwrap();
    let expected = sample_on_lattice(&run.operator, &run.solution).unwrap();
    let file = fs::File::open(solve.join("solution.vtk")).unwrap();
    let back = read_vtk(std::io::BufReader::new(file)).unwrap();
    assert_eq!(back.dims, expected.dims);
    assert!(back
        .values
        .iter()
        .zip(&expected.values)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn invalid_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(sbm(&["solve", "--shape", "torus", "-o", out]).0, 2);
    let cfg = write_config(dir.path(), r#"{"geometry": {"shape": "torus"}}"#);
    assert_eq!(sbm(&["solve", "-c", &cfg, "-o", out]).0, 2);
    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(sbm(&["solve", "-c", &cfg, "-o", out]).0, 2);
    let cfg = write_config(dir.path(), r#"{"command": "bench"}"#);
    assert_eq!(sbm(&["solve", "-c", &cfg, "-o", out]).0, 2);
    assert_eq!(sbm(&["solve", "--degree", "0", "-o", out]).0, 2);
}

#[test]
fn geometry_outside_the_box_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"geometry": {"centers": [[10.0, 10.0]]}, "mesh": {"levels": 1}}"#);
    let (code, log) = sbm(&["solve", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code, 3, "{log}");
    assert!(log.contains("no active cells"));
}

#[test]
fn partition_of_three_balls_respects_greedy_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command": "partition", "parts": 4,
            "geometry": {"shape": "union_of_balls",
                         "centers": [[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5]],
                         "radii": [0.35, 0.35, 0.35], "min_gap": 0.1},
            "mesh": {"cells": 16, "levels": 2}}"#,
    );
    let (code, log) = sbm(&["partition", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{log}");
    let rows = csv_rows(&dir.path().join("partition.csv"));
    assert_eq!(rows[0], ["part", "cells", "weight", "first_slot", "end_slot", "imbalance"]);
    assert_eq!(rows.len(), 5);

    let c = RunConfig::from_json_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    let part = sbm::cli::commands::cmd_partition(&RunConfig {
        output_dir: dir.path().join("again"),
        ..c
    })
    .unwrap();
    let max_cell = *part.cell_weights.iter().max().unwrap() as f64;
    let imbalance: f64 = rows[1][5].parse().unwrap();
    assert_eq!(imbalance, part.imbalance());
    assert!(imbalance <= 1.0 + max_cell / part.average_weight());
}

#[test]
fn bench_writes_documented_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, log) = sbm(&["bench", "-d", "3", "--p-max", "2", "--reps", "3", "--cells", "6", "--levels", "1", "-o", out]);
    assert_eq!(code, 0, "{log}");
    let bench = csv_rows(&dir.path().join("bench.csv"));
    assert_eq!(
        bench[0],
        ["kind", "d", "p", "threads", "reps", "median_seconds", "ops", "mem_doubles", "dofs_per_sec"]
    );
    let kinds: Vec<&str> = bench[1..].iter().map(|r| r[0].as_str()).collect();
    for k in ["cell", "interior_face", "surrogate_face", "full_apply", "init"] {
        assert!(kinds.contains(&k), "{kinds:?}");
    }
    let memory = csv_rows(&dir.path().join("memory.csv"));
    assert_eq!(memory[0][5], "reals_per_point");
    assert_eq!(memory[1][5], "14");
    let counts = csv_rows(&dir.path().join("op_counts.csv"));
    assert_eq!(counts[0], ["p", "cell", "interior_face", "surrogate_face", "surrogate_point_eval"]);
}
