use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bellmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellmap"))
        .args(args)
        .env_remove("BELLMAP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const FAST: [&str; 4] = ["--restarts", "2", "--threads", "1"];

fn optimize(extra: &[&str]) -> Output {
    let mut args = vec!["optimize"];
    args.extend_from_slice(&FAST);
    args.extend_from_slice(extra);
    bellmap(&args)
}

#[test]
fn optimize_prints_a_record_in_fixed_field_order() {
    let out = optimize(&["--alpha", "60", "--kind", "m1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let keys = [
        "state",
        "d",
        "alpha_deg",
        "beta_deg",
        "kind",
        "m",
        "noise",
        "frozen",
        "v_crit",
        "v_crit_exact",
        "status",
        "extended_visibility",
        "restarts",
        "seed",
        "best_restart",
        "evaluations",
        "alice",
        "bob",
        "wall_time_s",
    ];
    let positions: Vec<usize> = keys
        .iter()
        .map(|k| {
            text.find(&format!("\"{k}\":"))
                .unwrap_or_else(|| panic!("missing {k}"))
        })
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{text}");

    let v = json(&out);
    assert_eq!(v["state"], "psi(60, 45)");
    assert_eq!(
        (v["alpha_deg"].as_f64(), v["beta_deg"].as_f64()),
        (Some(60.0), Some(45.0))
    );
    assert_eq!(v["status"], "violation");
    let exact = v["v_crit_exact"].as_f64().unwrap();
    assert!((v["v_crit"].as_f64().unwrap() - exact).abs() <= 5e-5 + 1e-12);
    assert!(exact < 0.75, "{exact}");
    assert_eq!(v["alice"].as_array().unwrap().len(), 2);
    assert_eq!(v["alice"][0].as_array().unwrap().len(), 2);
}

#[test]
fn product_state_has_no_violation() {
    let v = json(&optimize(&["--state", "product"]));
    assert_eq!(v["v_crit"], 1.0);
    assert_eq!(v["status"], "no_violation");
}

#[test]
fn fixed_seed_reproduces_the_optimum() {
    let run = || {
        let mut v = json(&optimize(&["--alpha", "60", "--kind", "m2", "--seed", "5"]));
        v.as_object_mut().unwrap().remove("wall_time_s");
        v
    };
    assert_eq!(run(), run());
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = optimize(&[
        "--state",
        "sym",
        "--kind",
        "m1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&out));
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["optimize", "--state", "nonsense"],
        &["optimize", "--state", "sym", "--kind", "m7"],
        &["optimize", "--state", "sym", "--alpha", "30"],
        &["optimize"],
        &["optimize", "--state", "sym", "--restarts", "0"],
        &["optimize", "--state", "sym", "--freeze", "99"],
        &["map", "--alphas", "0:10"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = bellmap(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn bad_thread_variable_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_bellmap"))
        .args(["optimize", "--state", "sym", "--restarts", "1"])
        .env("BELLMAP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("BELLMAP_THREADS"));
}

#[test]
fn unwritable_output_exits_3() {
    let out = optimize(&[
        "--state",
        "sym",
        "--kind",
        "m1",
        "--out",
        "/nonexistent-dir/r.json",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&bellmap(&["--help"])), 0);
    assert_eq!(code(&bellmap(&["map", "--help"])), 0);
}

fn map_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "map", "--alphas", "40:50:10", "--betas", "30:45:15", "--kind", "m1",
    ];
    args.extend_from_slice(&FAST);
    args.extend_from_slice(extra);
    args
}

#[test]
fn map_csv_is_deterministic_and_row_major() {
    let first = bellmap(&map_args(&[]));
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha_deg,beta_deg,v_crit,restarts,seed");
    let points: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 5);
            assert_eq!(f[2].split('.').nth(1).map(str::len), Some(4), "{l}");
            (f[0], f[1])
        })
        .collect();
    assert_eq!(
        points,
        [("40", "30"), ("40", "45"), ("50", "30"), ("50", "45")]
    );
    assert_eq!(stdout(&bellmap(&map_args(&[]))), text);
}

fn pgm_header(bytes: &[u8]) -> (usize, usize, &[u8]) {
    let mut fields = Vec::new();
    let mut at = 0;
    while fields.len() < 4 {
        let end = at
            + bytes[at..]
                .iter()
                .position(|b| b.is_ascii_whitespace())
                .unwrap();
        fields.push(std::str::from_utf8(&bytes[at..end]).unwrap().to_string());
        at = end + 1;
    }
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "255");
    (
        fields[1].parse().unwrap(),
        fields[2].parse().unwrap(),
        &bytes[at..],
    )
}

#[test]
fn map_writes_a_pgm_with_a_range_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("v.pgm");
    let csv = dir.path().join("v.csv");
    let out = bellmap(&map_args(&[
        "--out",
        csv.to_str().unwrap(),
        "--pgm",
        pgm.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let bytes = std::fs::read(&pgm).unwrap();
    let (cols, rows, pixels) = pgm_header(&bytes);
    assert_eq!((cols, rows, pixels.len()), (2, 2, 4));
    assert!(pixels.iter().all(|&p| p < 255));
    assert!(pixels.contains(&0) && pixels.contains(&254));
    let side = std::fs::read_to_string(Path::new(&format!("{}.txt", pgm.display()))).unwrap();
    assert!(side.starts_with("quantity v_crit\nmin 0."), "{side}");
    assert!(side.contains("hole 255"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# search setup\nstate = sym\nkind = m1\nrestarts = 2\nseed = 9\nthreads = 1\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let v = json(&bellmap(&["optimize", "--config", cfg]));
    assert_eq!(
        (v["kind"].as_str(), v["seed"].as_u64()),
        (Some("m1"), Some(9))
    );

    let v = json(&bellmap(&["optimize", "--config", cfg, "--seed", "4"]));
    assert_eq!(v["seed"], 4);
    assert_eq!(v["restarts"], 2);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    let out = bellmap(&["optimize", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"));
}

/// Table of one deterministic local strategy: Alice answers `i`, Bob `k + 1`.
fn deterministic_table(m: usize, d: usize) -> String {
    let mut text = format!("m {m} d {d}\n");
    for i in 0..m {
        for k in 0..m {
            for a in 0..d {
                for b in 0..d {
                    let p = u8::from(a == i % d && b == (k + 1) % d);
                    text.push_str(&format!("{i} {k} {a} {b} {p}\n"));
                }
            }
        }
    }
    text
}

#[test]
fn check_data_accepts_a_deterministic_strategy_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    let witness = dir.path().join("w.txt");
    std::fs::write(&table, deterministic_table(2, 3)).unwrap();
    let out = bellmap(&[
        "check-data",
        table.to_str().unwrap(),
        "--witness",
        witness.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["verdict"], "feasible");
    assert_eq!((v["m"].as_u64(), v["d"].as_u64()), (Some(2), Some(3)));
    // The only atom consistent with the table carries all the weight.
    let text = std::fs::read_to_string(&witness).unwrap();
    let atoms: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(atoms.len(), 1, "{text}");
    let fields: Vec<&str> = atoms[0].split_whitespace().collect();
    assert_eq!(&fields[..4], ["0", "1", "1", "2"]);
    assert!((fields[4].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn optimized_table_is_rejected_and_its_visibility_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("sig.txt");
    let out = optimize(&[
        "--alpha",
        "60",
        "--kind",
        "m1",
        "--table-out",
        table.to_str().unwrap(),
    ]);
    let exact = json(&out)["v_crit_exact"].as_f64().unwrap();
    let out = bellmap(&["check-data", table.to_str().unwrap(), "--noise", "white"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["verdict"], "infeasible");
    assert_eq!(v["status"], "violation");
    assert!((v["v_crit"].as_f64().unwrap() - exact).abs() < 1e-6);
}

#[test]
fn check_data_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    std::fs::write(&table, "m 1 d 2\n0 0 0 0 0.5\n0 0 0 x 0.5\n").unwrap();
    let out = bellmap(&["check-data", table.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

/// Maximally mixed two-qubit state.
fn mixed_qubits(dir: &Path) -> std::path::PathBuf {
    let rho = dir.join("rho.txt");
    let mut text = String::from("d 2\n");
    for r in 0..4 {
        let row: Vec<&str> = (0..4)
            .map(|c| if r == c { "0.25,0" } else { "0,0" })
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    std::fs::write(&rho, &text).unwrap();
    rho
}

fn settings_file(dir: &Path, angles: &str) -> std::path::PathBuf {
    let path = dir.join("settings.json");
    let spec = format!(r#"{{"kind": "M1", "dim": 2, "angles": {angles}}}"#);
    std::fs::write(
        &path,
        format!(r#"{{"alice": [{spec}, {spec}], "bob": [{spec}, {spec}]}}"#),
    )
    .unwrap();
    path
}

#[test]
fn check_data_evaluates_a_state_at_given_settings() {
    let dir = tempfile::tempdir().unwrap();
    let rho = mixed_qubits(dir.path());
    let settings = settings_file(dir.path(), "[0.3]");
    let out = bellmap(&[
        "check-data",
        rho.to_str().unwrap(),
        "--settings",
        settings.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(
        (v["format"].as_str(), v["verdict"].as_str()),
        (Some("density"), Some("feasible"))
    );
}

#[test]
fn settings_with_the_wrong_angle_count_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rho = mixed_qubits(dir.path());
    let settings = settings_file(dir.path(), "[0.3, 0.1]");
    let out = bellmap(&[
        "check-data",
        rho.to_str().unwrap(),
        "--settings",
        settings.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("angles"), "{}", stderr(&out));
}

#[test]
fn check_data_density_matrix_needs_settings() {
    let dir = tempfile::tempdir().unwrap();
    let rho = mixed_qubits(dir.path());
    let out = bellmap(&["check-data", rho.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--settings"), "{}", stderr(&out));
}

#[test]
fn catalog_lists_named_states() {
    let out = bellmap(&["catalog", "--max-d", "3"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for line in text.lines() {
        let fields: Vec<&str> = line.splitn(4, ", ").collect();
        assert_eq!(fields.len(), 4, "{line}");
        assert!(
            fields[1].parse::<usize>().is_ok() && fields[2].parse::<usize>().is_ok(),
            "{line}"
        );
    }
    for name in [
        "sym, 3, 3",
        "asym, 3, 3",
        "rank2-sym, 3, 2",
        "bennett, 3, 4",
        "horodecki, 3, 7",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
    assert!(text
        .lines()
        .all(|l| l.split(", ").nth(1).is_some_and(|d| d != "4")));
}

#[test]
fn line_scan_reports_crossings() {
    let mut args = vec!["line", "--alphas", "50:60:5", "--kinds", "m1,cglmp"];
    args.extend_from_slice(&FAST);
    let out = bellmap(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().nth(1).unwrap().starts_with("m1,50,45,"));
    assert!(stderr(&out).contains("cglmp below m1"));
}

#[test]
fn diff_map_of_a_kind_with_itself_is_zero() {
    let args = [
        "diff-map",
        "--alphas",
        "55",
        "--betas",
        "45",
        "--kind",
        "u",
        "--reference",
        "u",
        "--restarts",
        "3",
        "--threads",
        "1",
    ];
    let out = bellmap(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("55,45,"), "{row}");
    assert!(row.contains(",0.0000,"), "{row}");
}
