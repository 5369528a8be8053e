//! End-to-end tests of the `abae` binary: exit codes, report shape,
//! determinism, the external oracle protocol, and config handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use abae_core::{EstimatorKind, ExperimentPlan, ExperimentResult, RngSeed, SyntheticSpec};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_abae")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_cli_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should spawn")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal expected")
}

fn generate_dataset(dir: &Path, records: &str, seed: &str) -> PathBuf {
    let path = dir.join("d.csv");
    let out = run_cli(&[
        "generate",
        "--output",
        path.to_str().unwrap(),
        "--records",
        records,
        "--seed",
        seed,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    path
}

#[test]
fn pinned_run_invocation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_dataset(dir.path(), "1000", "5");
    let args = |seed: &'static str| {
        vec![
            "run", "--input", data.to_str().unwrap(),
            "--k", "5", "--n1", "100", "--n2", "2000", "--seed", seed,
        ]
    };
    let first = run_cli(&args("42"));
    let second = run_cli(&args("42"));
    let other = run_cli(&args("43"));
    assert_eq!(code(&first), 0, "{}", stderr_of(&first));
    assert_eq!(first.stdout, second.stdout);
    assert_ne!(first.stdout, other.stdout);

    let report: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert!(report["estimate"].is_number());
    assert!(report["ci"]["low"].as_f64().unwrap() <= report["ci"]["high"].as_f64().unwrap());
    assert_eq!(report["ci"]["alpha"], 0.05);
    assert_eq!(report["strata"].as_array().unwrap().len(), 5);
    for stratum in report["strata"].as_array().unwrap() {
        for key in ["p_hat", "mu_hat", "sigma_hat", "b1", "b2", "t_hat", "draws"] {
            assert!(stratum[key].is_number(), "stratum missing {key}");
        }
    }
    assert_eq!(report["budget"]["n1"], 100);
    assert_eq!(report["budget"]["n2"], 2000);
    assert_eq!(report["budget"]["k"], 5);
    let spent = report["budget"]["spent"].as_u64().unwrap();
    assert!(spent <= 5 * 100 + 2000 + 5);
    assert_eq!(report["seed"]["seed"], 42);
    assert!(report["warnings"].is_array());
}

#[test]
fn report_file_output_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_dataset(dir.path(), "200", "8");
    let out_path = dir.path().join("report.json");
    let to_stdout = run_cli(&[
        "run", "--input", data.to_str().unwrap(),
        "--k", "4", "--n1", "20", "--n2", "100", "--seed", "1",
    ]);
    let to_file = run_cli(&[
        "run", "--input", data.to_str().unwrap(),
        "--k", "4", "--n1", "20", "--n2", "100", "--seed", "1",
        "--output", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&to_stdout), 0);
    assert_eq!(code(&to_file), 0);
    assert!(to_file.stdout.is_empty());
    assert_eq!(fs::read(&out_path).unwrap(), to_stdout.stdout);
}

#[test]
fn oversized_k_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    fs::write(&path, "id,proxy,value,predicate\n0,0.1,2.0,1\n1,0.9,5.0,0\n").unwrap();
    let out = run_cli(&[
        "run", "--input", path.to_str().unwrap(),
        "--k", "5", "--n1", "1", "--n2", "1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("invalid stratum count 5 for dataset of 2 records"));
}

#[test]
fn bad_settings_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    fs::write(&path, "id,proxy,value,predicate\n0,0.1,2.0,1\n").unwrap();
    let base = ["run", "--input", path.to_str().unwrap(), "--k", "1", "--n1", "1", "--n2", "1"];

    let mut with_alpha = base.to_vec();
    with_alpha.extend(["--alpha", "1.5"]);
    let out = run_cli(&with_alpha);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("alpha"));

    let mut with_zero = base.to_vec();
    with_zero[8] = "0";
    let out = run_cli(&with_zero);
    assert_eq!(code(&out), 2);

    let out = run_cli(&["run", "--k", "1", "--n1", "1", "--n2", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("input"));
}

#[test]
fn data_problems_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("id,proxy,value,predicate\n0,0.1,2.0\n", ":2:"),
        ("id,proxy,value,predicate\n3,0.1,2.0,1\n3,0.2,1.0,0\n", "duplicate record id 3"),
        ("id,proxy,value\n0,0.1,2.0\n", "predicate column required"),
    ];
    for (i, (content, needle)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.csv"));
        fs::write(&path, content).unwrap();
        let out = run_cli(&[
            "run", "--input", path.to_str().unwrap(),
            "--k", "1", "--n1", "1", "--n2", "1",
        ]);
        assert_eq!(code(&out), 1, "case {i}");
        assert!(stderr_of(&out).contains(needle), "case {i}: {}", stderr_of(&out));
    }

    let out = run_cli(&[
        "run", "--input", dir.path().join("absent.csv").to_str().unwrap(),
        "--k", "1", "--n1", "1", "--n2", "1",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_document_supplies_settings_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_dataset(dir.path(), "200", "3");
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        format!(
            r#"{{"input": "{}", "k": 4, "n1": 20, "n2": 100, "seed": 7, "resamples": 200}}"#,
            data.display()
        ),
    )
    .unwrap();

    let from_file = run_cli(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0, "{}", stderr_of(&from_file));
    let report: serde_json::Value = serde_json::from_slice(&from_file.stdout).unwrap();
    assert_eq!(report["seed"]["seed"], 7);

    let overridden = run_cli(&["run", "--config", cfg_path.to_str().unwrap(), "--seed", "9"]);
    let report: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(report["seed"]["seed"], 9);

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"budget": 12}"#).unwrap();
    let out = run_cli(&["run", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

fn stub_command(mode_args: &str) -> String {
    format!("'{}' oracle-stub {mode_args}", bin())
}

#[test]
fn echo_oracle_labels_every_record_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unlabeled.csv");
    let mut content = String::from("id,proxy,value\n");
    for i in 0..40 {
        content.push_str(&format!("{i},{},0.0\n", i as f64 / 40.0));
    }
    fs::write(&path, content).unwrap();

    let out = run_cli(&[
        "run", "--input", path.to_str().unwrap(),
        "--k", "4", "--n1", "5", "--n2", "10", "--seed", "1",
        "--oracle", &stub_command("echo"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["estimate"], 1.0);
    assert_eq!(report["ci"]["low"], 1.0);
    assert_eq!(report["ci"]["high"], 1.0);
}

#[test]
fn subprocess_oracle_reproduces_the_inline_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_dataset(dir.path(), "200", "3");
    let base = [
        "run", "--input", data.to_str().unwrap(),
        "--k", "4", "--n1", "20", "--n2", "100", "--seed", "3",
    ];
    let inline = run_cli(&base);
    assert_eq!(code(&inline), 0, "{}", stderr_of(&inline));

    let file_stub = stub_command(&format!("file {}", data.display()));
    let mut via_oracle_args = base.to_vec();
    via_oracle_args.extend(["--oracle", &file_stub]);
    let via_oracle = run_cli(&via_oracle_args);
    assert_eq!(code(&via_oracle), 0, "{}", stderr_of(&via_oracle));
    assert_eq!(inline.stdout, via_oracle.stdout);
}

#[test]
fn oracle_protocol_violations_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_dataset(dir.path(), "200", "3");
    let cases = [
        ("partial 3", "exited before answering"),
        ("rogue", "never requested"),
        ("garbled", "predicate must be 0 or 1"),
    ];
    for (mode, needle) in cases {
        let command = stub_command(mode);
        let out = run_cli(&[
            "run", "--input", data.to_str().unwrap(),
            "--k", "4", "--n1", "20", "--n2", "100", "--seed", "3",
            "--oracle", &command,
        ]);
        assert_eq!(code(&out), 1, "mode {mode}");
        assert!(
            stderr_of(&out).contains(needle),
            "mode {mode}: {}",
            stderr_of(&out)
        );
    }
}

#[test]
fn validate_bounds_pinned_example_passes() {
    let out = run_cli(&["validate-bounds", "--lemma", "2", "--delta", "0.05", "--trials", "10000"]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["lemma"], 2);
    assert_eq!(reports[0]["trials"], 10000);
    assert_eq!(reports[0]["pass"], true);
    assert!(reports[0]["empirical"].as_f64().unwrap() <= reports[0]["nominal"].as_f64().unwrap());
}

#[test]
fn validate_bounds_covers_every_kind_by_name_or_id() {
    let out = run_cli(&["validate-bounds", "--lemma", "all", "--trials", "2000", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<u64> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["lemma"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, vec![1, 2, 4, 5, 8]);

    let by_name = run_cli(&["validate-bounds", "--lemma", "sigma-sq", "--trials", "1000"]);
    assert_eq!(code(&by_name), 0, "{}", stderr_of(&by_name));

    let unknown = run_cli(&["validate-bounds", "--lemma", "3", "--trials", "1000"]);
    assert_eq!(code(&unknown), 2);
    assert!(stderr_of(&unknown).contains("1, 2, 4, 5, 8"));

    let starved = run_cli(&["validate-bounds", "--lemma", "2", "--trials", "50"]);
    assert_eq!(code(&starved), 2, "too few trials is a config error");
}

#[test]
fn generated_files_round_trip_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate_dataset(dir.path(), "150", "11");
    let back = abae_cli::ingest(&path, abae_cli::OracleMode::Inline).unwrap();

    let mut spec = SyntheticSpec::default_suite();
    spec.records_per_stratum = 150;
    spec.seed = RngSeed::new(11);
    let (direct, _) = abae_core::generate(&spec).unwrap();
    assert_eq!(back.dataset.records(), direct.records());
    assert!(back.warnings.is_empty());
}

#[test]
fn simulate_emits_a_result_document_and_a_flat_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::default_suite();
    spec.records_per_stratum = 1500;
    let plan = ExperimentPlan {
        spec,
        budgets: vec![(20, 100), (20, 200)],
        trials: 50,
        estimators: vec![EstimatorKind::Abae, EstimatorKind::UniformAllocation],
        seed: RngSeed::new(6),
    };
    let plan_path = dir.path().join("plan.json");
    fs::write(&plan_path, serde_json::to_string(&plan).unwrap()).unwrap();
    let out_path = dir.path().join("result.json");
    let table_path = dir.path().join("cells.csv");

    let out = run_cli_env(
        &[
            "simulate",
            "--config", plan_path.to_str().unwrap(),
            "--output", out_path.to_str().unwrap(),
            "--table", table_path.to_str().unwrap(),
        ],
        &[("ABAE_THREADS", "1")],
    );
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));

    let result: ExperimentResult = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(result.cells.len(), 4);
    let table = fs::read_to_string(&table_path).unwrap();
    assert!(table.starts_with("estimator,n1,n2,n_total,trials,failed,mse,se,mean_spent,e_star"));
    assert_eq!(table.trim_end().lines().count(), 5);

    // worker count must not change the numbers
    let wide = run_cli_env(
        &["simulate", "--config", plan_path.to_str().unwrap()],
        &[("ABAE_THREADS", "3")],
    );
    let narrow = run_cli_env(
        &["simulate", "--config", plan_path.to_str().unwrap()],
        &[("ABAE_THREADS", "1")],
    );
    assert_eq!(code(&wide), 0);
    assert_eq!(wide.stdout, narrow.stdout);
    assert_eq!(
        fs::read_to_string(&out_path).unwrap().into_bytes(),
        narrow.stdout
    );

    let bad_threads = run_cli_env(
        &["simulate", "--config", plan_path.to_str().unwrap()],
        &[("ABAE_THREADS", "banana")],
    );
    assert_eq!(code(&bad_threads), 2);

    let bad_plan = dir.path().join("bad.json");
    fs::write(&bad_plan, r#"{"trials": 5}"#).unwrap();
    let out = run_cli(&["simulate", "--config", bad_plan.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
