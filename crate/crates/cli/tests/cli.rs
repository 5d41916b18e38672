use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn welfare(args: &[&str]) -> Output {
    welfare_with_threads(args, None)
}

fn welfare_with_threads(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_welfare"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn hotelling_sweep_writes_long_csv_and_crossings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let scn = scenario("hotelling.scn");
    let o = welfare(&["sweep", "--scenario", scn.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    stdout(&o);
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "subset_label,q,welfare,is_envelope");
    assert_eq!(lines.len(), 1 + 7 * 201);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",true")).count(), 201);
    assert!(lines[1].starts_with("{1},0,"));

    let crossings = std::fs::read_to_string(welfare_cli::summary_path(&out)).unwrap();
    assert!(crossings.starts_with("subset_a,subset_b,q_star\n"));
    assert!(crossings.lines().count() > 1);
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_threads() {
    let scn = scenario("hotelling.scn");
    let args = ["sweep", "--scenario", scn.to_str().unwrap()];
    let a = welfare_with_threads(&args, Some(1));
    let b = welfare_with_threads(&args, Some(4));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(a.stderr, b.stderr);
}

#[test]
fn monte_carlo_evaluation_honors_seed() {
    let scn = scenario("population.scn");
    let run = |seed: &str, threads| {
        stdout(&welfare_with_threads(
            &["evaluate", "--scenario", scn.to_str().unwrap(), "--model", "gumbel", "--seed", seed, "--format", "csv"],
            Some(threads),
        ))
    };
    assert_eq!(run("11", 1), run("11", 3));
    assert_ne!(run("11", 2), run("12", 2));
}

#[test]
fn hotelling_defaults_without_scenario() {
    let csv = stdout(&welfare(&["hotelling", "--q-max", "1", "--q-step", "0.5"]));
    assert_eq!(csv.lines().count(), 1 + 7 * 3);
}

#[test]
fn treatment_reference_recommends_decentralization() {
    let scn = scenario("treatment.scn");
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&welfare(&["treatment", "--scenario", scn.to_str().unwrap()]))).unwrap();
    let cell = &json["cells"][0];
    assert!((cell["value_of_information"]["voi"].as_f64().unwrap() - 0.10).abs() < 1e-15);
    assert_eq!(cell["recommendation"], "decentralize");
    assert_eq!(cell["mandate"]["treatment"], "A");

    let csv = stdout(&welfare(&["treatment", "--scenario", scn.to_str().unwrap(), "--format", "csv"]));
    assert_eq!(csv.lines().nth(1).unwrap(), "all,1,0.26,A,0.74,0.84,0.1,0.84,decentralize");
}

#[test]
fn rational_evaluation_has_zero_regret() {
    let scn = scenario("population.scn");
    let csv = stdout(&welfare(&[
        "evaluate", "--scenario", scn.to_str().unwrap(), "--model", "rational", "--format", "csv",
    ]));
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(
        reader.headers().unwrap(),
        vec!["model", "choice_set", "welfare", "regret", "idealized_optimum", "std_error"]
    );
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "rational");
    assert_eq!(&row[1], "{bus,car,bike}");
    assert_eq!(&row[3], "0");
}

#[test]
fn optimize_reports_best_subset() {
    let scn = scenario("population.scn");
    let json: serde_json::Value = serde_json::from_str(&stdout(&welfare(&[
        "optimize", "--scenario", scn.to_str().unwrap(), "--model", "rational",
    ])))
    .unwrap();
    assert_eq!(json["subset"], "{bus,car,bike}");
    assert_eq!(json["regret"].as_f64().unwrap(), 0.0);
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("s.scn");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn validation_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let short_weights = std::fs::read_to_string(scenario("population.scn"))
        .unwrap()
        .replace("\"weight\": 0.2", "\"weight\": 0.1");
    let path = write_scenario(dir.path(), &short_weights);
    let o = welfare(&["evaluate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("population.types") && err.contains("0.9"), "{err}");

    let future = std::fs::read_to_string(scenario("hotelling.scn"))
        .unwrap()
        .replace("\"schema_version\": 1", "\"schema_version\": 9");
    let path = write_scenario(dir.path(), &future);
    let o = welfare(&["sweep", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));

    let o = welfare(&["treatment", "--scenario", scenario("hotelling.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(welfare(&["sweep"]).status.code(), Some(1));
    assert_eq!(welfare(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(welfare(&["hotelling", "--q-step", "0"]).status.code(), Some(1));
}

#[test]
fn bundled_scenarios_round_trip() {
    for name in ["hotelling.scn", "treatment.scn", "population.scn"] {
        let doc = welfare_cli::parse_scenario(&scenario(name)).unwrap();
        assert_eq!(welfare_cli::parse_scenario_str(&doc.to_json()).unwrap(), doc, "{name}");
    }
}
