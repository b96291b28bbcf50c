use std::path::Path;
use std::process::{Command, Output};

use bosonlight::bounds::{compute_constants, ConstantsInputs};

const CONSTANTS: &str = r#"
experiment = "constants"

[constants]
gamma = 3.0
jbar = 1.0
tau = 0.08333333333333333
dimension = 1
ell = 4.0
t = 1.0
r = 8.0
"#;

const TRANSPORT: &str = r#"
experiment = "transport"
seed = 3

[lattice]
dims = [8]

[hamiltonian]
j = 1.0
u = 2.0

[basis]
caps = 8
sector = 8

[state]
kind = "mott"
filling = 1

[transport]
region = [0, 1, 2, 3]
tau_multiples = [1.0, 2.0]
radii = [0, 2, 7]
moments = [1, 2]
schuch_moments = [1]
random_instances = 2
"#;

const PROTOCOL_RESONANT: &str = r#"
[protocol]
j = 1.0
u = 1000.0
nbar = [1]
"#;

fn bosonlight(args: &[&str], dir: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bosonlight"));
    cmd.args(args)
        .current_dir(dir)
        .env_remove("BOSONLIGHT_DIM_LIMIT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn constants_table_matches_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANTS);
    let out = bosonlight(
        &["constants", "--config", &cfg, "--out-dir", "out"],
        dir.path(),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("c_tau_1"));

    let table = compute_constants(ConstantsInputs {
        gamma: 3.0,
        jbar: 1.0,
        tau: 1.0 / 12.0,
        dimension: 1,
        ell: 4.0,
        t: 1.0,
        r: 8.0,
        boundary_size: 0,
        ell_t_coefficient: 1.0,
    })
    .unwrap();
    let csv = std::fs::read_to_string(dir.path().join("out/constants.csv")).unwrap();
    assert!(csv.starts_with("# bosonlight-results/1 experiment=constants\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), table.named_values().len());
    for (row, (name, value)) in rows.iter().zip(table.named_values()) {
        assert_eq!(row[1], name);
        let lhs: f64 = row[3].parse().unwrap();
        assert!(
            (lhs - value).abs() <= 1e-11 * value.abs().max(1.0),
            "{name}"
        );
    }
}

#[test]
fn missing_lattice_exits_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[hamiltonian]\nj = 1.0\n");
    let out = bosonlight(&["transport", "--config", &cfg], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lattice"));
}

#[test]
fn mismatched_experiment_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANTS);
    let out = bosonlight(&["lr", "--config", &cfg], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transport_sweep_is_deterministic_and_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", TRANSPORT);
    let a = bosonlight(
        &[
            "transport",
            "--config",
            &cfg,
            "--out-dir",
            "a",
            "--workers",
            "1",
        ],
        dir.path(),
        &[],
    );
    let b = bosonlight(
        &[
            "transport",
            "--config",
            &cfg,
            "--out-dir",
            "b",
            "--workers",
            "3",
        ],
        dir.path(),
        &[],
    );
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(b.status.code(), Some(0));
    let csv_a = std::fs::read(dir.path().join("a/transport.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("b/transport.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    let text = String::from_utf8(csv_a).unwrap();
    let rows = data_rows(&text);
    let sweep: Vec<_> = rows.iter().filter(|r| r[0] == "transport").collect();
    assert_eq!(sweep.len(), 2 * 2 * 3);
    assert!(rows.iter().all(|r| r[5] == "true"));
    assert_eq!(rows.iter().filter(|r| r[0] == "schuch").count(), 3);

    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a/transport.json")).unwrap(),
    )
    .unwrap();
    let hash = sidecar["config_hash"].as_str().unwrap();
    assert!(rows.iter().all(|r| r[6] == hash));
    assert_eq!(sidecar["seed"], 3);
    assert!(sidecar["timings"]["total_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(sidecar["config"]["lattice"]["dims"][0], 8);

    let reseeded = bosonlight(
        &[
            "transport",
            "--config",
            &cfg,
            "--out-dir",
            "c",
            "--seed",
            "4",
        ],
        dir.path(),
        &[],
    );
    assert_eq!(reseeded.status.code(), Some(0));
    let other = std::fs::read_to_string(dir.path().join("c/transport.csv")).unwrap();
    assert_ne!(data_rows(&other)[0][6], hash);
}

#[test]
fn dimension_limit_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", TRANSPORT);
    let out = bosonlight(
        &["transport", "--config", &cfg],
        dir.path(),
        &[("BOSONLIGHT_DIM_LIMIT", "100")],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failed_bound_rows_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", PROTOCOL_RESONANT);
    let out = bosonlight(&["protocol", "--config", &cfg], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("results/protocol.csv")).unwrap();
    assert!(data_rows(&csv)
        .iter()
        .any(|r| r[0] == "cnot_frozen" && r[5] == "false"));
}

#[test]
fn validate_reports_findings_and_always_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(
        dir.path(),
        "t.toml",
        TRANSPORT
            .replace("radii = [0, 2, 7]", "radii = [7]")
            .as_str(),
    );
    let out = bosonlight(&["validate", "--config", &ok], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("basis dimension: 6435"));
    assert!(text.contains("ell condition"));

    let out = bosonlight(
        &["validate", "--config", &ok],
        dir.path(),
        &[("BOSONLIGHT_DIM_LIMIT", "10")],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("exceeds the limit 10"));

    let tau = write(
        dir.path(),
        "c.toml",
        &CONSTANTS.replace("0.08333333333333333", "0.1"),
    );
    let out = bosonlight(&["validate", "--config", &tau], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("exceeds 1/(4 gamma Jbar)"));

    let lr = write(
        dir.path(),
        "lr.toml",
        "[lattice]\ndims = [6]\n[hamiltonian]\nj = 1.0\n[basis]\ncaps = 2\nsector = 2\n[state]\nkind = \"mott\"\nfilling = 0\n[lr]\norigin = [0]\ntheta = 1.0\nradii = [1]\n",
    );
    let out = bosonlight(
        &["validate", "--config", &lr, "--experiment", "lr"],
        dir.path(),
        &[],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok (dimension 21)"));

    let missing = bosonlight(&["validate", "--config", "nope.toml"], dir.path(), &[]);
    assert_eq!(missing.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&missing.stdout).contains("finding"));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["constants", "lr", "hhkl", "protocol"] {
        let path = root.join(format!("{name}.toml"));
        let out = bosonlight(
            &["validate", "--config", path.to_str().unwrap()],
            &root,
            &[],
        );
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(
            text.lines().last().unwrap().starts_with("ok"),
            "{name}: {text}"
        );
    }
}
