use std::path::{Path, PathBuf};
use std::process::Command;

use herdlab::scenario::{parse_scenario, parse_scenario_str, MANIFEST_FILE};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_herdlab");

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// A shipped scenario with its experiment section shrunk to test size.
fn small(name: &str, dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(scenarios().join(name)).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    let ex = v["experiment"].as_object_mut().unwrap();
    ex.insert("n_list".into(), serde_json::json!([16, 32]));
    ex.insert("n_ref".into(), 128.into());
    ex.insert("replicas".into(), 8.into());
    ex.insert("inner_replicas".into(), 2.into());
    ex.insert("budget".into(), 12.into());
    ex.insert("n_star".into(), 64.into());
    ex.insert("cost_replicas".into(), 2.into());
    ex.insert("grid_size".into(), 3.into());
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn run(cmd: &str, scenario: &Path, out: &Path, extra: &[&str]) -> (i32, Value) {
    let status = Command::new(BIN)
        .arg(cmd)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    let manifest = std::fs::read_to_string(out.join(MANIFEST_FILE))
        .map(|t| serde_json::from_str(&t).unwrap())
        .unwrap_or(Value::Null);
    (status.status.code().unwrap(), manifest)
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn validate_on_the_ou_scenario_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, m) = run("validate", &scenarios().join("ou.json"), tmp.path(), &[]);
    assert_eq!(code, 0, "{m}");
    assert_eq!(m["errors"].as_array().unwrap().len(), 0);
    assert_eq!(m["command"], "validate");
    assert_eq!(m["scenario_hash"].as_str().unwrap().len(), 64);
    assert_eq!(header(&tmp.path().join("validation.csv")), "check,estimate,bound,passed,samples");
}

#[test]
fn every_command_writes_its_documented_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let ou = small("ou.json", tmp.path());
    let steer = small("steering.json", tmp.path());
    let common = small("common_noise.json", tmp.path());
    let cases: [(&str, &Path, &[(&str, &str)]); 8] = [
        ("simulate", &ou, &[("trajectory.csv", "t,kind,index,coord,value")]),
        ("chaos-rates", &ou, &[("rates.csv", "N,replicas,q,coupled_err,coupled_se,wq_err,wq_se")]),
        (
            "chaos-rates",
            &common,
            &[
                ("rates.csv", "N,replicas,q,coupled_err,coupled_se,wq_err,wq_se"),
                ("covariance.csv", "N,unconditional,unconditional_se,conditional,conditional_se"),
            ],
        ),
        ("fp-check", &common, &[("residual.csv", "phi_id,t,residual")]),
        ("duality", &ou, &[("duality.csv", "phi_id,lhs,rhs,gap,se")]),
        ("optimize", &steer, &[("trace.csv", "eval_id,total,best_so_far")]),
        ("gamma", &steer, &[("gamma.csv", "N,minFN,se,gap_to_Fstar,cross_eval")]),
        ("validate", &steer, &[("validation.csv", "check,estimate,bound,passed,samples")]),
    ];
    for (i, (cmd, scenario, files)) in cases.iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let (code, m) = run(cmd, scenario, &out, &[]);
        assert_eq!(code, 0, "{cmd}: {m}");
        for (file, head) in *files {
            assert_eq!(header(&out.join(file)), *head, "{cmd}");
            assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == file));
        }
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let ou = small("ou.json", tmp.path());
    for cmd in ["chaos-rates", "simulate", "duality"] {
        let (a, b) = (tmp.path().join(format!("{cmd}-a")), tmp.path().join(format!("{cmd}-b")));
        assert_eq!(run(cmd, &ou, &a, &["--threads", "1"]).0, 0);
        assert_eq!(run(cmd, &ou, &b, &["--threads", "3", "--seed", "7"]).0, 0);
        let m: Value = serde_json::from_str(&std::fs::read_to_string(a.join(MANIFEST_FILE)).unwrap()).unwrap();
        for f in m["outputs"].as_array().unwrap() {
            let f = f.as_str().unwrap();
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{cmd}/{f}");
        }
    }
    let (c, d) = (tmp.path().join("c"), tmp.path().join("d"));
    run("simulate", &ou, &c, &["--seed", "1"]);
    run("simulate", &ou, &d, &["--seed", "2"]);
    assert_ne!(
        std::fs::read(c.join("trajectory.csv")).unwrap(),
        std::fs::read(d.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(scenarios().join("ou.json")).unwrap();
    let write = |name: &str, text: &str| {
        let p = tmp.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };

    let dt = write("dt.json", &base.replace("\"dt\": 0.01", "\"dt\": 2.0"));
    let (code, m) = run("simulate", &dt, &tmp.path().join("dt"), &[]);
    assert_eq!(code, 2);
    assert_eq!(m["errors"][0]["kind"], "validation");
    assert!(!tmp.path().join("dt/trajectory.csv").exists());

    let lip = write("lip.json", &base.replace("\"lipschitz\": 1.0", "\"lipschitz\": 0.25"));
    let (code, m) = run("validate", &lip, &tmp.path().join("lip"), &[]);
    assert_eq!(code, 2);
    assert!(m["errors"][0]["message"].as_str().unwrap().contains("Lipschitz"));

    let unknown = write("unknown.json", &base.replace("\"horizon\": 1.0", "\"horizon\": 1.0, \"horizn\": 2"));
    let (code, m) = run("validate", &unknown, &tmp.path().join("unknown"), &[]);
    assert_eq!(code, 2);
    assert_eq!(m["errors"][0]["kind"], "parse");
    assert!(m["errors"][0]["message"].as_str().unwrap().contains("horizn"));

    let blow = write(
        "blow.json",
        &base
            .replace("\"matrix\": [[-1.0]]", "\"matrix\": [[1000000.0]]")
            .replace("\"lipschitz\": 1.0", "\"lipschitz\": 1000000.0"),
    );
    let (code, m) = run("simulate", &blow, &tmp.path().join("blow"), &[]);
    assert_eq!(code, 3, "{m}");
    assert_eq!(m["errors"][0]["kind"], "blowup");

    let (code, m) = run("validate", &tmp.path().join("missing.json"), &tmp.path().join("missing"), &[]);
    assert_eq!(code, 4);
    assert_eq!(m["errors"][0]["kind"], "io");
}

#[test]
fn shipped_scenarios_round_trip() {
    for name in ["ou.json", "steering.json", "common_noise.json"] {
        let sc = parse_scenario(&scenarios().join(name)).unwrap();
        let again = parse_scenario_str(&sc.to_json()).unwrap();
        assert_eq!(sc, again, "{name}");
        assert_eq!(sc.hash(), again.hash());
    }
}

#[test]
fn manifest_echoes_the_filled_in_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, m) = run("validate", &scenarios().join("common_noise.json"), tmp.path(), &["--seed", "99"]);
    assert_eq!(code, 0);
    assert_eq!(m["seed"], 99);
    let echoed = serde_json::to_string(&m["scenario"]).unwrap();
    let sc = parse_scenario_str(&echoed).unwrap();
    assert_eq!(sc.experiment.seed, 99);
    assert_eq!(sc.control.pieces, 8);
    assert!(sc.system.bounds.is_some());
}
