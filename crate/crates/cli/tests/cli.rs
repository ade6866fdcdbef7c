//! End-to-end runs of the `stefan` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEAT: &str = "x_max = 2\nn_x = 16\nt_max = 0.1\nn_t = 20\nu0 = x-gauss\n";
const STEFAN: &str = "x_max = 10\nn_x = 40\nt_max = 0.2\nn_t = 400\nrho = -0.2\nlevel = 20\n";

fn stefan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stefan"))
        .current_dir(dir)
        .env_remove("STEFAN_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) {
    fs::write(dir.join("run.cfg"), text).unwrap();
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .filter(|(n, _)| n != "manifest.json")
        .collect();
    v.sort();
    v
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn heat_ensemble_is_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HEAT);
    for (out, jobs) in [("a", "1"), ("b", "3")] {
        let o = stefan(
            tmp.path(),
            &[
                "simulate-heat",
                "--config",
                "run.cfg",
                "--set",
                "paths=4",
                "--seed",
                "11",
                "--jobs",
                jobs,
                "--out",
                out,
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "field-11.csv",
            "field-12.csv",
            "field-13.csv",
            "field-14.csv",
            "summary.json"
        ]
    );
    let m = manifest(&tmp.path().join("b"));
    assert_eq!(m["jobs"], 3);
    assert_eq!(m["seeds"]["first"], 11);
    assert_eq!(m["subcommand"], "simulate-heat");
}

#[test]
fn manifest_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), STEFAN);
    let o = stefan(
        tmp.path(),
        &[
            "simulate-stefan",
            "--config",
            "run.cfg",
            "--seed",
            "5",
            "--out",
            "first",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&tmp.path().join("first"));
    fs::write(tmp.path().join("echo.cfg"), m["config"].as_str().unwrap()).unwrap();
    let o = stefan(
        tmp.path(),
        &["simulate-stefan", "--config", "echo.cfg", "--out", "second"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&tmp.path().join("first")), files(&tmp.path().join("second")));
    for out in m["outputs"].as_array().unwrap() {
        let name = out["name"].as_str().unwrap();
        let bytes = fs::read(tmp.path().join("first").join(name)).unwrap();
        assert_eq!(out["bytes"], bytes.len());
    }
}

#[test]
fn stefan_run_writes_plot_ready_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), STEFAN);
    let o = stefan(tmp.path(), &["simulate-stefan", "--config", "run.cfg", "--out", "r"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("r");
    let boundary = fs::read_to_string(dir.join("boundary.csv")).unwrap();
    let mut lines = boundary.lines();
    assert_eq!(lines.next(), Some("t,beta,beta_dot,psi,stopped"));
    assert_eq!(lines.count(), 401);
    let surface = fs::read_to_string(dir.join("surface.csv")).unwrap();
    assert!(surface.starts_with("t,x,u\n"));
    // every float cell carries 17 significant digits
    let row = surface.lines().nth(2).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{cell}");
    }
    assert!(dir.join("residual.csv").exists() && dir.join("field.csv").exists());
}

#[test]
fn colored_run_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "x_max = 4\nn_x = 64\nt_max = 0.1\nn_t = 500\nrho = -0.2\neta = 0.25\n",
    );
    let o = stefan(
        tmp.path(),
        &["simulate-stefan-colored", "--config", "run.cfg", "--out", "c"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("c/summary.json")).unwrap()).unwrap();
    assert_eq!(s["model"], "stefan_colored");
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "");
    let o = stefan(tmp.path(), &["simulate-heat", "--config", "run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("x_max") && err.contains("n_t"), "{err}");

    write_config(tmp.path(), "x_max = 4\nn_x = 64\nt_max = 1\nn_t = 100\n");
    let o = stefan(tmp.path(), &["simulate-heat", "--config", "run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dx^2/2"));

    let o = stefan(tmp.path(), &["simulate-heat", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn environment_overrides_sit_between_file_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HEAT);
    let o = Command::new(env!("CARGO_BIN_EXE_stefan"))
        .current_dir(tmp.path())
        .env("STEFAN_SEED", "42")
        .env("STEFAN_RECORD_EVERY", "5")
        .args(["simulate-heat", "--config", "run.cfg", "--set", "record_every=10"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&tmp.path().join("out"));
    let cfg = m["config"].as_str().unwrap();
    assert!(
        cfg.contains("seed = 42\n") && cfg.contains("record_every = 10\n"),
        "{cfg}"
    );
}

#[test]
fn numerical_failure_exits_with_three_and_leaves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    // the boundary runs past x = 2 well before t = 1
    write_config(
        tmp.path(),
        "x_max = 2\nn_x = 40\nt_max = 1\nn_t = 4000\nrho = -0.2\nlevel = 20\n",
    );
    let o = stefan(tmp.path(), &["simulate-stefan", "--config", "run.cfg", "--out", "gone"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain exhausted"));
    assert_eq!(
        fs::read_dir(tmp.path()).unwrap().count(),
        1,
        "only the config file remains"
    );
}

#[test]
fn mean_check_passes_on_a_small_grid() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HEAT);
    let o = stefan(
        tmp.path(),
        &[
            "mean-check",
            "--config",
            "run.cfg",
            "--set",
            "paths=1000",
            "--jobs",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(s["passed"], true);
    assert_eq!(s["paths"], 1000);
    let z = fs::read_to_string(tmp.path().join("out/z.csv")).unwrap();
    assert_eq!(z.lines().count(), 1 + 21 * 17);
}

#[test]
fn mean_check_rejects_small_ensembles() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HEAT);
    let o = stefan(tmp.path(), &["mean-check", "--config", "run.cfg", "--set", "paths=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 1000"));
}

#[test]
fn boundary_speed_estimate_writes_a_curve() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), &format!("{STEFAN}source = beta_dot\npaths = 30\n"));
    let o = stefan(tmp.path(), &["estimate-holder", "--config", "run.cfg"]);
    let code = o.status.code();
    assert!(
        code == Some(0) || code == Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(s["estimates"][0]["mode"], "time");
    assert_eq!(s["passed"] == true, code == Some(0));
    let curve = fs::read_to_string(tmp.path().join("out/structure-time.csv")).unwrap();
    assert!(curve.starts_with("lag,value,fit_line\n"));
}

#[test]
fn help_documents_keys_and_environment() {
    let o = stefan(Path::new("."), &["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for key in stefan_core::config::KEYS {
        assert!(text.contains(key), "help misses {key}");
    }
    assert!(text.contains("STEFAN_<KEY>"));
}
