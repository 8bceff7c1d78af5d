//! End-to-end behaviour of the `emconv` binary: exit codes, file formats, reruns.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn emconv(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emconv"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("EMCONV_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn error_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn show_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = emconv(dir.path(), &["show-config"]);
    assert!(o.status.success());
    let cfg = dir.path().join("device.toml");
    std::fs::write(&cfg, &o.stdout).unwrap();
    let again = emconv(dir.path(), &["--config", cfg.to_str().unwrap(), "show-config"]);
    assert!(again.status.success());
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let missing = d.join("nope.toml");
    let o = emconv(d, &["--config", missing.to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(13));
    let e = error_json(&o);
    assert_eq!(e["error"], "io");
    assert!(e["message"].as_str().unwrap().contains("nope.toml"));

    let bad = d.join("bad.toml");
    std::fs::write(&bad, "this is = = not toml").unwrap();
    let o = emconv(d, &["--config", bad.to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(error_json(&o)["error"], "config");

    let o = emconv(d, &["--preset", "unknown", "show-config"]);
    assert_eq!(o.status.code(), Some(10));

    let o = emconv(d, &["cool", "--resonator", "3"]);
    assert_eq!(o.status.code(), Some(11));
    assert_eq!(error_json(&o)["error"], "invalid-input");

    let junk = d.join("junk.csv");
    std::fs::write(&junk, "a,b\n1,2\n").unwrap();
    let o = emconv(d, &["fit", "single-reflection", "--input", junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(12));
    assert_eq!(error_json(&o)["error"], "format");

    let o = emconv(d, &["fit", "no-such-model", "--input", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flat_trace_is_an_initialization_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let path = d.join("flat.csv");
    let mut text = String::from("freq_hz,re,im\n");
    for k in 0..401 {
        text.push_str(&format!("{:.16e},1,0\n", 7.0e9 + 1.0e3 * k as f64));
    }
    std::fs::write(&path, text).unwrap();
    let o = emconv(d, &["fit", "single-reflection", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(15), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_json(&o)["error"], "fit-initialization");
}

#[test]
fn outputs_have_fixed_headers_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(emconv(d, &["simulate", "--points", "51"]).status.success());
    for p in ["s11", "s22", "s21", "s12"] {
        let f = d.join(format!("simulate_{p}.csv"));
        assert_eq!(first_line(&f), "freq_hz,re,im");
        assert_eq!(std::fs::read_to_string(&f).unwrap().lines().count(), 52);
        let meta: Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(format!("simulate_{p}.meta.json"))).unwrap())
                .unwrap();
        assert_eq!(meta["command"], "simulate");
    }

    assert!(emconv(d, &["sweep", "grid"]).status.success());
    let grid = std::fs::read_to_string(d.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 56);
    assert!(!grid.contains('\r'));

    assert!(emconv(d, &["noise", "--powers", "-5,-5", "--powers", "-14,-10"]).status.success());
    let noise = std::fs::read_to_string(d.join("noise.csv")).unwrap();
    assert_eq!(noise.lines().count(), 3);

    let o = emconv(d, &["noise", "--powers", "-5,-5,-3"]);
    assert_eq!(o.status.code(), Some(11));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_emconv"))
        .args(["cool", "--powers", "-20,-10"])
        .env("EMCONV_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("cooling_1.csv").exists());
}

#[test]
fn synthesized_data_fits_back_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = emconv(d, &["--seed", "4", "synth", "--model", "single-reflection-2", "--snr-db", "40"]);
    assert!(o.status.success());
    let truth: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("synth_single_reflection_2.truth.json")).unwrap())
            .unwrap();
    let data = d.join("synth_single_reflection_2.csv");
    let o = emconv(
        d,
        &["fit", "single-reflection", "--resonator", "2", "--input", data.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let table = std::fs::read_to_string(d.join("fit_single_reflection.csv")).unwrap();
    let value = |name: &str| -> f64 {
        table
            .lines()
            .find(|l| l.starts_with(&format!("{name},")))
            .and_then(|l| l.split(',').nth(1))
            .unwrap()
            .parse()
            .unwrap()
    };
    let p = &truth["parameters"];
    for name in ["kappa", "kappa_ex"] {
        let t = p[name].as_f64().unwrap();
        assert!((value(name) / t - 1.0).abs() < 0.02, "{name}: {} vs {t}", value(name));
    }
    let w = p["omega_0"].as_f64().unwrap();
    assert!((value("omega_0") - w).abs() < 0.01 * p["kappa"].as_f64().unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args: &[&[&str]] = &[
        &["--seed", "9", "synth", "--model", "eit-1", "--snr-db", "25"],
        &["sweep", "bandwidth", "--coop", "2,20"],
        &["cool", "--resonator", "2"],
    ];
    for dir in [a.path(), b.path()] {
        for cmd in args {
            assert!(emconv(dir, cmd).status.success());
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}
