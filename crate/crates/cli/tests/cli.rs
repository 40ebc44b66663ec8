use std::path::Path;
use std::process::Command;

fn vvlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vvlab"));
    c.env_remove("VVLAB_OUT");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const DIPOLE: &str = r#"
[experiment]
kind = "truncation-rates-2d"

[flow]
name = "smooth-dipole-I"

[grid]
theta = 1.0
r = [16, 32, 64, 128]
"#;

#[test]
fn listings_succeed() {
    let out = vvlab().arg("list-flows").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("patch-II") && text.contains("hill-III"));
    let out = vvlab().arg("list-experiments").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 8);
}

#[test]
fn invalid_theta_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &DIPOLE.replace("theta = 1.0", "theta = 1.5"),
    );
    let out = vvlab()
        .args(["run", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("grid.theta"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(
        vvlab().arg("frobnicate").output().unwrap().status.code(),
        Some(2)
    );
    assert_eq!(
        vvlab()
            .args(["run", "/nonexistent.toml"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn run_is_deterministic_and_plots_are_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dipole.toml", DIPOLE);
    let mut csvs = vec![];
    for (k, jobs) in ["1", "4"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = vvlab()
            .args(["run", cfg.to_str().unwrap(), "--jobs", jobs])
            .env("VVLAB_OUT", &out_dir)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push((
            std::fs::read(out_dir.join("rates.csv")).unwrap(),
            std::fs::read(out_dir.join("manifest.json")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
    let out = vvlab()
        .args(["emit-plots"])
        .arg(dir.path().join("run0").join("manifest.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("run0/plot/alpha.dat").exists());
}
