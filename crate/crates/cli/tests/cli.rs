use std::path::Path;
use std::process::{Command, Output};

fn evavos(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evavos")).args(args).env("EVAVOS_OUT", out).output().unwrap()
}

const SMALL: &str = "[world]\nvideos = 2\nn_frames = 16\n\n[experiment]\nmethods = random+mask_only, oracle+clicks_only, oracle+mask_only\nbudget = 300\nseeds = 0, 1\n";

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = evavos(&["run", "--config", "missing.ini"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ini"));
}

#[test]
fn unknown_flags_and_commands_print_usage() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["run", "--colour"][..], &["frobnicate"][..], &[][..]] {
        let out = evavos(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    }
    assert_eq!(evavos(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn bad_config_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[experiment]\nbudget = -1\n").unwrap();
    let out = evavos(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_is_reproducible_and_report_counts_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.ini");
    std::fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = cfg.to_str().unwrap();
    assert!(evavos(&["run", "--config", cfg, "--seed", "3", "--out", a.to_str().unwrap(), "--jobs", "1"], dir.path()).status.success());
    assert!(evavos(&["run", "--config", cfg, "--seed", "3", "--jobs", "2"], &b).status.success());
    let ca = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ca, std::fs::read(b.join("results.csv")).unwrap());
    assert!(ca.starts_with(b"method,frame_selector,type_selector,seed,elapsed_seconds,mean_jf\n"));

    let out = evavos(&["report", "--config", cfg, "--out", a.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 1 + 3, "{table}");
    assert!(table.lines().next().unwrap().contains("s@0.75"));
}

#[test]
fn gen_writes_mask_tracks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.ini");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = evavos(&["gen", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("world/video001_obj0.txt")).unwrap();
    assert!(text.starts_with("EVAVOS-MASK v1 64 64 16\n"));
    assert_eq!(evavos::harness::parse_mask_track(&text).unwrap().len(), 16);
}

#[test]
fn report_on_missing_csv_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = evavos(&["report"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
