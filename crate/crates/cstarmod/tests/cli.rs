//! Black-box checks of the command line: exit codes, the machine report
//! schema, scenario files on disk, and the seeded fuzz contract.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cstarmod"));
    c.env_remove("CSTARMOD_TOLERANCE");
    c
}

fn write_scenario(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("cstarmod-cli-{name}.scenario"));
    fs::write(&path, text).expect("temp scenario writes");
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("reports are utf-8")
}

const PASSING: &str = "\
scenario cli-pass
backend finite
algebra 2
module E rank 2
operator a from E to E
  row 1 0 0 1 ; 0 0 0 0
  row 0 0 0 0 ; 2 0 0 2
end
check modularity a
  expect modular is true
  expect residual below 1e-9
end
check polar a
  expect verdict is decomposed
  expect partial.isometry is true
  expect factor.norm near 1
end
";

#[test]
fn passing_scenario_exits_zero_with_machine_schema() {
    let path = write_scenario("pass", PASSING);
    let out = bin().args(["--format", "machine", "check"]).arg(&path).output().expect("runs");
    let text = stdout_of(&out);
    assert!(out.status.success(), "exit {:?}:\n{text}", out.status.code());
    assert!(text.starts_with("report-format 1\n"), "schema header missing:\n{text}");
    assert!(text.contains("summary checks"), "summary line missing:\n{text}");
    assert!(!text.contains(" FAIL"), "unexpected failing check:\n{text}");
    fs::remove_file(path).ok();
}

#[test]
fn check_runs_are_byte_identical() {
    let path = write_scenario("stable", PASSING);
    let run = || {
        let out = bin().args(["--format", "machine", "check"]).arg(&path).output().expect("runs");
        out.stdout
    };
    assert_eq!(run(), run(), "same file, same bytes");
    fs::remove_file(path).ok();
}

#[test]
fn polar_and_invariants_commands_cover_declared_operators() {
    let path = write_scenario("forced", PASSING);
    for sub in ["polar", "invariants"] {
        let out = bin().args(["--format", "machine", sub]).arg(&path).output().expect("runs");
        let text = stdout_of(&out);
        assert!(out.status.success(), "{sub} exit {:?}:\n{text}", out.status.code());
        assert!(
            text.contains(&format!("section {sub}.a")),
            "{sub} skipped the operator:\n{text}"
        );
    }
    fs::remove_file(path).ok();
}

#[test]
fn failed_expectation_exits_one() {
    let failing = PASSING.replace("expect modular is true", "expect modular is false");
    let path = write_scenario("fail", &failing);
    let out = bin().args(["--format", "machine", "check"]).arg(&path).output().expect("runs");
    let text = stdout_of(&out);
    assert_eq!(out.status.code(), Some(1), "expected failure exit:\n{text}");
    assert!(text.contains(" FAIL"), "failing check missing from report:\n{text}");
    fs::remove_file(path).ok();
}

#[test]
fn malformed_scenario_exits_two() {
    let path = write_scenario("broken", "scenario broken\nbackend finite\nnonsense here\n");
    let out = bin().args(["check"]).arg(&path).output().expect("runs");
    assert_eq!(out.status.code(), Some(2), "parse errors are usage errors");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "stderr should explain: {err}");
    fs::remove_file(path).ok();
}

#[test]
fn missing_file_exits_two() {
    let out = bin().args(["check", "/nonexistent/cstarmod-no-such-file"]).output().expect("runs");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_operator_reports_zero_factor() {
    let zero = "\
scenario cli-zero
backend finite
algebra 2
module E rank 1
operator nought from E to E
  row 0 0 0 0
end
check polar nought
  expect verdict is decomposed
  expect partial.isometry is true
  expect factor.norm below 1e-12
end
";
    let path = write_scenario("zero", zero);
    let out = bin().args(["--format", "machine", "check"]).arg(&path).output().expect("runs");
    let text = stdout_of(&out);
    assert!(out.status.success(), "exit {:?}:\n{text}", out.status.code());
    assert!(
        text.contains("fact factor.norm = 0.000000000000e0"),
        "zero factor norm missing:\n{text}"
    );
    fs::remove_file(path).ok();
}

#[test]
fn seeded_fuzz_contract_holds() {
    let out = bin()
        .args(["--format", "machine", "fuzz", "--seed", "1", "--count", "100"])
        .output()
        .expect("runs");
    let text = stdout_of(&out);
    assert!(out.status.success(), "exit {:?}:\n{text}", out.status.code());
    assert!(
        text.contains("summary checks 400 failures 0"),
        "fuzz summary drifted:\n{text}"
    );
}

#[test]
fn gallery_covers_every_builtin_scenario() {
    let out = bin().args(["--format", "machine", "gallery"]).output().expect("runs");
    let text = stdout_of(&out);
    assert!(out.status.success(), "exit {:?}:\n{text}", out.status.code());
    assert_eq!(text.matches("title ").count(), 7, "gallery size drifted:\n{text}");
    assert!(!text.contains(" FAIL"), "gallery must pass clean:\n{text}");
}

#[test]
fn explicit_tolerance_flag_is_accepted() {
    let path = write_scenario("tolflag", PASSING);
    let out = bin()
        .args(["--tolerance", "1e-7", "--format", "machine", "check"])
        .arg(&path)
        .output()
        .expect("runs");
    assert!(out.status.success(), "exit {:?}", out.status.code());
    fs::remove_file(path).ok();
}
