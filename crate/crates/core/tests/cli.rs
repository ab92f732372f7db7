use std::path::Path;
use std::process::{Command, Output};

use padiclf::exec::Mode;
use padiclf::lift::{Checkpoint, LiftOptions, Lifter};
use padiclf::manin::{cuspidal_eigensymbols, SymbolSpace};

fn padiclf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padiclf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key)).map(str::trim)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn space_reports() {
    let o = padiclf(&["space", "--level", "11"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(field(&s, "cosets"), Some("12"));
    assert_eq!(field(&s, "cuspidal dimension"), Some("2"));
    assert_eq!(field(&stdout(&padiclf(&["space", "--level", "1"])), "cuspidal dimension"), Some("0"));
    assert_eq!(field(&stdout(&padiclf(&["space", "--level", "33"])), "cosets"), Some("48"));
}

fn lift(dir: &Path, name: &str, level: &str, p: &str, depth: &str) -> (Output, std::path::PathBuf, serde_json::Value) {
    let cp = dir.join(format!("{name}.json"));
    let rep = dir.join(format!("{name}-report.json"));
    let o = padiclf(&[
        "lift", "--level", level, "--p", p, "--depth", depth, "--checkpoint", cp.to_str().unwrap(), "--out",
        rep.to_str().unwrap(),
    ]);
    let report = if rep.exists() { json(&rep) } else { serde_json::Value::Null };
    (o, cp, report)
}

#[test]
fn ordinary_lift_and_moments() {
    let dir = tempfile::tempdir().unwrap();
    let (o, cp, report) = lift(dir.path(), "ord", "11", "3", "8");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report["case"], "ordinary");
    assert!(report["verify"]["eigen_level"].as_i64().unwrap() >= 8);
    let cps = cp.to_str().unwrap();

    let m1 = padiclf(&["moments", "--checkpoint", cps, "--class-exponent", "1", "--jmax", "4"]);
    let m2 = padiclf(&["moments", "--checkpoint", cps, "--class-exponent", "2", "--jmax", "4"]);
    assert!(m1.status.success() && m2.status.success());
    let again = padiclf(&["moments", "--checkpoint", cps, "--class-exponent", "2", "--jmax", "4"]);
    assert_eq!(m2.stdout, again.stdout);
    let v: serde_json::Value = serde_json::from_slice(&m2.stdout).unwrap();
    assert_eq!(v["classes"].as_object().unwrap().len(), 6);

    let too_far = padiclf(&["moments", "--checkpoint", cps, "--jmax", "40"]);
    assert_eq!(too_far.status.code(), Some(3));

    let lv = padiclf(&["lvalue", "--checkpoint", cps, "--twist", "1", "--jmax", "2"]);
    assert!(lv.status.success());
    let v: serde_json::Value = serde_json::from_slice(&lv.stdout).unwrap();
    assert_eq!(v["euler"][0]["identity_holds"], true);
}

#[test]
fn supersingular_and_semistable_branches() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _, report) = lift(dir.path(), "ss", "32", "3", "6");
    assert!(o.status.success());
    assert_eq!(report["case"], "supersingular");
    assert_eq!(report["d"], 2);
    let (o, _, report) = lift(dir.path(), "st", "11", "11", "6");
    assert!(o.status.success());
    assert_eq!(report["case"], "semistable");
    assert!(["1", "-1"].contains(&report["a_p"].as_str().unwrap()));
}

#[test]
fn checkpoint_resume_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (o, fresh, _) = lift(dir.path(), "fresh", "11", "3", "5");
    assert!(o.status.success());

    let eig = cuspidal_eigensymbols(&SymbolSpace::for_level(11, 2), 13).unwrap().remove(0);
    let mut lifter = Lifter::for_prime(&eig.symbol, 3, None, 5, LiftOptions { noise: None, mode: Mode::Sequential }).unwrap();
    let mut state = lifter.initial_state();
    for _ in 0..3 {
        state = lifter.step(&state);
    }
    let partial = dir.path().join("resumed.json");
    let cp = Checkpoint::new(&lifter, &eig.symbol, &eig.scale, &state);
    std::fs::write(&partial, serde_json::to_string(&cp).unwrap()).unwrap();
    let (o, resumed, _) = lift(dir.path(), "resumed", "11", "3", "5");
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("resuming at round 3"));
    assert_eq!(std::fs::read(fresh).unwrap(), std::fs::read(resumed).unwrap());
}

#[test]
fn precondition_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _, _) = lift(dir.path(), "bad", "11", "4", "3");
    assert_eq!(o.status.code(), Some(3));
    let cp = dir.path().join("x.json");
    let o = padiclf(&["lift", "--level", "11", "--p", "3", "--depth", "3", "--case", "semistable", "--checkpoint", cp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = padiclf(&["moments", "--checkpoint", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = padiclf(&["eigen", "--level", "11", "--eigen-index", "5", "--out", cp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn selftest_detects_injected_fault() {
    assert!(padiclf(&["selftest"]).status.success());
    assert_eq!(padiclf(&["selftest", "--inject-fault", "binom-sign"]).status.code(), Some(2));
}
