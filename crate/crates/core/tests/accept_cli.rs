//! End-to-end checks of the `teachctl` binary: outputs and exit codes.

use std::process::Command;

fn teachctl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_teachctl"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn straight_run_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (out, rep) = (dir.path().join("t.csv"), dir.path().join("r.json"));
    let res = teachctl(&[
        "teach",
        "--method",
        "straight",
        "--w0",
        "0,1",
        "--wstar",
        "1,0",
        "--eta",
        "0.01",
        "--rx",
        "1",
        "--ry",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    let t = report["T"].as_u64().unwrap() as usize;
    assert_eq!(report["converged"], true);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,t,w1,w2,x1,x2,y"));
    assert_eq!(lines.count(), t + 1);
}

#[test]
fn report_goes_to_stdout_without_path() {
    let res = teachctl(&[
        "teach", "--method", "cnlp", "--w0", "0,1", "--wstar", "1,0", "--mesh", "40",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["method"], "cnlp");
    assert!(report["T"].is_null());
    assert!((report["t_f"].as_f64().unwrap() - 1.52).abs() < 0.05);
}

#[test]
fn exit_codes() {
    let base = ["teach", "--method", "straight", "--w0", "0,1", "--wstar", "1,0"];
    let with = |extra: &[&str]| teachctl(&[&base[..], extra].concat()).status.code();
    assert_eq!(with(&["--eta", "-1"]), Some(1));
    assert_eq!(with(&["--max-steps", "2"]), Some(2));
    assert_eq!(teachctl(&["--help"]).status.code(), Some(0));
    assert_eq!(teachctl(&["teach"]).status.code(), Some(1));
}
