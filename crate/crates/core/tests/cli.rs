use std::path::{Path, PathBuf};
use std::process::Command;

use nahmpole::io::report::Report;

fn workdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("nahmpole-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(sub: &str, config: &str, dir: &Path, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join(format!("{sub}.cfg"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(sub);
    let status = Command::new(env!("CARGO_BIN_EXE_nahmpole"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    (status.status.code().unwrap(), report)
}

fn value(report: &str, key: &str) -> f64 {
    let e = Report::parse_entries(report);
    e.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("{key} missing")).1.parse().unwrap()
}

#[test]
fn ode_rate_within_one_percent() {
    let d = workdir("ode");
    let (code, rep) = run("ode", "command = ode\ntol = 1e-10\n", &d, &[]);
    assert_eq!(code, 0);
    assert!(rep.ends_with("status=ok\n"));
    assert!(value(&rep, "ode.rate_relative_error") < 0.01);
    assert!(d.join("ode/ode.csv").exists());
}

#[test]
fn self_distance_vanishes() {
    let d = workdir("distance");
    let (code, _) = run(
        "solve-plane",
        "command = solve-plane\ntol = 1e-10\ndomain = plane-half-space\nextents = 2\ny_max = 2\nknot = 0,0,1\npoly = 0,1\n",
        &d,
        &["--resolution", "33,33"],
    );
    assert_eq!(code, 0);
    let u = d.join("solve-plane/u.ebf");
    let (code, rep) = run("distance", &format!("command = distance\ntol = 1e-10\ninput = {0}\ninput2 = {0}\n", u.display()), &d, &[]);
    assert_eq!(code, 0);
    assert!(value(&rep, "distance.sigma_sup") <= 1e-12);
}

#[test]
fn model_study_is_second_order() {
    let d = workdir("study");
    let (code, rep) = run("study", "command = study\ntol = 1e-10\nstudy = model\norder = 1\nresolutions = 64,128,256\n", &d, &[]);
    assert_eq!(code, 0);
    assert!((value(&rep, "study.order") - 2.0).abs() < 0.1, "{rep}");
    assert!(rep.contains("```table study"));
}

#[test]
fn exit_codes_follow_error_class() {
    let d = workdir("codes");
    let (code, rep) = run("ode", "command = ode\ntol = 1\n", &d, &[]);
    assert_eq!(code, 1);
    assert!(rep.contains("tolerance out of range") && rep.ends_with("status=fail\n"));
    let (code, _) = run("verify", "command = verify\ntol = 1e-10\n", &d, &[]);
    assert_eq!(code, 1);
    let (code, rep) = run(
        "model",
        "command = model\ntol = 1e-10\norder = 1\n",
        &d,
        &["--resolution", "17,16", "--tol", "1e-9"],
    );
    assert_eq!(code, 0);
    assert!(rep.contains("config.tol=1e-9") && rep.contains("config.resolution=17,16"));
}

#[test]
fn runs_are_deterministic() {
    let strip = |r: &str| r.lines().filter(|l| !l.starts_with("file.") && !l.starts_with("config.out")).collect::<Vec<_>>().join("\n");
    let (a, b) = (workdir("det-a"), workdir("det-b"));
    let cfg = "command = model\ntol = 1e-10\norder = 2\nresolution = 33,32\n";
    let (_, ra) = run("model", cfg, &a, &[]);
    let (_, rb) = run("model", cfg, &b, &[]);
    assert_eq!(strip(&ra), strip(&rb));
    assert_eq!(std::fs::read(a.join("model/u_model.ebf")).unwrap(), std::fs::read(b.join("model/u_model.ebf")).unwrap());
}
