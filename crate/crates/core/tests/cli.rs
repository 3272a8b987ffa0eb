use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bessel-harmonic")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("bessel-harmonic-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn kernel_csv() {
    let o = bin(&["--lambda", "0.5", "kernel", "--kind", "heat", "--t", "1", "--x", "1,2", "--y", "1.5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,value,error");
    assert_eq!(lines.len(), 3);
    let v: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!(v > 0.0);
}

#[test]
fn apply_and_norm_read_csv() {
    let d = scratch("apply");
    let f = d.join("f.csv");
    std::fs::write(&f, "x,value\n1.0,0.0\n1.5,1.0\n2.5,0.0\n").unwrap();
    let f = f.to_str().unwrap();
    let o = bin(&["apply", "--op", "heat", "--t", "0.5", "--input", f, "--x", "1.5,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);

    let o = bin(&["norm", "--kind", "lipschitz", "--beta", "0.5", "--input", f]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // attained by the pair (1, 1.5)
    assert!((v["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-9, "{v}");

    // a three-node input still gets an evaluation grid fine enough for k = 6
    let o = bin(&["norm", "--kind", "besov", "--beta", "0.5", "--k-min", "-2", "--k-max", "6", "--input", f]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn ati_mass_is_one() {
    let o = bin(&["--lambda", "1", "ati", "--k", "0", "--x", "3", "--y", "2.5,3,3.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    for line in text.lines().skip(1) {
        let mass: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
        assert!((mass - 1.0).abs() < 1e-6);
    }
}

#[test]
fn verify_writes_reports_and_report_reemits() {
    let d = scratch("verify");
    let out = d.to_str().unwrap();
    let o = bin(&["--lambda", "1", "--out", out, "verify", "--suite", "endpoint", "--filter", "log_oscillation_constant"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["reports.json", "reports.csv", "reports.md"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let json = d.join("reports.json");
    let o = bin(&["report", "--input", json.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("id,fitted_constant,stability,verdict"));
    assert!(text.contains("endpoint.log_oscillation_constant/lambda=1,"));
}

#[test]
fn exit_codes() {
    let o = bin(&["verify", "--suite", "endpoint", "--filter", "no-such-case"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no cases"));
    let o = bin(&["verify", "--suite", "bogus", "--list"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["--lambda", "-1", "kernel", "--kind", "riesz", "--x", "1", "--y", "2"]);
    assert_eq!(o.status.code(), Some(2));

    let d = scratch("fail");
    let bad = d.join("bad.json");
    std::fs::write(
        &bad,
        r#"[{"id":"x","suite":"endpoint","fitted_constant":"inf","witness":[],"witness_group":"",
            "stability":"nan","verdict":"fail","criterion":{"kind":"below","tol":1.0},"samples":1,"params":{}}]"#,
    )
    .unwrap();
    let o = bin(&["report", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn list_names_every_suite() {
    let o = bin(&["verify", "--list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for s in ["kernels.", "spaces.", "commutators.", "endpoint.", "fractional."] {
        assert!(text.lines().any(|l| l.starts_with(s)), "{s}");
    }
}
