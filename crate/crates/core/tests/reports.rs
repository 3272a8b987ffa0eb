use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use bessel_harmonic::verify::{
    catalog, emit_report, read_reports_json, run_case, run_suite, Criterion, EstimateCase, EstimateReport,
    ReportFormat, SampleGroup, Suite, Verdict, VerifyConfig,
};
use bessel_harmonic::{Error, Result};

fn report(id: &str, fitted: f64, stability: f64, verdict: Verdict) -> EstimateReport {
    EstimateReport {
        id: id.into(),
        suite: Suite::Endpoint,
        fitted_constant: fitted,
        witness: vec![1.0, 2.5],
        witness_group: "scale=1".into(),
        stability,
        verdict,
        criterion: Criterion::Bounded { band: 10.0, ceiling: Some(32.0) },
        samples: 4,
        params: BTreeMap::from([("lambda".to_string(), 1.0)]),
        note: String::new(),
    }
}

fn synthetic(criterion: Criterion, groups: &[&[f64]], f: fn(f64) -> Result<f64>) -> EstimateCase {
    EstimateCase {
        id: "synthetic".into(),
        suite: Suite::Kernels,
        criterion,
        groups: groups
            .iter()
            .enumerate()
            .map(|(i, g)| SampleGroup { name: format!("g{i}"), samples: g.iter().map(|&x| vec![x]).collect() })
            .collect(),
        dilation_pair: None,
        params: BTreeMap::new(),
        quantity: Arc::new(move |v| f(v[0])),
    }
}

#[test]
fn json_round_trip_keeps_non_finite_values() {
    let rs = vec![report("a/lambda=1", 3.5, 1.2, Verdict::Pass), report("b/lambda=1", f64::INFINITY, f64::NAN, Verdict::Fail)];
    let mut buf = Vec::new();
    emit_report(&rs, ReportFormat::Json, &mut buf).unwrap();
    let back = read_reports_json(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back[0], rs[0]);
    assert_eq!(back[1].fitted_constant, f64::INFINITY);
    assert!(back[1].stability.is_nan());
    assert_eq!(back[1].verdict, Verdict::Fail);
}

#[test]
fn empty_report_is_an_error() {
    for f in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::MarkdownTable] {
        assert_eq!(emit_report(&[], f, Vec::new()).unwrap_err(), Error::NoCases);
    }
}

#[test]
fn csv_and_markdown_headers() {
    let rs = vec![report("a/lambda=1", 3.5, 1.2, Verdict::Pass)];
    let mut buf = Vec::new();
    emit_report(&rs, ReportFormat::Csv, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("id,fitted_constant,stability,verdict"));
    assert_eq!(text.lines().nth(1), Some("a/lambda=1,3.5,1.2,pass"));

    let mut buf = Vec::new();
    emit_report(&rs, ReportFormat::MarkdownTable, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("| id | fitted constant | stability | criterion | verdict |"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn report_format_names() {
    assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::MarkdownTable);
    assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
    assert!("xml".parse::<ReportFormat>().is_err());
}

#[test]
fn runs_are_deterministic() {
    let cfg = VerifyConfig { lambdas: vec![1.0], ..VerifyConfig::default() };
    let a = run_suite(&[Suite::Endpoint], &cfg).unwrap();
    let b = run_suite(&[Suite::Endpoint], &cfg).unwrap();
    let (mut ja, mut jb) = (Vec::new(), Vec::new());
    emit_report(&a, ReportFormat::Json, &mut ja).unwrap();
    emit_report(&b, ReportFormat::Json, &mut jb).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn catalog_matches_manifest() {
    let manifest: BTreeSet<String> =
        include_str!("data/case_manifest.txt").lines().filter(|l| !l.is_empty()).map(String::from).collect();
    let cases = catalog(&VerifyConfig::default(), &Suite::ALL);
    let ids: BTreeSet<String> = cases.iter().map(|c| c.base_id().to_string()).collect();
    assert_eq!(ids, manifest);
    let full: BTreeSet<&str> = cases.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(full.len(), cases.len(), "duplicate case ids");
}

#[test]
fn config_from_toml() {
    let cfg = VerifyConfig::from_toml_str("lambdas = [0.75]\nseed = 3\n").unwrap();
    assert_eq!(cfg.lambdas, vec![0.75]);
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.band, VerifyConfig::default().band);
    assert!(VerifyConfig::from_toml_str("lambda = [1.0]").is_err());
    assert!(VerifyConfig::from_toml_str("betas = [1.5]").is_err());
}

#[test]
fn suite_selection() {
    assert_eq!(Suite::parse_selection("all").unwrap().len(), 5);
    assert_eq!(Suite::parse_selection("endpoint").unwrap(), vec![Suite::Endpoint]);
    assert!(Suite::parse_selection("nope").is_err());
}

#[test]
fn bounded_uses_group_sups() {
    let c = synthetic(Criterion::Bounded { band: 10.0, ceiling: None }, &[&[1.0, 2.0], &[3.0, 4.0]], |x| Ok(x));
    let r = run_case(&c);
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.fitted_constant, 4.0);
    assert_eq!(r.stability, 2.0);
    assert_eq!(r.witness_group, "g1");

    let c = synthetic(Criterion::Bounded { band: 10.0, ceiling: None }, &[&[1.0], &[30.0]], |x| Ok(x));
    assert_eq!(run_case(&c).verdict, Verdict::Fail);
    let c = synthetic(Criterion::Bounded { band: 10.0, ceiling: Some(3.0) }, &[&[4.0]], |x| Ok(x));
    assert_eq!(run_case(&c).verdict, Verdict::Fail);
}

#[test]
fn below_and_near() {
    let c = synthetic(Criterion::Below { tol: 1e-6 }, &[&[1e-7, 5e-7]], |x| Ok(x));
    assert_eq!(run_case(&c).verdict, Verdict::Pass);
    let c = synthetic(Criterion::Below { tol: 1e-6 }, &[&[1e-7, 2e-6]], |x| Ok(x));
    assert_eq!(run_case(&c).verdict, Verdict::Fail);
    let c = synthetic(Criterion::Near { target: 1.0, tol: 0.1 }, &[&[0.95, 1.05]], |x| Ok(x));
    assert_eq!(run_case(&c).verdict, Verdict::Pass);
    let c = synthetic(Criterion::Near { target: 1.0, tol: 0.1 }, &[&[0.95, 0.8]], |x| Ok(x));
    let r = run_case(&c);
    assert_eq!(r.verdict, Verdict::Fail);
    assert_eq!(r.fitted_constant, 0.8);
}

#[test]
fn errors_and_nan_fail_the_case_only() {
    let c = synthetic(Criterion::Below { tol: 1.0 }, &[&[0.5, 2.0]], |x| {
        if x > 1.0 {
            Err(Error::NoConvergence { value: 0.0, error: 1.0 })
        } else {
            Ok(x)
        }
    });
    let r = run_case(&c);
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.note.contains("did not converge"), "{}", r.note);

    let c = synthetic(Criterion::Below { tol: 1.0 }, &[&[0.5]], |_| Ok(f64::NAN));
    let r = run_case(&c);
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.note.contains("NaN"));
}

#[test]
fn dilation_mismatch_fails() {
    let mut c = synthetic(Criterion::Bounded { band: 10.0, ceiling: None }, &[&[1.0]], |x| Ok(x));
    c.dilation_pair = Some([vec![1.0], vec![1.005]]);
    assert_eq!(run_case(&c).verdict, Verdict::Pass);
    c.dilation_pair = Some([vec![1.0], vec![1.5]]);
    let r = run_case(&c);
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.note.contains("dilation"));
}
