use adapted_theta::harness::{render_csv, render_json, ROUND_OFF_FLOOR};
use adapted_theta::{
    emit_report, fit_convergence_rate, run_convergence_study, ConvergenceReport, Error, ReportFormat,
    SchemeSpec, StudySpec, StudyTarget,
};
use proptest::prelude::*;

fn integral_spec() -> StudySpec {
    StudySpec::new(
        StudyTarget::Integral,
        SchemeSpec::parse_list("ada2,ada3,cn").unwrap(),
        vec![128, 256, 512, 1024, 2048, 4096],
    )
}

proptest! {
    #[test]
    fn rate_recovers_power_laws(p in 0.5f64..6.0, c in 1e-3f64..1e3, k in 3usize..7) {
        let hs: Vec<f64> = (0..k).map(|i| 0.5f64.powi(i as i32 + 3)).collect();
        let errs: Vec<f64> = hs.iter().map(|h| c * h.powf(p)).collect();
        prop_assert!((fit_convergence_rate(&hs, &errs).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn rate_ignores_scale_and_order(
        errs in prop::collection::vec(1e-9f64..1.0, 5),
        c in 1e-4f64..1e4,
    ) {
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let base = fit_convergence_rate(&hs, &errs).unwrap();
        let scaled: Vec<f64> = errs.iter().map(|e| c * e).collect();
        prop_assert!((fit_convergence_rate(&hs, &scaled).unwrap() - base).abs() < 1e-9);
        let rh: Vec<f64> = hs.iter().rev().copied().collect();
        let re: Vec<f64> = errs.iter().rev().copied().collect();
        prop_assert!((fit_convergence_rate(&rh, &re).unwrap() - base).abs() < 1e-9);
    }
}

#[test]
fn integral_study_rates() {
    let report = run_convergence_study(&integral_spec()).unwrap();
    assert_eq!(report.failed_cells().count(), 0);
    assert_eq!(report.rows.len(), 18);
    for (scheme, floor) in [("ada2", 2.7), ("ada3", 3.7), ("cn", 1.8)] {
        let rate = report.rates_for(scheme).unwrap().rate_y.unwrap();
        assert!(rate >= floor, "{scheme}: {rate}");
        assert!(report.rates_for(scheme).unwrap().rate_z.is_none());
    }
    let labels: Vec<(&str, usize)> = report.rows.iter().map(|r| (r.scheme.as_str(), r.n)).collect();
    let mut sorted = labels.clone();
    sorted.sort();
    assert_eq!(labels, sorted);
}

#[test]
fn reports_are_byte_identical() {
    let a = run_convergence_study(&integral_spec()).unwrap();
    let b = run_convergence_study(&integral_spec()).unwrap();
    assert_eq!(render_csv(&a), render_csv(&b));
    assert_eq!(render_json(&a).unwrap(), render_json(&b).unwrap());

    let bsde = StudySpec::new(
        StudyTarget::Bsde("example51".into()),
        SchemeSpec::parse_list("cn,ada2").unwrap(),
        vec![8, 16],
    );
    let a = run_convergence_study(&bsde).unwrap();
    let b = run_convergence_study(&bsde).unwrap();
    assert_eq!(render_csv(&a), render_csv(&b));
}

#[test]
fn json_rates_match_csv_rows() {
    let report = run_convergence_study(&integral_spec()).unwrap();
    let text = render_csv(&report);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut by_scheme: std::collections::BTreeMap<String, (Vec<f64>, Vec<f64>)> = Default::default();
    for record in reader.records() {
        let record = record.unwrap();
        let err: f64 = record[4].parse().unwrap();
        if err < ROUND_OFF_FLOOR {
            continue;
        }
        let entry = by_scheme.entry(record[0].to_string()).or_default();
        entry.0.push(record[3].parse().unwrap());
        entry.1.push(err);
    }
    let back: ConvergenceReport = serde_json::from_str(&render_json(&report).unwrap()).unwrap();
    for (scheme, (hs, errs)) in by_scheme {
        let refit = fit_convergence_rate(&hs, &errs).unwrap();
        let stored = back.rates_for(&scheme).unwrap().rate_y.unwrap();
        assert!((refit - stored).abs() < 1e-4, "{scheme}: {refit} vs {stored}");
    }
}

#[test]
fn failed_cells_are_recorded() {
    let spec =
        StudySpec::new(StudyTarget::Bsde("example51".into()), vec![SchemeSpec::Adapted(4)], vec![4, 8]);
    let report = run_convergence_study(&spec).unwrap();
    let failed: Vec<usize> = report.failed_cells().map(|r| r.n).collect();
    assert_eq!(failed, vec![4]);
    // One surviving row cannot carry a rate.
    assert!(report.rates_for("ada4").unwrap().rate_y.is_none());
    assert!(render_csv(&report).lines().nth(1).unwrap().starts_with("ada4,4,4,2.50000e-1,,,"));
}

#[test]
fn invalid_specs_rejected() {
    let empty = StudySpec::new(StudyTarget::Integral, vec![], vec![128, 256]);
    assert!(matches!(run_convergence_study(&empty), Err(Error::InvalidStudy(_))));
    let unsorted = StudySpec::new(StudyTarget::Integral, vec![SchemeSpec::Adapted(2)], vec![256, 128]);
    assert!(run_convergence_study(&unsorted).is_err());
    let unknown = StudySpec::new(StudyTarget::Bsde("nope".into()), vec![SchemeSpec::Adapted(2)], vec![8, 16]);
    assert!(matches!(run_convergence_study(&unknown), Err(Error::UnknownProblem(_))));
}

#[test]
fn emit_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_convergence_study(&integral_spec()).unwrap();
    let csv_path = dir.path().join("out.csv");
    let json_path = dir.path().join("out.json");
    emit_report(&report, ReportFormat::Csv, &csv_path).unwrap();
    emit_report(&report, ReportFormat::Json, &json_path).unwrap();
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), render_csv(&report));
    let back: ConvergenceReport =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(back, report);
}
