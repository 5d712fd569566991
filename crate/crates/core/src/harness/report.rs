use std::path::Path;
use std::str::FromStr;

use super::study::{ConvergenceReport, ReportKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidStudy(format!("unknown report format `{other}`"))),
        }
    }
}

/// Six significant digits in scientific notation.
fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

fn csv_bytes(report: &ConvergenceReport) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match report.kind {
        ReportKind::Bsde => {
            w.write_record(["scheme", "q", "N", "h", "err_y", "err_z", "invalid_y", "invalid_z"])?;
            for r in &report.rows {
                w.write_record([
                    r.scheme.clone(),
                    r.q.to_string(),
                    r.n.to_string(),
                    sci(r.h),
                    opt(r.err_y),
                    opt(r.err_z),
                    r.invalid_y.to_string(),
                    r.invalid_z.to_string(),
                ])?;
            }
        }
        ReportKind::Integral => {
            w.write_record(["scheme", "q", "N", "h", "err", "invalid"])?;
            for r in &report.rows {
                w.write_record([
                    r.scheme.clone(),
                    r.q.to_string(),
                    r.n.to_string(),
                    sci(r.h),
                    opt(r.err_y),
                    r.invalid_y.to_string(),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn render_csv(report: &ConvergenceReport) -> String {
    let bytes = csv_bytes(report).expect("writing CSV to memory cannot fail");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

pub fn render_json(report: &ConvergenceReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Write the report to `path` in the requested format.
pub fn emit_report(report: &ConvergenceReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report)? + "\n",
    };
    std::fs::write(path, body).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::study::ReportRow;

    fn row(scheme: &str, n: usize, err: f64) -> ReportRow {
        ReportRow {
            scheme: scheme.into(),
            q: 2,
            n,
            h: 1.0 / n as f64,
            value_y: Some(0.5),
            value_z: Some(0.25),
            err_y: Some(err),
            err_z: Some(2.0 * err),
            invalid_y: 1,
            invalid_z: 0,
            floored_y: false,
            floored_z: false,
            failure: None,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = ConvergenceReport::from_rows(ReportKind::Bsde, "bsde:x".into(), vec![]);
        assert_eq!(render_csv(&report), "scheme,q,N,h,err_y,err_z,invalid_y,invalid_z\n");
        let report = ConvergenceReport::from_rows(ReportKind::Integral, "integral".into(), vec![]);
        assert_eq!(render_csv(&report), "scheme,q,N,h,err,invalid\n");
    }

    #[test]
    fn rows_formatted_and_sorted() {
        let report = ConvergenceReport::from_rows(
            ReportKind::Bsde,
            "bsde:x".into(),
            vec![row("cn", 8, 8.077e-5), row("ada2", 16, 8.907e-7), row("ada2", 8, 6.086e-6)],
        );
        let csv = render_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "ada2,2,8,1.25000e-1,6.08600e-6,1.21720e-5,1,0");
        assert_eq!(lines[2], "ada2,2,16,6.25000e-2,8.90700e-7,1.78140e-6,1,0");
        assert!(lines[3].starts_with("cn,2,8,"));
    }

    #[test]
    fn json_round_trip() {
        let report =
            ConvergenceReport::from_rows(ReportKind::Bsde, "bsde:x".into(), vec![row("cn", 8, 1e-3)]);
        let back: ConvergenceReport = serde_json::from_str(&render_json(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn io_error_names_path() {
        let report = ConvergenceReport::from_rows(ReportKind::Bsde, "bsde:x".into(), vec![]);
        let path = Path::new("/nonexistent-dir/report.csv");
        match emit_report(&report, ReportFormat::Csv, path) {
            Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
            other => panic!("unexpected {other:?}"),
        }
    }
}
