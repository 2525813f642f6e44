//! CSV and JSON writers for study reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::convergence::{ConvergenceReport, ConvergenceRow};
use crate::error::Result;

/// Column order of the convergence CSV.
pub const REPORT_COLUMNS: [&str; 9] = [
    "n",
    "lambda_re",
    "lambda_im",
    "err_kernel",
    "err_t",
    "err_tprime",
    "bound_4_3",
    "bound_4_6",
    "flag",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn row_record(r: &ConvergenceRow) -> [String; 9] {
    [
        r.n.to_string(),
        r.lambda.re.to_string(),
        r.lambda.im.to_string(),
        opt(r.err_kernel),
        opt(r.err_t),
        opt(r.err_tprime),
        opt(r.bound_4_3),
        opt(r.bound_4_6),
        r.flag.clone(),
    ]
}

/// One row per `(n, λ)`; empty cells for missing values.
pub fn write_report_csv(report: &ConvergenceReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in &report.rows {
        w.write_record(row_record(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Generic CSV table.
pub fn write_table(out: impl Write, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Output document: the result together with the resolved config and its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<C, T> {
    pub command: String,
    pub config_hash: String,
    pub config: C,
    pub artifacts: Vec<String>,
    pub result: T,
}

pub fn write_json<T: Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::{GridRecord, Verdict};
    use num_complex::Complex64;

    fn report(rows: Vec<ConvergenceRow>) -> ConvergenceReport {
        ConvergenceReport {
            study: "resolvent_convergence".into(),
            kernel: "k".into(),
            lambdas: vec![Complex64::new(0.3, 0.0)],
            n_list: rows.iter().map(|r| r.n).collect(),
            beta: vec![0.0; rows.len()],
            rows,
            constants: None,
            grid: GridRecord {
                half_width: 2.0,
                panels_per_unit: 1,
                points_per_panel: 4,
                reference_n: 2,
                test_points: 10,
                reference_nodes: 16,
            },
            verdict: Verdict {
                tail_decreasing: true,
                final_error: None,
                tolerance: 1e-5,
                floor: 1e-12,
                passed: false,
            },
        }
    }

    fn row() -> ConvergenceRow {
        ConvergenceRow {
            n: 1,
            lambda: Complex64::new(0.3, -0.1),
            lambda_n: Complex64::new(0.3, -0.1),
            err_kernel: Some(0.1),
            err_t: Some(1.0 / 3.0),
            err_tprime: None,
            err_kernel_tilde: None,
            err_t_tilde: None,
            err_tprime_tilde: None,
            scaffold_excess: None,
            resolvent_norm: Some(1.5),
            sup_t: None,
            sup_tprime: None,
            sup_kernel: None,
            bound_4_3: Some(2.0),
            bound_4_6: None,
            flag: "ok".into(),
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report_csv(&report(vec![]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), REPORT_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn one_row_nine_columns() {
        let mut buf = Vec::new();
        write_report_csv(&report(vec![row()]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 9);
        assert_eq!(lines[1], "1,0.3,-0.1,0.1,0.3333333333333333,,2,,ok");
    }

    #[test]
    fn json_round_trip() {
        let rep = report(vec![row()]);
        let env = Envelope {
            command: "converge".into(),
            config_hash: "abc".into(),
            config: serde_json::json!({"a": 1}),
            artifacts: vec![],
            result: rep,
        };
        let mut buf = Vec::new();
        write_json(&env, &mut buf).unwrap();
        let back: Envelope<serde_json::Value, ConvergenceReport> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, env);
    }
}
