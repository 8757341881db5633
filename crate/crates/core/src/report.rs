//! CSV output of experiment results.
//!
//! One header row, then one row per point: label, sweep variables, counts
//! `n*`, frequencies `f*`, oracle probabilities `p*` and the maximal
//! deviation. Reals are written with six fractional digits. Rows with fewer
//! channels than the widest row are padded with empty cells.

use thiserror::Error;

use crate::experiments::{BeamSplitterPoint, CnotRow, FrequencyReport, MziPoint};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub sweep: Vec<(String, f64)>,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub oracle: Option<Vec<f64>>,
    pub deviation: Option<f64>,
}

impl ReportRow {
    pub fn new(label: &str, sweep: &[(&str, f64)], report: &FrequencyReport) -> Self {
        ReportRow {
            label: label.to_string(),
            sweep: sweep.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            counts: report.counts.clone(),
            frequencies: report.frequencies.clone(),
            oracle: report.oracle.clone(),
            deviation: report.max_deviation,
        }
    }
}

impl From<&BeamSplitterPoint> for ReportRow {
    fn from(p: &BeamSplitterPoint) -> Self {
        ReportRow::new("bs", &[("psi0", p.psi0), ("psi1", p.psi1)], &p.report)
    }
}

/// Channels 0, 1 are the first beam splitter (normalized by `n0 + n1`),
/// channels 2, 3 the interferometer outputs (normalized by `n2 + n3`).
impl From<&MziPoint> for ReportRow {
    fn from(p: &MziPoint) -> Self {
        let oracle = match (&p.first.oracle, &p.output.oracle) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        ReportRow {
            label: "mzi".to_string(),
            sweep: vec![
                ("phi0".to_string(), p.phi0),
                ("phi1".to_string(), p.phi1),
                ("psi0".to_string(), p.psi0),
            ],
            counts: p
                .first
                .counts
                .iter()
                .chain(&p.output.counts)
                .copied()
                .collect(),
            frequencies: p
                .first
                .frequencies
                .iter()
                .chain(&p.output.frequencies)
                .copied()
                .collect(),
            deviation: oracle.as_ref().map(|_| p.max_deviation()),
            oracle,
        }
    }
}

impl From<&CnotRow> for ReportRow {
    fn from(r: &CnotRow) -> Self {
        ReportRow::new(
            "cnot",
            &[
                ("qubit1", r.qubit1 as u8 as f64),
                ("qubit2", r.qubit2 as u8 as f64),
            ],
            &r.report,
        )
    }
}

fn real(v: f64) -> String {
    format!("{v:.6}")
}

pub fn emit_csv(rows: &[ReportRow]) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut sweep_names: Vec<&str> = Vec::new();
    for r in rows {
        for (k, _) in &r.sweep {
            if !sweep_names.contains(&k.as_str()) {
                sweep_names.push(k);
            }
        }
    }
    let width = rows.iter().map(|r| r.counts.len()).max().unwrap_or(0);
    let with_oracle = rows.iter().any(|r| r.oracle.is_some());

    let mut header: Vec<String> = vec!["label".into()];
    header.extend(sweep_names.iter().map(|s| s.to_string()));
    header.extend((0..width).map(|i| format!("n{i}")));
    header.extend((0..width).map(|i| format!("f{i}")));
    if with_oracle {
        header.extend((0..width).map(|i| format!("p{i}")));
        header.push("deviation".into());
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = vec![r.label.clone()];
        for name in &sweep_names {
            rec.push(
                r.sweep
                    .iter()
                    .find(|(k, _)| k == name)
                    .map(|(_, v)| real(*v))
                    .unwrap_or_default(),
            );
        }
        let pad = |cells: Vec<String>| {
            let mut cells = cells;
            cells.resize(width, String::new());
            cells
        };
        rec.extend(pad(r.counts.iter().map(|c| c.to_string()).collect()));
        rec.extend(pad(r.frequencies.iter().map(|f| real(*f)).collect()));
        if with_oracle {
            rec.extend(pad(r.oracle.iter().flatten().map(|p| real(*p)).collect()));
            rec.push(r.deviation.map(real).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
