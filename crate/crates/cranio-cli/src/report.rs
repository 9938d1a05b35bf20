//! Evaluation report and loss-curve serialization.

use std::path::Path;

use cranio_core::metrics::EvalReport;
use cranio_core::nn::train::LossCurve;

use crate::CliError;

/// CSV rows: `case_id,dsc,hd_mm,re`; HD-undefined cases leave the column
/// empty. Floats use the shortest round-trip representation, so output is
/// byte-stable across runs.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("case_id,dsc,hd_mm,re\n");
    for row in &report.rows {
        let hd = row.hd_mm.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", row.case_id, row.dsc, hd, row.re));
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.json` next to each other.
pub fn write_report(stem: &Path, report: &EvalReport) -> Result<(), CliError> {
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(stem.with_extension("csv"), report_csv(report))?;
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::data("serializing report", e))?;
    json.push('\n');
    std::fs::write(stem.with_extension("json"), json)?;
    Ok(())
}

pub fn loss_curve_csv(curve: &LossCurve) -> String {
    let mut out = String::from("step,loss\n");
    for (step, loss) in curve {
        out.push_str(&format!("{step},{loss}\n"));
    }
    out
}
