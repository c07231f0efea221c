//! Report emission: CSV with a stable column order or JSON mirroring the
//! summary structs. Numbers print with 10 significant digits and every
//! artifact ends with a newline, so identical configs produce byte-identical
//! files.

use std::io::Write;
use std::path::Path;

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::sim::SimulationSummary;

pub const CSV_HEADER: &str =
    "n,mechanism,trials,sw_pp_mean,sw_pp_se,sw_opt_mean,sw_opt_se,ratio,ratio_se,revenue_mean";

/// 10 significant digits, locale-independent.
pub fn fmt_g10(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{x:.9e}")
}

pub fn summaries_to_csv(rows: &[SimulationSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.mechanism,
            r.trials,
            fmt_g10(r.sw_pp_mean),
            fmt_g10(r.sw_pp_se),
            fmt_g10(r.sw_opt_mean),
            fmt_g10(r.sw_opt_se),
            fmt_g10(r.ratio),
            fmt_g10(r.ratio_se),
            fmt_g10(r.revenue_mean),
        ));
    }
    out
}

pub fn summaries_to_json(rows: &[SimulationSummary]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rows)
        .map_err(|e| Error::numeric(format!("json encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn bound_report_to_json(report: &BoundReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| Error::numeric(format!("json encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `content` to `path`, or to stdout when the path is `None`/`-`.
pub fn emit(content: &str, path: Option<&str>) -> Result<()> {
    match path {
        None | Some("-") => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            Ok(())
        }
        Some(p) => {
            if let Some(parent) = Path::new(p).parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(p, content)?;
            Ok(())
        }
    }
}
