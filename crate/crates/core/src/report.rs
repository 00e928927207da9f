//! CSV output. The first line names the schema version; the second is the
//! column header. Undefined values are empty cells.

use crate::experiment::SweepRow;
use crate::metrics::{Estimate, MetricsReport, ModeMetrics};

pub const SCHEMA_LINE: &str = "# photon-mux-sim v1";

const MODE_COLUMNS: [&str; 9] = [
    "signal_cps",
    "gate_cps",
    "brightness_cps",
    "accidental_cps",
    "accidental_shifted_cps",
    "car",
    "car_se",
    "g2",
    "g2_se",
];

pub fn csv_columns() -> Vec<String> {
    let mut cols: Vec<String> = vec!["axis_value".into(), "mu".into(), "cycles".into()];
    for prefix in ["en", "dis"] {
        cols.extend(MODE_COLUMNS.iter().map(|c| format!("{prefix}_{c}")));
    }
    cols.extend(
        ["improvement_factor", "improvement_factor_se", "g2_ratio", "g2_ratio_se"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn estimate_cells(e: Option<Estimate>) -> [String; 2] {
    [cell(e.map(|e| e.value)), cell(e.map(|e| e.stderr))]
}

fn mode_cells(m: Option<&ModeMetrics>) -> Vec<String> {
    let mut cells = vec![
        cell(m.map(|m| m.signal_cps)),
        cell(m.map(|m| m.gate_cps)),
        cell(m.map(|m| m.brightness_cps)),
        cell(m.map(|m| m.accidental_cps)),
        cell(m.map(|m| m.accidental_shifted_cps)),
    ];
    cells.extend(estimate_cells(m.and_then(|m| m.car)));
    cells.extend(estimate_cells(m.and_then(|m| m.g2)));
    cells
}

pub fn csv_row(axis_value: Option<f64>, r: &MetricsReport) -> String {
    let mut cells = vec![cell(axis_value), r.mu.to_string(), r.cycles.to_string()];
    cells.extend(mode_cells(r.enabled.as_ref()));
    cells.extend(mode_cells(r.disabled.as_ref()));
    cells.extend(estimate_cells(r.improvement_factor));
    cells.extend(estimate_cells(r.g2_ratio_enabled_disabled));
    cells.join(",")
}

fn document(rows: impl Iterator<Item = String>) -> String {
    let mut s = format!("{SCHEMA_LINE}\n{}\n", csv_columns().join(","));
    for row in rows {
        s.push_str(&row);
        s.push('\n');
    }
    s
}

/// A single run as a one-row table with an empty axis value.
pub fn run_csv(r: &MetricsReport) -> String {
    document(std::iter::once(csv_row(None, r)))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    document(rows.iter().map(|row| csv_row(Some(row.axis_value), &row.report)))
}
