use std::fmt::Write;

use super::trend::{TrendRow, TrendTable};
use crate::domain::{Area, Gender, StudyYear};

/// One line of the participant vs model-based comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub gender: Gender,
    pub area: Area,
    pub participants: Option<f64>,
    pub model_based: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl From<&TrendRow> for ReportRow {
    fn from(r: &TrendRow) -> Self {
        ReportRow {
            gender: r.gender,
            area: r.area,
            participants: r.uncorrected,
            model_based: r.corrected,
            lower: r.lower,
            upper: r.upper,
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.1}"))
}

/// Rows for one survey year, men first, areas in code order.
pub fn report_rows(table: &TrendTable, year: StudyYear) -> Vec<ReportRow> {
    let mut rows: Vec<&TrendRow> = table.rows.iter().filter(|r| r.year == year).collect();
    rows.sort_by_key(|r| (r.gender, r.area));
    rows.into_iter().map(ReportRow::from).collect()
}

/// Plain-text table: gender, area, participants %, model-based % and its 95% interval.
pub fn render_report(table: &TrendTable, year: StudyYear) -> (Vec<ReportRow>, String) {
    let rows = report_rows(table, year);
    let mut out = String::new();
    let _ = writeln!(out, "Smoking prevalence (%), {year}: participants vs model-based");
    let _ = writeln!(
        out,
        "{:<7} {:<20} {:>12} {:>12} {:>16}",
        "gender", "area", "participants", "model-based", "95% interval"
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{:<7} {:<20} {:>12} {:>12} {:>16}",
            r.gender.as_str(),
            r.area.name(),
            pct(r.participants),
            pct(r.model_based),
            format!("{}-{}", pct(r.lower), pct(r.upper)),
        );
    }
    (rows, out)
}
