//! Per-image CSV rows and the JSON summary derived from them.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patchsearch::eval::{ImageRow, MetricsReport};
use serde::{Deserialize, Serialize};

use crate::manifest::DEFAULT_AREA_THRESHOLD;
use crate::suite::write_text;

pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub area_threshold: f64,
    pub methods: Vec<MetricsReport>,
}

impl Summary {
    pub fn method(&self, name: &str) -> Option<&MetricsReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Aggregates `rows` per method, in `order` (methods without rows are skipped).
    pub fn from_rows(rows: &[ImageRow], order: &[String], area_threshold: f64) -> Result<Self> {
        let mut methods = Vec::new();
        for name in order {
            let mine: Vec<ImageRow> = rows.iter().filter(|r| &r.method == name).cloned().collect();
            if !mine.is_empty() {
                methods.push(MetricsReport::from_rows(name, &mine, area_threshold)?);
            }
        }
        Ok(Self {
            area_threshold,
            methods,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Plain-text table for the terminal.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "method", "images", "success", "asr", "mar", "texture", "ada"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        for m in &self.methods {
            out += &format!(
                "{:<24} {:>6} {:>8.3} {:>8.3} {:>8} {:>8.4} {:>8}\n",
                m.method,
                m.images,
                m.success_rate,
                m.asr,
                opt(m.mar),
                m.texture_distance,
                opt(m.ada)
            );
        }
        out
    }
}

pub fn rows_to_csv(rows: &[ImageRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        return Ok(String::new());
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_rows(path: &Path) -> Result<Vec<ImageRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ImageRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Writes `report.csv` and `summary.json`; ADA values from a previous `ada`
/// run are kept.
pub fn write_report(out: &Path, rows: &[ImageRow], order: &[String], area_threshold: f64) -> Result<Summary> {
    let mut summary = Summary::from_rows(rows, order, area_threshold)?;
    fill_ada(out, &mut summary)?;
    write_text(&out.join(REPORT_FILE), &rows_to_csv(rows)?)?;
    write_text(&out.join(SUMMARY_FILE), &summary.to_json()?)?;
    Ok(summary)
}

fn fill_ada(out: &Path, summary: &mut Summary) -> Result<()> {
    let path = out.join(crate::ada::ADA_JSON_FILE);
    if !path.exists() {
        return Ok(());
    }
    let rows = crate::ada::read_ada_json(&path)?;
    for m in &mut summary.methods {
        m.ada = rows.iter().find(|r| r.method == m.method).map(|r| r.ada);
    }
    Ok(())
}

/// Rebuilds `summary.json` from `report.csv`.
pub fn cmd_report(out: &Path, area_threshold: Option<f64>) -> Result<Summary> {
    let rows = read_rows(&out.join(REPORT_FILE))?;
    if rows.is_empty() {
        bail!("{} has no rows", out.join(REPORT_FILE).display());
    }
    let threshold = match area_threshold {
        Some(t) => t,
        None => previous_threshold(out)?.unwrap_or(DEFAULT_AREA_THRESHOLD),
    };
    let mut order: Vec<String> = Vec::new();
    for r in &rows {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
    }
    let mut summary = Summary::from_rows(&rows, &order, threshold)?;
    fill_ada(out, &mut summary)?;
    write_text(&out.join(SUMMARY_FILE), &summary.to_json()?)?;
    Ok(summary)
}

fn previous_threshold(out: &Path) -> Result<Option<f64>> {
    let path = out.join(SUMMARY_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let s: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(s.area_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, seed: u64, success: bool, area: f64) -> ImageRow {
        ImageRow {
            method: method.into(),
            seed,
            success,
            area,
            object_area: 400.0,
            area_ratio: area / 400.0,
            effective_area_ratio: area / 400.0,
            texture_distance: 0.1,
            steps_to_success: success.then_some(7),
            detector_probability: None,
        }
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("ldap", 1, true, 20.0), row("ldap", 2, false, 1.0 / 3.0)];
        let path = dir.path().join(REPORT_FILE);
        fs::write(&path, rows_to_csv(&rows).unwrap()).unwrap();
        assert_eq!(read_rows(&path).unwrap(), rows);
    }

    #[test]
    fn report_recomputes_summary() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row("ldap", 1, true, 20.0),
            row("ldap", 2, false, 10.0),
            row("dpatch", 1, true, 100.0),
        ];
        let order = vec!["ldap".to_string(), "dpatch".to_string()];
        let written = write_report(dir.path(), &rows, &order, 0.1).unwrap();
        assert_eq!(written.method("ldap").unwrap().asr, 0.5);
        assert_eq!(written.method("dpatch").unwrap().asr, 0.0);
        let again = cmd_report(dir.path(), None).unwrap();
        assert_eq!(again, written);
        let text = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(text, written.to_json().unwrap());
        let loose = cmd_report(dir.path(), Some(0.5)).unwrap();
        assert_eq!(loose.method("dpatch").unwrap().asr, 1.0);
    }
}
