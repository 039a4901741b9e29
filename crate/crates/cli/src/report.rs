//! Pipeline x noise-level error tables built from saved reports.

use std::fmt;
use std::path::{Path, PathBuf};

use vline_core::eval::ReconReport;

use crate::CliError;

/// Rows are pipelines, columns noise levels (ascending). A cell holds the
/// median over matching reports of the worse of the `f1`/`f2` errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub levels: Vec<f64>,
    pub rows: Vec<(u8, Vec<Option<f64>>)>,
}

/// Larger of the f1/f2 relative errors; `None` when neither is present.
pub fn field_error(r: &ReconReport) -> Option<f64> {
    r.components.iter().filter(|c| c.name == "f1" || c.name == "f2").map(|c| c.rel_l2).reduce(f64::max)
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

pub fn error_table(reports: &[ReconReport]) -> ReportTable {
    let mut levels: Vec<f64> = reports.iter().map(|r| r.noise.level).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut ids: Vec<u8> = reports.iter().map(|r| r.pipeline).collect();
    ids.sort_unstable();
    ids.dedup();
    let rows = ids
        .into_iter()
        .map(|id| {
            let cells = levels
                .iter()
                .map(|&l| {
                    median(
                        reports
                            .iter()
                            .filter(|r| r.pipeline == id && r.noise.level == l)
                            .filter_map(field_error)
                            .collect(),
                    )
                })
                .collect();
            (id, cells)
        })
        .collect();
    ReportTable { levels, rows }
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<8}", "pipeline")?;
        for l in &self.levels {
            write!(f, " {:>10}", format!("{}%", 100.0 * l))?;
        }
        writeln!(f)?;
        for (id, cells) in &self.rows {
            write!(f, "{id:<8}")?;
            for c in cells {
                match c {
                    Some(e) => write!(f, " {:>10}", format!("{:.2}%", 100.0 * e))?,
                    None => write!(f, " {:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A directory stands for its `report.toml`.
pub fn read_reports(paths: &[PathBuf]) -> Result<Vec<ReconReport>, CliError> {
    paths
        .iter()
        .map(|p| {
            let file = if p.is_dir() { p.join("report.toml") } else { p.clone() };
            read_one(&file)
        })
        .collect()
}

fn read_one(path: &Path) -> Result<ReconReport, CliError> {
    ReconReport::read(path).map_err(|e| CliError::config(format!("unreadable report {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vline_core::eval::{ComponentError, NoiseSpec};

    fn report(id: u8, level: f64, e1: f64, e2: f64) -> ReconReport {
        let c = |name: &str, e| ComponentError { name: name.into(), rel_l2: e, absolute: false, max_err: 0.0 };
        ReconReport {
            pipeline: id,
            geometry: String::new(),
            n: 16,
            half_extent: 1.0,
            inset_radius: 0.8,
            seconds: 0.0,
            files: vec![],
            noise: NoiseSpec::new(level, 0).unwrap(),
            components: vec![c("f1", e1), c("f2", e2), c("W", 9.0)],
            images: vec![],
        }
    }

    #[test]
    fn empty_table_is_just_a_header() {
        let t = error_table(&[]);
        assert_eq!(t.to_string(), "pipeline\n");
    }

    #[test]
    fn columns_sorted_and_cells_are_medians() {
        let rs = vec![
            report(5, 0.2, 0.4, 0.1),
            report(2, 0.0, 0.01, 0.02),
            report(2, 0.05, 0.1, 0.0),
            report(2, 0.05, 0.3, 0.2),
            report(2, 0.05, 0.2, 0.0),
        ];
        let t = error_table(&rs);
        assert_eq!(t.levels, vec![0.0, 0.05, 0.2]);
        assert_eq!(t.rows[0], (2, vec![Some(0.02), Some(0.2), None]));
        assert_eq!(t.rows[1], (5, vec![None, None, Some(0.4)]));
        let text = t.to_string();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("5%"));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
