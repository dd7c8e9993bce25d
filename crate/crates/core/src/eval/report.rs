use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Round half away from zero to `decimals` places.
pub fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    // nudge so that values like 6.125 stored as 6.12499.. still round up
    let scaled = x * f;
    (scaled + scaled.signum() * 1e-9).round() / f
}

/// WER cells keyed by row label (feature or system) and condition label.
/// Rows and conditions keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionGrid {
    rows: Vec<(String, Vec<(String, f64)>)>,
}

impl ConditionGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Grid whose rows all share `conditions`.
    pub fn from_rows<S: AsRef<str>>(conditions: &[S], rows: &[(&str, Vec<f64>)]) -> Result<Self> {
        let mut g = Self::new();
        for (label, cells) in rows {
            if cells.len() != conditions.len() {
                return Err(Error::Dimension(format!(
                    "row '{label}' has {} cells for {} conditions",
                    cells.len(),
                    conditions.len()
                )));
            }
            for (c, &v) in conditions.iter().zip(cells) {
                g.insert(label, c.as_ref(), v)?;
            }
        }
        Ok(g)
    }

    /// Set one cell, replacing any previous value.
    pub fn insert(&mut self, row: &str, condition: &str, wer_percent: f64) -> Result<()> {
        if !wer_percent.is_finite() || wer_percent < 0.0 {
            return Err(Error::Config(format!("WER {wer_percent} for '{row}'/'{condition}' is not a valid percentage")));
        }
        let idx = match self.rows.iter().position(|(l, _)| l == row) {
            Some(i) => i,
            None => {
                self.rows.push((row.to_string(), Vec::new()));
                self.rows.len() - 1
            }
        };
        let cells = &mut self.rows[idx].1;
        match cells.iter_mut().find(|(c, _)| c == condition) {
            Some(cell) => cell.1 = wer_percent,
            None => cells.push((condition.to_string(), wer_percent)),
        }
        Ok(())
    }

    pub fn row_labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(l, _)| l.as_str())
    }

    pub fn conditions(&self) -> Vec<&str> {
        self.rows
            .first()
            .map(|(_, cells)| cells.iter().map(|(c, _)| c.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn row(&self, label: &str) -> Result<&[(String, f64)]> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| c.as_slice())
            .ok_or_else(|| Error::UnknownLabel(format!("no row '{label}' in grid")))
    }

    pub fn get(&self, row: &str, condition: &str) -> Option<f64> {
        self.row(row).ok()?.iter().find(|(c, _)| c == condition).map(|&(_, v)| v)
    }

    /// Every row has exactly the conditions of the first row, in any order.
    pub fn check_rectangular(&self) -> Result<()> {
        let conds = self.conditions();
        for (label, cells) in &self.rows {
            let same = cells.len() == conds.len() && cells.iter().all(|(c, _)| conds.contains(&c.as_str()));
            if !same {
                return Err(Error::Dimension(format!(
                    "row '{label}' conditions differ from '{}'",
                    self.rows[0].0
                )));
            }
        }
        Ok(())
    }

    /// CSV with one line per row: label, cells in condition order, average,
    /// and reduction relative to `baseline`.
    pub fn to_csv(&self, baseline: &str) -> Result<String> {
        let table = Table::build(self, baseline)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["system".to_string()];
        header.extend(table.conditions.iter().map(|c| c.to_string()));
        header.push("avg".into());
        header.push("rel_reduction_pct".into());
        w.write_record(&header)?;
        for r in &table.rows {
            let mut rec = vec![r.label.to_string()];
            rec.extend(r.cells.iter().map(|v| format!("{v:.2}")));
            rec.push(format!("{:.2}", r.average));
            rec.push(r.reduction.map(|v| format!("{v:.1}")).unwrap_or_default());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Mean of the row's cells, rounded to 2 decimals.
pub fn row_average(grid: &ConditionGrid, label: &str) -> Result<f64> {
    let cells = grid.row(label)?;
    if cells.is_empty() {
        return Err(Error::EmptyInput(format!("row '{label}' has no cells")));
    }
    let sum: f64 = cells.iter().map(|(_, v)| v).sum();
    Ok(round_to(sum / cells.len() as f64, 2))
}

/// Percentage WER reduction of `system_wer` relative to `baseline_wer`,
/// rounded to 1 decimal.
pub fn relative_reduction(baseline_wer: f64, system_wer: f64) -> Result<f64> {
    if !(baseline_wer > 0.0) || !system_wer.is_finite() {
        return Err(Error::Config(format!(
            "relative reduction needs a positive baseline, got {baseline_wer}"
        )));
    }
    Ok(round_to(100.0 * (baseline_wer - system_wer) / baseline_wer, 1))
}

struct TableRow<'a> {
    label: &'a str,
    cells: Vec<f64>,
    average: f64,
    /// Absent when the baseline average is zero.
    reduction: Option<f64>,
}

struct Table<'a> {
    conditions: Vec<&'a str>,
    rows: Vec<TableRow<'a>>,
}

impl<'a> Table<'a> {
    fn build(grid: &'a ConditionGrid, baseline: &str) -> Result<Self> {
        grid.check_rectangular()?;
        let base = row_average(grid, baseline)?;
        let conditions = grid.conditions();
        let rows = grid
            .row_labels()
            .map(|label| {
                let average = row_average(grid, label)?;
                let cells = conditions
                    .iter()
                    .map(|c| grid.get(label, c).expect("rectangular grid"))
                    .collect();
                Ok(TableRow {
                    label,
                    cells,
                    average,
                    reduction: if base > 0.0 { Some(relative_reduction(base, average)?) } else { None },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { conditions, rows })
    }
}

/// Fixed-width text table: one line per row with its per-condition WERs,
/// the average and the relative reduction against `baseline`'s average.
pub fn render_report(grid: &ConditionGrid, baseline: &str) -> Result<String> {
    let table = Table::build(grid, baseline)?;
    let label_w = table.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
    let cell_w = table.conditions.iter().map(|c| c.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "system");
    for c in &table.conditions {
        let _ = write!(out, " {c:>cell_w$}");
    }
    let _ = writeln!(out, " {:>7} {:>8}", "avg", "rel_red%");
    for r in &table.rows {
        let _ = write!(out, "{:<label_w$}", r.label);
        for v in &r.cells {
            let _ = write!(out, " {v:>cell_w$.2}");
        }
        let reduction = r.reduction.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"));
        let _ = writeln!(out, " {:>7.2} {reduction:>8}", r.average);
    }
    let _ = writeln!(out, "baseline: {baseline}");
    Ok(out)
}
