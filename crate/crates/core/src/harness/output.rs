//! Writers for reports: pretty JSON, per-table CSV, JSON lines, gnuplot data
//! and a plain-text summary.

use super::{ExperimentReport, Relation};
use crate::error::Result;
use crate::spaces::cb;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn write_json(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, report.to_json()? + "\n")?;
    Ok(())
}

/// One `<table>.csv` per report table; returns the written paths.
pub fn write_csv_tables(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for table in &report.tables {
        let file: String =
            table.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect();
        let path = dir.join(format!("{file}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(table.columns.iter().map(|c| format!("{}[{}]", c.name, provenance_tag(c.provenance))))?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

/// Appends one JSON object per item.
pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        writeln!(f, "{}", serde_json::to_string(item)?)?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `cb_curves.dat` (columns `r`, then `C_b(r)` for each `b`) and
/// `margins.dat` (check name index, margin).
pub fn write_gnuplot(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut bs = vec![-1.0, 0.0, 1.0];
    if !bs.contains(&report.config.b) {
        bs.push(report.config.b);
    }
    let mut text = format!("# r {}\n", bs.iter().map(|b| format!("C_{b}")).collect::<Vec<_>>().join(" "));
    for i in 1..=300 {
        let r = 1.5 * i as f64 / 300.0;
        text.push_str(&format!("{r:e}"));
        for &b in &bs {
            match cb(b, r) {
                Ok(v) => text.push_str(&format!(" {v:e}")),
                Err(_) => text.push_str(" NaN"),
            }
        }
        text.push('\n');
    }
    std::fs::write(dir.join("cb_curves.dat"), text)?;
    let mut margins = String::from("# index margin pass name\n");
    for (i, c) in report.checks.iter().enumerate() {
        writeln!(margins, "{i} {:e} {} {}", c.margin.value, u8::from(c.pass), c.name).expect("string write");
    }
    std::fs::write(dir.join("margins.dat"), margins)?;
    Ok(())
}

fn provenance_tag(p: super::Provenance) -> &'static str {
    match p {
        super::Provenance::Computed => "computed",
        super::Provenance::PaperBound => "bound",
        super::Provenance::DerivedOracle => "oracle",
    }
}

fn relation_symbol(r: Relation) -> &'static str {
    match r {
        Relation::AtLeast => "≥",
        Relation::AtMost => "≤",
        Relation::Equal => "=",
        Relation::StrictlyBelow => "<",
        Relation::StrictlyAbove => ">",
    }
}

/// Human-readable summary of a report.
pub fn render(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} on {} {}", report.experiment.name(), report.entry, report.entry_parameters);
    if let Some(b) = &report.branch {
        let _ = writeln!(s, "branch: {b}");
    }
    for h in &report.hypotheses {
        let _ = writeln!(s, "  [{:?}] {}: {}", h.status, h.name, h.detail);
    }
    for c in &report.checks {
        let k = c.k.map(|k| format!(" k={k}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "  {} {}{k}: {:.9e} {} {:.9e} (margin {:.3e}, tol {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.computed.value,
            relation_symbol(c.relation),
            c.bound.value,
            c.margin.value,
            c.tolerance
        );
    }
    for n in &report.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    let failed = report.failed_checks().len();
    let _ = writeln!(s, "{} ({} checks, {failed} failed)", if report.passed { "PASSED" } else { "FAILED" }, report.checks.len());
    s
}
