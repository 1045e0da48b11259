//! Report emission: a byte-deterministic machine format and a markdown
//! table.

use std::fmt::Write as _;
use std::path::Path;

use crate::bench::metrics::MetricsTable;
use crate::error::Result;
use crate::fmt4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Machine,
    Markdown,
}

impl ReportFormat {
    pub fn parse(name: &str) -> Option<ReportFormat> {
        match name {
            "machine" => Some(ReportFormat::Machine),
            "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

/// Machine format: fixed key order, one `key=value` group per line, four
/// fractional digits. Identical tables render to identical bytes.
pub fn render_machine(table: &MetricsTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "report-version=1");
    let _ = writeln!(
        out,
        "perturbation={}",
        table.perturbation.as_deref().unwrap_or("none")
    );
    for row in &table.rows {
        let _ = writeln!(
            out,
            "skill={} n={} accuracy={} f1={} routing={}",
            row.skill.canonical_name(),
            row.n,
            fmt4(row.accuracy),
            fmt4(row.f1),
            fmt4(row.routing_accuracy)
        );
    }
    let _ = writeln!(
        out,
        "overall n={} accuracy={} f1={} routing={}",
        table.overall.n,
        fmt4(table.overall.accuracy),
        fmt4(table.overall.f1),
        fmt4(table.overall.routing_accuracy)
    );
    for failure in &table.errors {
        let _ = writeln!(
            out,
            "error id={} message={}",
            failure.id,
            failure.message.replace('\n', " ")
        );
    }
    out
}

/// Markdown: one row per enabled skill in ordinal order plus the `Avg.` row.
pub fn render_markdown(table: &MetricsTable) -> String {
    let mut out = String::new();
    if let Some(label) = &table.perturbation {
        let _ = writeln!(out, "Perturbation: {label}");
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "| Skill | n | ACC | F1 | Routing |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    for row in &table.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.skill.canonical_name(),
            row.n,
            fmt4(row.accuracy),
            fmt4(row.f1),
            fmt4(row.routing_accuracy)
        );
    }
    let _ = writeln!(
        out,
        "| Avg. | {} | {} | {} | {} |",
        table.overall.n,
        fmt4(table.overall.accuracy),
        fmt4(table.overall.f1),
        fmt4(table.overall.routing_accuracy)
    );
    if !table.errors.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Errors:");
        for failure in &table.errors {
            let _ = writeln!(
                out,
                "- {}: {}",
                failure.id,
                failure.message.replace('\n', " ")
            );
        }
    }
    out
}

pub fn render_report(table: &MetricsTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => render_machine(table),
        ReportFormat::Markdown => render_markdown(table),
    }
}

/// Renders and writes the report to `path`.
pub fn emit_report(
    table: &MetricsTable,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, render_report(table, format))?;
    Ok(())
}
