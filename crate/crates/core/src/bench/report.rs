//! Text and CSV tables. Every renderer is a pure function of a report, so a
//! report reloaded from JSON renders identically.

use std::fmt::Write;

use super::{BenchReport, Keep, StudyReport};

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Columns right-aligned to their widest cell, separated by two spaces.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:>w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|s| csv_field(s)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn bench_rows(report: &BenchReport, numeric: bool) -> Vec<Vec<String>> {
    let digits = if numeric { 6 } else { 2 };
    let mut header = vec!["instance", "bks", "best", "dev%"];
    if report.keep == Keep::All {
        header.push("mean");
    }
    header.extend(["iters_to_best", "time_s", "runs"]);
    let mut rows = vec![header.into_iter().map(String::from).collect::<Vec<_>>()];
    for r in &report.rows {
        let mut row = vec![
            r.instance.clone(),
            opt(r.bks, 2),
            format!("{:.digits$}", r.best_cost),
            opt(r.deviation, 2),
        ];
        if report.keep == Keep::All {
            row.push(format!("{:.digits$}", r.mean_cost));
        }
        row.extend([
            format!("{:.0}", r.mean_iterations_to_best),
            format!("{:.1}", r.mean_wall_ms / 1000.0),
            r.runs.len().to_string(),
        ]);
        rows.push(row);
    }
    rows
}

pub fn render_bench_text(report: &BenchReport) -> String {
    align(&bench_rows(report, false))
}

pub fn render_bench_csv(report: &BenchReport) -> String {
    csv(&bench_rows(report, true))
}

fn study_rows(report: &StudyReport, numeric: bool) -> Vec<Vec<String>> {
    let digits = if numeric { 6 } else { 2 };
    let first = match report.kind {
        super::StudyKind::Delay => "delay",
        super::StudyKind::Start => "start",
    };
    let mut rows = vec![[
        first,
        "qualifying",
        "attempts",
        "mean_iters_to_best",
        "mean_time_s",
        "mean_cost",
        "best_cost",
        "status",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>()];
    for c in &report.cells {
        let key = match report.kind {
            super::StudyKind::Delay => c.routing_delay.to_string(),
            super::StudyKind::Start => c.start.clone(),
        };
        rows.push(vec![
            key,
            c.qualifying.to_string(),
            c.attempts.to_string(),
            opt(c.mean_iterations_to_best, 0),
            opt(c.mean_wall_ms.map(|m| m / 1000.0), 1),
            opt(c.mean_cost, digits),
            opt(c.best_cost, digits),
            if c.dnf { "DNF" } else { "ok" }.to_string(),
        ]);
    }
    rows
}

pub fn render_study_text(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} study on {} (qualifying: feasible and within {}% of {})",
        match report.kind {
            super::StudyKind::Delay => "routing delay",
            super::StudyKind::Start => "start method",
        },
        report.instance,
        report.good_run_pct,
        opt(report.bks, 2),
    );
    out.push_str(&align(&study_rows(report, false)));
    out
}

pub fn render_study_csv(report: &StudyReport) -> String {
    csv(&study_rows(report, true))
}
