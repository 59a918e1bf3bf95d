//! Plain-text tables, per-cell records and plot data.
//!
//! Each table has temperature rows grouped by model and one column per
//! decoding strategy, mirroring the usual SR and TC/SR result tables.
//! Undefined cells (TC/SR with no solved puzzle) print as "–".

use gameofn_core::eval::{sr_gap, CellResult, EvalReport, GapRow, TRAINED, UNTRAINED};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sr,
    TcPerSr,
    TcPerSrMeanOfRatios,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Sr, Metric::TcPerSr, Metric::TcPerSrMeanOfRatios];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sr => "SR",
            Metric::TcPerSr => "TC/SR",
            Metric::TcPerSrMeanOfRatios => "TC/SR (mean of per-puzzle ratios)",
        }
    }

    pub fn value(self, cell: &CellResult) -> Option<f64> {
        match self {
            Metric::Sr => Some(cell.mean_sr),
            Metric::TcPerSr => cell.tc_per_sr,
            Metric::TcPerSrMeanOfRatios => cell.tc_per_sr_mean_of_ratios,
        }
    }
}

pub const UNDEFINED: &str = "–";

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.2}"))
}

/// Left-aligns the first `left` columns and right-aligns the rest.
fn aligned(rows: &[Vec<String>], left: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let pad = widths[c] - cell.chars().count();
            if c < left {
                line.push_str(cell);
                line.extend(std::iter::repeat_n(' ', pad));
            } else {
                line.extend(std::iter::repeat_n(' ', pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

/// Strategy labels and temperatures in order of first appearance.
fn axes(report: &EvalReport) -> (Vec<String>, Vec<f64>) {
    let (mut labels, mut temps) = (Vec::new(), Vec::new());
    for cell in report.blocks.iter().flat_map(|b| &b.cells) {
        push_unique(&mut labels, cell.label.clone());
        push_unique(&mut temps, cell.temperature);
    }
    (labels, temps)
}

fn splits(report: &EvalReport) -> Vec<String> {
    let mut out = Vec::new();
    for b in &report.blocks {
        push_unique(&mut out, b.split.clone());
    }
    out
}

pub fn render_table(report: &EvalReport, split: &str, metric: Metric) -> String {
    let (labels, temps) = axes(report);
    let puzzles = report
        .blocks
        .iter()
        .find(|b| b.split == split)
        .and_then(|b| b.cells.first())
        .map_or(0, |c| c.puzzles);
    let mut rows = vec![{
        let mut h = vec!["Model".to_string(), "Temp".to_string()];
        h.extend(labels.iter().cloned());
        h
    }];
    for model in [UNTRAINED, TRAINED] {
        let Some(block) = report.block(model, split) else { continue };
        for (i, &t) in temps.iter().enumerate() {
            let mut row = vec![if i == 0 { model.to_string() } else { String::new() }, format!("{t}")];
            for label in &labels {
                let cell = block.cells.iter().find(|c| c.temperature == t && &c.label == label);
                row.push(cell.map_or(String::new(), |c| fmt(metric.value(c))));
            }
            rows.push(row);
        }
    }
    format!(
        "{} on Game of {}, {} ({} puzzles, {} attempts each)\n{}",
        metric.name(),
        report.target,
        split,
        puzzles,
        report.attempts,
        aligned(&rows, 1)
    )
}

pub fn render_gap_table(rows: &[GapRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let (s, t) = (first.source_target, first.transfer_target);
    let mut table = vec![vec![
        "Model".to_string(),
        "Split".to_string(),
        "Temp".to_string(),
        "Strategy".to_string(),
        format!("SR@{s}"),
        format!("SR@{t}"),
        "Gap".to_string(),
    ]];
    for r in rows {
        table.push(vec![
            r.model.clone(),
            r.split.clone(),
            format!("{}", r.temperature),
            r.label.clone(),
            format!("{:.2}", r.sr_source),
            format!("{:.2}", r.sr_transfer),
            format!("{:+.2}", r.sr_gap),
        ]);
    }
    format!("SR gap, Game of {t} minus Game of {s}\n{}", aligned(&table, 4))
}

/// The full text report: every split and metric per target, then the gap
/// tables against the source report.
pub fn render_report(reports: &[EvalReport], source_target: i64) -> String {
    let mut out = String::new();
    if let Some(first) = reports.first() {
        out.push_str(&format!(
            "config {}  seed {}  checkpoint {}\n\n",
            first.meta.config_hash, first.meta.seed, first.meta.checkpoint_hash
        ));
    }
    for report in reports {
        out.push_str(&format!("== Game of {} (dataset {}) ==\n\n", report.target, report.meta.dataset_hash));
        for split in splits(report) {
            for metric in Metric::ALL {
                out.push_str(&render_table(report, &split, metric));
                out.push('\n');
            }
        }
    }
    for gap in gap_rows(reports, source_target) {
        out.push_str(&render_gap_table(&gap));
        out.push('\n');
    }
    out
}

/// Gap rows of every other report against the source-target report.
pub fn gap_rows(reports: &[EvalReport], source_target: i64) -> Vec<Vec<GapRow>> {
    let Some(source) = reports.iter().find(|r| r.target == source_target) else {
        return Vec::new();
    };
    reports
        .iter()
        .filter(|r| r.target != source_target)
        .map(|r| sr_gap(source, r))
        .collect()
}

#[derive(Serialize)]
struct CellRecord<'a> {
    config_hash: &'a str,
    target: i64,
    model: &'a str,
    split: &'a str,
    #[serde(flatten)]
    cell: &'a CellResult,
}

/// One JSON line per (target, model, split, grid cell).
pub fn cell_records(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in reports {
        for b in &r.blocks {
            for cell in &b.cells {
                let rec = CellRecord {
                    config_hash: &r.meta.config_hash,
                    target: r.target,
                    model: &b.model,
                    split: &b.split,
                    cell,
                };
                out.push_str(&serde_json::to_string(&rec).expect("serializable record"));
                out.push('\n');
            }
        }
    }
    out
}

#[derive(Serialize)]
struct GapRecord<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    row: &'a GapRow,
}

pub fn gap_records(reports: &[EvalReport], source_target: i64) -> String {
    let hash = reports.first().map_or("", |r| r.meta.config_hash.as_str());
    let mut out = String::new();
    for row in gap_rows(reports, source_target).iter().flatten() {
        out.push_str(&serde_json::to_string(&GapRecord { config_hash: hash, row }).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Temperature against SR for strategy `label` on `split`: one column per
/// (target, model), untrained before trained. With the 24 and 42 reports
/// this gives four series.
pub fn plot_csv(reports: &[EvalReport], split: &str, label: &str) -> anyhow::Result<String> {
    let mut temps = Vec::new();
    let mut series = Vec::new();
    for r in reports {
        for model in [UNTRAINED, TRAINED] {
            if let Some(b) = r.block(model, split) {
                for c in b.cells.iter().filter(|c| c.label == label) {
                    push_unique(&mut temps, c.temperature);
                }
                series.push((format!("sr_{}_{}", r.target, model), b));
            }
        }
    }
    let hash = reports.first().map_or("", |r| r.meta.config_hash.as_str());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["temperature".to_string()];
    header.extend(series.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for t in temps {
        let mut row = vec![format!("{t}")];
        for (_, b) in &series {
            let cell = b.cells.iter().find(|c| c.label == label && c.temperature == t);
            row.push(cell.map_or(String::new(), |c| format!("{}", c.mean_sr)));
        }
        w.write_record(&row)?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    Ok(format!("# config_hash={hash} split={split} strategy={label}\n{body}"))
}
