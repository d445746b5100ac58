//! Results table, profit series, distribution summaries, histograms and plots.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fxdir_core::backtest::EvalReport;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::io::{self, num};
use crate::svg;

pub const HISTOGRAM_BINS: usize = 20;
pub const TABLE_HEADER: [&str; 5] = ["model", "dataset", "protocol", "Acc", "Pro"];

/// One evaluated configuration as listed in `backtest/index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestEntry {
    /// `<model>_<dataset>_<protocol>`; names the profit CSV and plots.
    pub config: String,
    pub model: String,
    /// Family tag, or `STACK(<meta tag>)`.
    pub estimator: String,
    pub dataset: String,
    pub protocol: String,
    /// Report file name inside the backtest directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestIndex {
    pub test_year: i32,
    pub entries: Vec<BacktestEntry>,
}

#[derive(Debug, Clone)]
pub struct ReportItem {
    pub entry: BacktestEntry,
    pub report: EvalReport,
}

/// Percent with one decimal, as in the results tables.
pub fn pct(x: f64) -> String {
    format!("{x:.1}")
}

fn protocol_rank(p: &str) -> usize {
    match p {
        "monthly" => 0,
        "annually" => 1,
        _ => 2,
    }
}

fn title_case(p: &str) -> String {
    let mut c = p.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

/// Items in table order: model (first appearance), dataset, monthly before annually.
fn ordered(items: &[ReportItem]) -> Vec<&ReportItem> {
    let mut first: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        first.entry(it.entry.model.as_str()).or_insert(i);
    }
    let mut out: Vec<&ReportItem> = items.iter().collect();
    out.sort_by(|a, b| {
        let key = |x: &ReportItem| {
            (first[x.entry.model.as_str()], x.entry.dataset.clone(), protocol_rank(&x.entry.protocol))
        };
        key(a).cmp(&key(b))
    });
    out
}

pub fn table_rows(items: &[ReportItem]) -> Vec<Vec<String>> {
    ordered(items)
        .into_iter()
        .map(|it| {
            vec![
                it.entry.model.clone(),
                it.entry.dataset.clone(),
                it.entry.protocol.clone(),
                pct(100.0 * it.report.accuracy),
                pct(it.report.return_pct),
            ]
        })
        .collect()
}

fn wide_table(items: &[ReportItem]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut datasets: Vec<String> = items.iter().map(|i| i.entry.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();
    let mut protocols: Vec<String> = items.iter().map(|i| i.entry.protocol.clone()).collect();
    protocols.sort_by_key(|p| (protocol_rank(p), p.clone()));
    protocols.dedup();
    let mut header = vec!["model".to_string()];
    let mut keys = Vec::new();
    for d in &datasets {
        for p in &protocols {
            for m in ["Acc", "Pro"] {
                header.push(format!("{d} {} {m}", title_case(p)));
                keys.push((d.clone(), p.clone(), m));
            }
        }
    }
    let mut rows: Vec<(String, BTreeMap<(String, String, &str), String>)> = Vec::new();
    for it in ordered(items) {
        if rows.last().is_none_or(|(m, _)| *m != it.entry.model) {
            rows.push((it.entry.model.clone(), BTreeMap::new()));
        }
        let cells = &mut rows.last_mut().expect("pushed").1;
        let (d, p) = (it.entry.dataset.clone(), it.entry.protocol.clone());
        cells.insert((d.clone(), p.clone(), "Acc"), pct(100.0 * it.report.accuracy));
        cells.insert((d, p, "Pro"), pct(it.report.return_pct));
    }
    let rows = rows
        .into_iter()
        .map(|(model, cells)| {
            let mut row = vec![model];
            row.extend(keys.iter().map(|k| cells.get(k).cloned().unwrap_or_default()));
            row
        })
        .collect();
    (header, rows)
}

struct Summary {
    count: usize,
    mean: f64,
    std: f64,
    min: f64,
    median: f64,
    max: f64,
}

fn summarize(v: &[f64]) -> Summary {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    Summary { count: n, mean, std, min: s[0], median, max: s[n - 1] }
}

/// `(grouping, group, protocol, metric) -> values`, metrics in percent.
fn distribution(items: &[ReportItem]) -> BTreeMap<(String, String, String, String), Vec<f64>> {
    let mut out: BTreeMap<_, Vec<f64>> = BTreeMap::new();
    for it in items {
        for (grouping, group) in [("dataset", &it.entry.dataset), ("estimator", &it.entry.estimator)] {
            for (metric, v) in [("Acc", 100.0 * it.report.accuracy), ("Pro", it.report.return_pct)] {
                out.entry((grouping.to_string(), group.clone(), it.entry.protocol.clone(), metric.to_string()))
                    .or_default()
                    .push(v);
            }
        }
    }
    out
}

/// Equal-width bins over the observed range; a constant sample gets one bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() {
        return vec![];
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![(lo, hi, values.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts.into_iter().enumerate().map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c)).collect()
}

fn write_svg(path: &Path, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    io::write_text(path, text)?;
    written.push(path.to_path_buf());
    Ok(())
}

/// Writes every report artifact into `dir`; returns the written paths.
pub fn emit_report(items: &[ReportItem], dir: &Path) -> Result<Vec<PathBuf>> {
    if items.is_empty() {
        return Err(AppError::Missing { what: "backtest reports".into(), command: "backtest" });
    }
    let mut written = Vec::new();

    let table = dir.join("table.csv");
    io::write_csv(&table, &TABLE_HEADER, table_rows(items))?;
    written.push(table);

    let (header, rows) = wide_table(items);
    let wide = dir.join("table_wide.csv");
    io::write_csv(&wide, &header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
    written.push(wide);

    let dist = distribution(items);
    let rows = dist.iter().map(|((grouping, group, protocol, metric), v)| {
        let s = summarize(v);
        let f = |x: f64| format!("{x:.4}");
        vec![
            grouping.clone(),
            group.clone(),
            protocol.clone(),
            metric.clone(),
            s.count.to_string(),
            f(s.mean),
            f(s.std),
            f(s.min),
            f(s.median),
            f(s.max),
        ]
    });
    let path = dir.join("distribution.csv");
    io::write_csv(
        &path,
        &["grouping", "group", "protocol", "metric", "count", "mean", "std", "min", "median", "max"],
        rows,
    )?;
    written.push(path);

    let mut hist_rows = Vec::new();
    for it in ordered(items) {
        let r = &it.report;
        let config = &it.entry.config;
        let path = dir.join(format!("profit_{config}.csv"));
        let rows = (0..r.dates.len()).map(|i| {
            vec![
                r.dates[i].to_string(),
                r.predictions[i].to_string(),
                r.labels[i].to_string(),
                num(r.curve.factors[i]),
                num(r.curve.values[i + 1]),
            ]
        });
        io::write_csv(&path, &["date", "prediction", "label", "factor", "value"], rows)?;
        written.push(path);

        let bins = histogram(&r.daily_returns, HISTOGRAM_BINS);
        for (k, &(lo, hi, c)) in bins.iter().enumerate() {
            hist_rows.push(vec![config.clone(), k.to_string(), num(lo), num(hi), c.to_string()]);
        }
        let title = format!("{config}: profit evolution ({})", r.test_year);
        let curve = svg::line_chart(&title, "trading day", "P(t)", &[(config.clone(), r.curve.values.clone())]);
        write_svg(&dir.join("plots").join(format!("profit_{config}.svg")), &curve, &mut written)?;
        let hist = svg::histogram(&format!("{config}: daily returns"), "P(t) - P(t-1)", &bins);
        write_svg(&dir.join("plots").join(format!("hist_{config}.svg")), &hist, &mut written)?;
    }
    let path = dir.join("histograms.csv");
    io::write_csv(&path, &["config", "bin", "lo", "hi", "count"], hist_rows)?;
    written.push(path);

    for grouping in ["dataset", "estimator"] {
        for (metric, label) in [("Acc", "accuracy"), ("Pro", "profit")] {
            let groups: Vec<(String, Vec<f64>)> = {
                let mut g: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for ((gr, group, _, m), v) in &dist {
                    if gr == grouping && m == metric {
                        g.entry(group.clone()).or_default().extend(v);
                    }
                }
                g.into_iter().collect()
            };
            let title = format!("{label} by {grouping}");
            let chart = svg::strip_chart(&title, &format!("{metric} (%)"), &groups);
            write_svg(&dir.join("plots").join(format!("{label}_by_{grouping}.svg")), &chart, &mut written)?;
        }
    }
    Ok(written)
}
