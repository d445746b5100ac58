//! CSV and JSON readers/writers for every file the tool exchanges.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use fxdir_core::calendar::{parse_date, TradingDate};
use fxdir_core::error::Error as CoreError;
use fxdir_core::features::{DropReason, FeatureMatrix, Representation, TransformLedger};
use fxdir_core::marketdata::{
    AlignedPanel, ColumnKind, EconomicCalendar, EconomicRelease, OhlcvBar, OhlcvSeries, PanelColumn,
};
use fxdir_core::matrix::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

pub const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
pub const CALENDAR_HEADER: [&str; 2] = ["date", "value"];

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a JSON artifact; a missing file names the command that writes it.
pub fn read_json<T: DeserializeOwned>(path: &Path, producer: &'static str) -> Result<T> {
    if !path.exists() {
        return Err(AppError::Missing { what: path.display().to_string(), command: producer });
    }
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| AppError::data(path, CoreError::Parse { line: e.line(), message: e.to_string() }))
}

/// Writes rows of already formatted cells.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let file = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| AppError::Runtime(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> AppError {
    AppError::data(path, CoreError::Parse { line, message: message.into() })
}

struct Table {
    header: Vec<String>,
    /// `(line, cells)`
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(std::io::BufReader::new(file));
    let header = rdr
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn expect_header(path: &Path, t: &Table, want: &[&str]) -> Result<()> {
    if t.header.iter().map(String::as_str).ne(want.iter().copied()) {
        return Err(parse_error(path, 1, format!("header must be `{}`, found `{}`", want.join(","), t.header.join(","))));
    }
    Ok(())
}

fn cell<'a>(path: &Path, line: usize, row: &'a [String], k: usize, name: &str) -> Result<&'a str> {
    row.get(k).map(|s| s.trim()).ok_or_else(|| parse_error(path, line, format!("missing field `{name}`")))
}

fn date_cell(path: &Path, line: usize, row: &[String], k: usize, name: &str) -> Result<TradingDate> {
    let s = cell(path, line, row, k, name)?;
    parse_date(s).ok_or_else(|| parse_error(path, line, format!("`{name}`: `{s}` is not a YYYY-MM-DD date")))
}

fn num_cell(path: &Path, line: usize, row: &[String], k: usize, name: &str) -> Result<f64> {
    let s = cell(path, line, row, k, name)?;
    s.parse::<f64>().map_err(|_| parse_error(path, line, format!("`{name}`: `{s}` is not a number")))
}

fn check_width(path: &Path, line: usize, row: &[String], width: usize) -> Result<()> {
    if row.len() > width {
        return Err(parse_error(path, line, format!("expected {width} fields, found {}", row.len())));
    }
    Ok(())
}

pub fn read_ohlcv(path: &Path, instrument_id: &str) -> Result<OhlcvSeries> {
    let t = read_table(path)?;
    expect_header(path, &t, &OHLCV_HEADER)?;
    let mut bars = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        check_width(path, *line, row, 6)?;
        bars.push(OhlcvBar {
            date: date_cell(path, *line, row, 0, "date")?,
            open: num_cell(path, *line, row, 1, "open")?,
            high: num_cell(path, *line, row, 2, "high")?,
            low: num_cell(path, *line, row, 3, "low")?,
            close: num_cell(path, *line, row, 4, "close")?,
            volume: num_cell(path, *line, row, 5, "volume")?,
        });
    }
    OhlcvSeries::new(instrument_id, bars).map_err(|e| AppError::data(path, e))
}

pub fn write_ohlcv(path: &Path, s: &OhlcvSeries) -> Result<()> {
    let rows = s.bars.iter().map(|b| {
        vec![b.date.to_string(), num(b.open), num(b.high), num(b.low), num(b.close), num(b.volume)]
    });
    write_csv(path, &OHLCV_HEADER, rows)
}

pub fn read_calendar(path: &Path, indicator_id: &str) -> Result<EconomicCalendar> {
    let t = read_table(path)?;
    expect_header(path, &t, &CALENDAR_HEADER)?;
    let mut releases = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        check_width(path, *line, row, 2)?;
        releases.push(EconomicRelease {
            release_date: date_cell(path, *line, row, 0, "date")?,
            value: num_cell(path, *line, row, 1, "value")?,
        });
    }
    EconomicCalendar::new(indicator_id, releases).map_err(|e| AppError::data(path, e))
}

pub fn write_calendar(path: &Path, c: &EconomicCalendar) -> Result<()> {
    write_csv(path, &CALENDAR_HEADER, c.releases.iter().map(|r| vec![r.release_date.to_string(), num(r.value)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub category: String,
    pub kind: ColumnKind,
}

/// Everything about a panel that does not fit the wide CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub target: String,
    pub columns: Vec<ColumnMeta>,
    pub target_next_close: Vec<Option<f64>>,
    pub excluded_dates: Vec<TradingDate>,
}

/// `panel.csv` plus its `panel.json` sidecar.
pub fn write_panel(dir: &Path, p: &AlignedPanel) -> Result<()> {
    let mut header = vec!["date"];
    header.extend(p.columns.iter().map(|c| c.name.as_str()));
    header.push("pre_closure");
    let rows = (0..p.len()).map(|t| {
        let mut row = Vec::with_capacity(p.columns.len() + 2);
        row.push(p.dates[t].to_string());
        row.extend(p.columns.iter().map(|c| num(c.values[t])));
        row.push(u8::from(p.pre_closure[t]).to_string());
        row
    });
    write_csv(&dir.join("panel.csv"), &header, rows)?;
    let meta = PanelMeta {
        target: p.target.clone(),
        columns: p
            .columns
            .iter()
            .map(|c| ColumnMeta { name: c.name.clone(), category: c.category.clone(), kind: c.kind })
            .collect(),
        target_next_close: p.target_next_close.clone(),
        excluded_dates: p.excluded_dates.clone(),
    };
    write_json(&dir.join("panel.json"), &meta)
}

pub fn read_panel(dir: &Path) -> Result<AlignedPanel> {
    let meta: PanelMeta = read_json(&dir.join("panel.json"), "ingest")?;
    let path = dir.join("panel.csv");
    if !path.exists() {
        return Err(AppError::Missing { what: path.display().to_string(), command: "ingest" });
    }
    let t = read_table(&path)?;
    let mut want = vec!["date"];
    want.extend(meta.columns.iter().map(|c| c.name.as_str()));
    want.push("pre_closure");
    expect_header(&path, &t, &want)?;
    let n = t.rows.len();
    let mut dates = Vec::with_capacity(n);
    let mut pre_closure = Vec::with_capacity(n);
    let mut values = vec![Vec::with_capacity(n); meta.columns.len()];
    for (line, row) in &t.rows {
        check_width(&path, *line, row, want.len())?;
        dates.push(date_cell(&path, *line, row, 0, "date")?);
        for (j, c) in meta.columns.iter().enumerate() {
            values[j].push(num_cell(&path, *line, row, j + 1, &c.name)?);
        }
        let flag = cell(&path, *line, row, want.len() - 1, "pre_closure")?;
        pre_closure.push(match flag {
            "0" => false,
            "1" => true,
            _ => return Err(parse_error(&path, *line, "`pre_closure` must be 0 or 1")),
        });
    }
    if meta.target_next_close.len() != n {
        return Err(AppError::data(&path, CoreError::Validation("panel sidecar does not match the CSV".into())));
    }
    let columns = meta
        .columns
        .into_iter()
        .zip(values)
        .map(|(c, values)| PanelColumn { name: c.name, category: c.category, kind: c.kind, values })
        .collect();
    let panel = AlignedPanel {
        target: meta.target,
        dates,
        columns,
        pre_closure,
        target_next_close: meta.target_next_close,
        excluded_dates: meta.excluded_dates,
    };
    panel.validate().map_err(|e| AppError::data(&path, e))?;
    Ok(panel)
}

/// Sidecar of a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub representation: Representation,
    /// `(name, category)` in column order.
    pub columns: Vec<(String, String)>,
    pub transforms: TransformLedger,
    pub close: Vec<f64>,
    pub next_close: Vec<f64>,
    pub dropped: Vec<(TradingDate, DropReason)>,
}

pub fn dataset_stem(repr: Representation) -> String {
    repr.tag().to_string()
}

/// `<D>.csv` (date, features, label) plus the `<D>.json` sidecar.
pub fn write_dataset(dir: &Path, d: &FeatureMatrix, ledger: &TransformLedger) -> Result<()> {
    let stem = dataset_stem(d.representation);
    let mut header = vec!["date"];
    header.extend(d.names.iter().map(String::as_str));
    header.push("label");
    let rows = (0..d.nrows()).map(|i| {
        let mut row = Vec::with_capacity(d.ncols() + 2);
        row.push(d.dates[i].to_string());
        row.extend(d.x.row(i).iter().map(|&v| num(v)));
        row.push(d.labels[i].to_string());
        row
    });
    write_csv(&dir.join(format!("{stem}.csv")), &header, rows)?;
    let meta = DatasetMeta {
        representation: d.representation,
        columns: d.names.iter().cloned().zip(d.categories.iter().cloned()).collect(),
        transforms: ledger.clone(),
        close: d.close.clone(),
        next_close: d.next_close.clone(),
        dropped: d.dropped.clone(),
    };
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

pub fn read_dataset(dir: &Path, repr: Representation) -> Result<FeatureMatrix> {
    let stem = dataset_stem(repr);
    let meta: DatasetMeta = read_json(&dir.join(format!("{stem}.json")), "build")?;
    let path = dir.join(format!("{stem}.csv"));
    if !path.exists() {
        return Err(AppError::Missing { what: path.display().to_string(), command: "build" });
    }
    let t = read_table(&path)?;
    let mut want = vec!["date"];
    want.extend(meta.columns.iter().map(|(n, _)| n.as_str()));
    want.push("label");
    expect_header(&path, &t, &want)?;
    let p = meta.columns.len();
    let n = t.rows.len();
    let mut dates = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * p);
    for (line, row) in &t.rows {
        check_width(&path, *line, row, p + 2)?;
        dates.push(date_cell(&path, *line, row, 0, "date")?);
        for (j, (name, _)) in meta.columns.iter().enumerate() {
            data.push(num_cell(&path, *line, row, j + 1, name)?);
        }
        labels.push(match cell(&path, *line, row, p + 1, "label")? {
            "0" => 0,
            "1" => 1,
            _ => return Err(parse_error(&path, *line, "`label` must be 0 or 1")),
        });
    }
    if meta.close.len() != n || meta.next_close.len() != n {
        return Err(AppError::data(&path, CoreError::Validation("dataset sidecar does not match the CSV".into())));
    }
    let x = Matrix::from_vec(n, p, data).map_err(|e| AppError::data(&path, e))?;
    let (names, categories) = meta.columns.into_iter().unzip();
    Ok(FeatureMatrix {
        representation: meta.representation,
        dates,
        names,
        categories,
        x,
        labels,
        close: meta.close,
        next_close: meta.next_close,
        dropped: meta.dropped,
    })
}
