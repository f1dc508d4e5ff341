//! Delimited-text readers and writers. Every reader reports malformed input
//! with the file path and the 1-based line number of the offending record.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rebias_core::gwas::GwasRecord;
use rebias_core::ppi::PpiTask;
use rebias_core::{Prior, TaskSummary};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Shortest decimal form that parses back to the same `f64`. Very small or
/// very large magnitudes switch to exponent notation.
pub fn fmt_exact(x: f64) -> String {
    let mag = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&mag) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Six significant digits, fixed notation for moderate magnitudes.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..15).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

pub struct Table {
    path: PathBuf,
    reader: csv::Reader<File>,
    index: HashMap<String, usize>,
}

pub struct Row {
    pub line: u64,
    record: csv::StringRecord,
}

impl Table {
    pub fn open(path: &Path, delimiter: u8) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            index,
        })
    }

    /// Column positions of `names`, failing on the first one absent.
    pub fn require(&self, names: &[&str]) -> CliResult<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index.get(*n).copied().ok_or_else(|| {
                    CliError::bad_input(&self.path, format!("missing required column `{n}`"))
                })
            })
            .collect()
    }

    pub fn rows(&mut self) -> impl Iterator<Item = CliResult<Row>> + '_ {
        let path = self.path.clone();
        self.reader.records().map(move |r| {
            let record = r.map_err(|e| csv_error(&path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            Ok(Row { line, record })
        })
    }
}

impl Row {
    pub fn text(&self, col: usize) -> &str {
        self.record.get(col).unwrap_or("")
    }

    pub fn number(&self, path: &Path, col: usize, name: &str) -> CliResult<f64> {
        let raw = self.text(col);
        raw.parse::<f64>().map_err(|_| {
            CliError::parse(
                path,
                self.line,
                format!("column `{name}`: `{raw}` is not a number"),
            )
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match (e.into_kind(), line) {
        (csv::ErrorKind::Io(io), _) => CliError::io(path, io),
        (kind, Some(line)) => CliError::parse(path, line, describe(&kind)),
        (kind, None) => CliError::bad_input(path, describe(&kind)),
    }
}

fn describe(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        other => format!("{other:?}"),
    }
}

fn in_row<T>(path: &Path, line: u64, r: rebias_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::parse(path, line, e.to_string()))
}

/// `(id, b_hat, tau)` rows for prior fitting.
pub struct BiasTable {
    pub ids: Vec<String>,
    pub b_hats: Vec<f64>,
    pub taus: Vec<f64>,
}

pub fn read_bias_table(path: &Path) -> CliResult<BiasTable> {
    let mut table = Table::open(path, b',')?;
    let cols = table.require(&["id", "b_hat", "tau"])?;
    let mut out = BiasTable {
        ids: Vec::new(),
        b_hats: Vec::new(),
        taus: Vec::new(),
    };
    for row in table.rows() {
        let row = row?;
        let b = row.number(path, cols[1], "b_hat")?;
        let t = row.number(path, cols[2], "tau")?;
        if !b.is_finite() {
            return Err(CliError::parse(path, row.line, "b_hat must be finite"));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::parse(
                path,
                row.line,
                "tau must be positive and finite",
            ));
        }
        out.ids.push(row.text(cols[0]).to_string());
        out.b_hats.push(b);
        out.taus.push(t);
    }
    if out.ids.is_empty() {
        return Err(CliError::bad_input(path, "no data rows"));
    }
    Ok(out)
}

pub const TASK_COLUMNS: [&str; 6] = ["id", "theta_b_hat", "b_hat", "sigma", "tau", "rho"];

pub fn read_tasks(path: &Path) -> CliResult<Vec<TaskSummary>> {
    let mut table = Table::open(path, b',')?;
    let cols = table.require(&TASK_COLUMNS)?;
    let mut tasks = Vec::new();
    for row in table.rows() {
        let row = row?;
        let mut x = [0.0; 5];
        for (k, v) in x.iter_mut().enumerate() {
            *v = row.number(path, cols[k + 1], TASK_COLUMNS[k + 1])?;
        }
        let id = row.text(cols[0]).to_string();
        tasks.push(in_row(
            path,
            row.line,
            TaskSummary::new(id, x[0], x[1], x[2], x[3], x[4]),
        )?);
    }
    if tasks.is_empty() {
        return Err(CliError::bad_input(path, "no data rows"));
    }
    Ok(tasks)
}

/// Long-format prediction data: one row per labeled pair or unlabeled
/// prediction. Tasks keep the order of their first appearance.
pub fn read_ppi(path: &Path) -> CliResult<Vec<PpiTask>> {
    let mut table = Table::open(path, b',')?;
    let cols = table.require(&["task_id", "split", "y", "pred"])?;
    let mut tasks: Vec<PpiTask> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for row in table.rows() {
        let row = row?;
        let id = row.text(cols[0]);
        if id.is_empty() {
            return Err(CliError::parse(path, row.line, "empty task_id"));
        }
        let pred = row.number(path, cols[3], "pred")?;
        if !pred.is_finite() {
            return Err(CliError::parse(path, row.line, "pred must be finite"));
        }
        let k = *slot.entry(id.to_string()).or_insert_with(|| {
            tasks.push(PpiTask {
                id: id.to_string(),
                ..Default::default()
            });
            tasks.len() - 1
        });
        let task = &mut tasks[k];
        match row.text(cols[1]) {
            "labeled" => {
                let y = row.number(path, cols[2], "y")?;
                if !y.is_finite() {
                    return Err(CliError::parse(path, row.line, "y must be finite"));
                }
                task.labeled_y.push(y);
                task.labeled_pred.push(pred);
            }
            "unlabeled" => task.unlabeled_pred.push(pred),
            other => {
                return Err(CliError::parse(
                    path,
                    row.line,
                    format!("split must be `labeled` or `unlabeled`, found `{other}`"),
                ))
            }
        }
    }
    if tasks.is_empty() {
        return Err(CliError::bad_input(path, "no data rows"));
    }
    Ok(tasks)
}

pub const GWAS_COLUMNS: [&str; 6] = [
    "snp_id",
    "beta_direct",
    "beta_parental",
    "se_direct",
    "se_parental",
    "corr",
];

/// Tab-separated family-GWAS summary statistics with the source line of
/// each record.
pub fn read_gwas(path: &Path) -> CliResult<Vec<(u64, GwasRecord)>> {
    let mut table = Table::open(path, b'\t')?;
    let cols = table.require(&GWAS_COLUMNS)?;
    let mut out = Vec::new();
    for row in table.rows() {
        let row = row?;
        let mut x = [0.0; 5];
        for (k, v) in x.iter_mut().enumerate() {
            *v = row.number(path, cols[k + 1], GWAS_COLUMNS[k + 1])?;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CliError::parse(path, row.line, "values must be finite"));
        }
        if !(x[2] > 0.0 && x[3] > 0.0) {
            return Err(CliError::parse(
                path,
                row.line,
                "standard errors must be positive",
            ));
        }
        if x[4].abs() > 1.0 {
            return Err(CliError::parse(path, row.line, "corr must lie in [-1, 1]"));
        }
        let rec = GwasRecord {
            snp_id: row.text(cols[0]).to_string(),
            theta_ub_hat: x[0],
            b_hat: x[1],
            sigma_tilde: x[2],
            tau: x[3],
            gamma: x[4],
        };
        out.push((row.line, rec));
    }
    if out.is_empty() {
        return Err(CliError::bad_input(path, "no data rows"));
    }
    Ok(out)
}

pub fn read_prior(path: &Path) -> CliResult<Prior> {
    let invalid = |message: String| CliError::InvalidPrior {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))
}

/// CSV writer with `\n` record terminators.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        let mut out = Self {
            path: path.to_path_buf(),
            writer,
        };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::io(&self.path, e.into()))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
