use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::LabeledScore;
use crate::sor::{BoostedModel, FeatureRow, SorTable};

/// Column prefix that marks a categorical feature in a feature file.
pub const CATEGORICAL_PREFIX: &str = "cat:";

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    reader(path)?
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| Error::csv(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_records<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub ngrid_id: String,
    pub hour: usize,
    pub load_kw: f64,
    pub pv_kw: f64,
}

/// Hourly base load and PV per n-grid.
pub type Profiles = HashMap<String, (Vec<f64>, Vec<f64>)>;

/// Reads `ngrid_id,hour,load_kw,pv_kw` rows; every n-grid must cover `0..horizon`.
pub fn read_profiles(path: &Path, horizon: usize) -> Result<Profiles> {
    let mut out: Profiles = HashMap::new();
    for row in read_records::<ProfileRow>(path)? {
        if row.hour >= horizon {
            return Err(Error::parse(
                path,
                format!(
                    "n-grid `{}` hour {} beyond horizon {horizon}",
                    row.ngrid_id, row.hour
                ),
            ));
        }
        let (load, pv) = out
            .entry(row.ngrid_id.clone())
            .or_insert_with(|| (vec![f64::NAN; horizon], vec![f64::NAN; horizon]));
        if !load[row.hour].is_nan() {
            return Err(Error::parse(
                path,
                format!(
                    "duplicate row for n-grid `{}` hour {}",
                    row.ngrid_id, row.hour
                ),
            ));
        }
        load[row.hour] = row.load_kw;
        pv[row.hour] = row.pv_kw;
    }
    for (id, (load, _)) in &out {
        if let Some(hour) = load.iter().position(|v| v.is_nan()) {
            return Err(Error::parse(
                path,
                format!("n-grid `{id}` has no row for hour {hour}"),
            ));
        }
    }
    Ok(out)
}

pub fn write_profiles(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    write_records(path, rows)
}

#[derive(Serialize, Deserialize)]
struct SorRow {
    feeder_id: String,
    hour: usize,
    probability: f64,
}

/// Reads `feeder_id,hour,probability` rows covering `feeders` x `0..horizon`.
pub fn read_sor(path: &Path, feeders: &[String], horizon: usize) -> Result<SorTable> {
    let rows = read_records::<SorRow>(path)?;
    Ok(SorTable::from_entries(
        rows.into_iter()
            .map(|r| (r.feeder_id, r.hour, r.probability)),
        feeders,
        horizon,
    )?)
}

pub fn write_sor(path: &Path, table: &SorTable) -> Result<()> {
    write_records(
        path,
        table.entries().map(|(f, h, p)| SorRow {
            feeder_id: f.to_string(),
            hour: h,
            probability: p,
        }),
    )
}

#[derive(Serialize, Deserialize)]
pub(crate) struct DerateRow {
    pub feeder_id: String,
    pub hour: usize,
    pub factor: f64,
}

/// Reads `feeder_id,hour,factor` rows as raw entries.
pub fn read_derate(path: &Path) -> Result<Vec<(String, usize, f64)>> {
    Ok(read_records::<DerateRow>(path)?
        .into_iter()
        .map(|r| (r.feeder_id, r.hour, r.factor))
        .collect())
}

pub fn write_derate<'a>(
    path: &Path,
    entries: impl IntoIterator<Item = (&'a str, usize, f64)>,
) -> Result<()> {
    write_records(
        path,
        entries.into_iter().map(|(f, h, factor)| DerateRow {
            feeder_id: f.to_string(),
            hour: h,
            factor,
        }),
    )
}

#[derive(Deserialize)]
struct ScoreRow {
    label: i64,
    score: f64,
}

/// Reads a `label,score` file.
pub fn read_scores(path: &Path) -> Result<Vec<LabeledScore>> {
    read_records::<ScoreRow>(path)?
        .into_iter()
        .map(|r| LabeledScore::from_int(r.label, r.score).map_err(Error::from))
        .collect()
}

/// Reads a feature file: `feeder_id`, `hour`, an optional `label` column
/// (blank cells allowed), and feature columns. Columns named `cat:<name>`
/// are categorical; the rest must parse as numbers. Blank feature cells
/// are left missing.
pub fn read_feature_rows(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let feeder_col =
        column("feeder_id").ok_or_else(|| Error::parse(path, "missing `feeder_id` column"))?;
    let hour_col = column("hour").ok_or_else(|| Error::parse(path, "missing `hour` column"))?;
    let label_col = column("label");

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        let hour = record[hour_col].parse::<usize>().map_err(|_| {
            Error::parse(
                path,
                format!("line {line}: bad hour `{}`", &record[hour_col]),
            )
        })?;
        let mut row = FeatureRow::new(&record[feeder_col], hour);
        if let Some(c) = label_col {
            row.label = match &record[c] {
                "" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => {
                    return Err(Error::parse(
                        path,
                        format!("line {line}: label `{other}` is not 0 or 1"),
                    ))
                }
            };
        }
        for (c, name) in headers.iter().enumerate() {
            if c == feeder_col || c == hour_col || Some(c) == label_col || record[c].is_empty() {
                continue;
            }
            if let Some(cat) = name.strip_prefix(CATEGORICAL_PREFIX) {
                row = row.categorical(cat, &record[c]);
            } else {
                let value = record[c].parse::<f64>().map_err(|_| {
                    Error::parse(
                        path,
                        format!(
                            "line {line}: feature `{name}` value `{}` is not a number",
                            &record[c]
                        ),
                    )
                })?;
                row = row.numeric(name, value);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_model(path: &Path) -> Result<BoostedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BoostedModel::from_json(&text).map_err(|e| Error::parse(path, e))
}

pub fn save_model(path: &Path, model: &BoostedModel) -> Result<()> {
    std::fs::write(path, model.to_json()).map_err(|e| Error::io(path, e))
}
