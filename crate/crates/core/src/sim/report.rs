use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::SimulationReport;
use super::sweep::SweepRow;
use crate::error::{Error, Result};

pub const FLEET_SERIES_HEADER: &str =
    "hour,load_kw,pv_kw,ens_kw,spilled_kw,ru_total_kw,ru_avail_kw,rd_total_kw,rd_avail_kw";
pub const SUMMARY_HEADER: &str = "total_ens_mwh,total_spilled_mwh,max_ru_total_kw";
pub const OUTAGES_HEADER: &str = "replication,feeder_id,start_hour,duration_hours";
pub const SWEEP_HEADER: &str = "repair_hours,total_ens_mwh,total_spilled_mwh";
pub const REPLICATIONS_HEADER: &str = "replication,total_ens_mwh,total_spilled_mwh";

#[derive(Serialize)]
struct SummaryRow {
    total_ens_mwh: f64,
    total_spilled_mwh: f64,
    max_ru_total_kw: f64,
}

#[derive(Serialize)]
struct OutageRow<'a> {
    replication: usize,
    feeder_id: &'a str,
    start_hour: usize,
    duration_hours: usize,
}

#[derive(Serialize)]
struct ReplicationRow {
    replication: usize,
    total_ens_mwh: f64,
    total_spilled_mwh: f64,
}

fn write_rows<T: Serialize>(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    writer
        .write_record(header.split(','))
        .map_err(|e| Error::csv(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes the run's CSV outputs into `out_dir` and returns their paths.
/// `sweep.csv` is only written for a non-empty sweep.
pub fn emit_report(
    report: &SimulationReport,
    sweep: &[SweepRow],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let path = out_dir.join("fleet_series.csv");
    write_rows(&path, FLEET_SERIES_HEADER, &report.mean.hours)?;
    written.push(path);

    let path = out_dir.join("summary.csv");
    write_rows(
        &path,
        SUMMARY_HEADER,
        [SummaryRow {
            total_ens_mwh: report.total_ens_mwh,
            total_spilled_mwh: report.total_spilled_mwh,
            max_ru_total_kw: report.max_ru_total_kw,
        }],
    )?;
    written.push(path);

    let path = out_dir.join("outages.csv");
    let outages = report.replications.iter().flat_map(|r| {
        r.outages.iter().map(move |e| OutageRow {
            replication: r.index,
            feeder_id: &e.feeder_id,
            start_hour: e.start_hour,
            duration_hours: e.duration_hours,
        })
    });
    write_rows(&path, OUTAGES_HEADER, outages)?;
    written.push(path);

    let path = out_dir.join("replications.csv");
    let totals = report.replications.iter().map(|r| ReplicationRow {
        replication: r.index,
        total_ens_mwh: r.series.total_ens_mwh(),
        total_spilled_mwh: r.series.total_spilled_mwh(),
    });
    write_rows(&path, REPLICATIONS_HEADER, totals)?;
    written.push(path);

    if !sweep.is_empty() {
        let path = out_dir.join("sweep.csv");
        write_rows(&path, SWEEP_HEADER, sweep)?;
        written.push(path);
    }
    Ok(written)
}
