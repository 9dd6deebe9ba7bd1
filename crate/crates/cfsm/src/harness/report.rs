//! CSV output for experiment results and the FO cost report derived from it.
//!
//! The CSV layout is one row per (method, stage) with methods in canonical
//! order and fixed float formatting, so the same experiment always produces
//! byte-identical files (provided timing is off, which it is by default).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::experiment::ExperimentOutcome;

pub const CSV_HEADER: &[&str] =
    &["stage", "method", "gap_mean", "gap_std", "cum_fos_mean", "wall_ms_mean"];

pub fn write_csv<W: Write>(out: W, outcome: &ExperimentOutcome) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for method in &outcome.methods {
        for row in &method.rows {
            writer.write_record(&[
                row.stage.to_string(),
                method.method.clone(),
                format!("{:.9e}", row.gap_mean),
                format!("{:.9e}", row.gap_std),
                format!("{:.1}", row.cum_fos_mean),
                format!("{:.3}", row.wall_ms_mean),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv_file(path: impl AsRef<Path>, outcome: &ExperimentOutcome) -> Result<()> {
    write_csv(std::fs::File::create(path)?, outcome)
}

/// Final cumulative FO cost per method plus all pairwise ratios, extracted
/// from a results CSV.
#[derive(Clone, Debug)]
pub struct FoReport {
    /// `(method, final cum_fos_mean)` in the file's method order.
    pub totals: Vec<(String, f64)>,
    /// `("a/b", total_a / total_b)` for every ordered method pair `a` before
    /// `b`; empty when the file holds a single method.
    pub ratios: Vec<(String, f64)>,
}

pub fn fo_report_from_reader<R: Read>(input: R) -> Result<FoReport> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::invalid_input(format!(
            "unexpected CSV header '{}'; this is not a results file",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut finals: Vec<(usize, f64)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        let parse_err = |what: &str| Error::Parse {
            line,
            reason: format!("bad {what} field in results CSV"),
        };
        let stage: usize = record[0].parse().map_err(|_| parse_err("stage"))?;
        let method = record[1].to_string();
        let cum: f64 = record[4].parse().map_err(|_| parse_err("cum_fos_mean"))?;
        match order.iter().position(|m| *m == method) {
            Some(pos) => {
                if stage >= finals[pos].0 {
                    finals[pos] = (stage, cum);
                }
            }
            None => {
                order.push(method);
                finals.push((stage, cum));
            }
        }
    }
    if order.is_empty() {
        return Err(Error::invalid_input("results CSV holds no data rows"));
    }
    let totals: Vec<(String, f64)> =
        order.into_iter().zip(finals.iter().map(|f| f.1)).collect();
    let mut ratios = Vec::new();
    for a in 0..totals.len() {
        for b in (a + 1)..totals.len() {
            ratios.push((
                format!("{}/{}", totals[a].0, totals[b].0),
                totals[a].1 / totals[b].1,
            ));
        }
    }
    Ok(FoReport { totals, ratios })
}

pub fn fo_report_from_path(path: impl AsRef<Path>) -> Result<FoReport> {
    fo_report_from_reader(std::fs::File::open(path)?)
}

impl FoReport {
    pub fn render(&self) -> String {
        let mut out = String::from("method,total_fos\n");
        for (method, total) in &self.totals {
            out.push_str(&format!("{method},{total:.1}\n"));
        }
        if !self.ratios.is_empty() {
            out.push_str("\npair,fo_ratio\n");
            for (pair, ratio) in &self.ratios {
                out.push_str(&format!("{pair},{ratio:.6}\n"));
            }
        }
        out
    }
}
