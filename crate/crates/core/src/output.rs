//! CSV persistence of sweep tables and detector traces.
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly; nothing time- or host-dependent goes into the files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::detector::DetectorRecord;
use crate::error::{Error, Result};
use crate::pipeline::SweepEntry;

pub const SWEEP_COLUMNS: [&str; 11] =
    ["E0", "gamma", "x_in", "x_exit", "tau_A", "tau_MT", "p0_m1", "p0_m2", "p_fq", "tau_2", "tau_sub_1d"];
pub const NOTES_COLUMNS: [&str; 3] = ["E0", "gamma", "note"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// One line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub values: [f64; 11],
}

impl SweepRow {
    pub fn e0(&self) -> f64 {
        self.values[0]
    }

    pub fn gamma(&self) -> f64 {
        self.values[1]
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        SWEEP_COLUMNS.iter().position(|&c| c == column).map(|i| self.values[i])
    }

    /// Row of a sweep entry; columns of a failed point are NaN.
    pub fn from_entry(e: &SweepEntry, z: f64) -> Self {
        let values = match &e.outcome {
            Ok(p) => {
                let r = &p.report;
                [
                    r.e0, r.gamma, r.x_in, r.x_exit, r.tau_a, r.tau_mt, r.p0_method1, r.p0_method2, r.p_fq,
                    r.tau_2, r.tau_sub_1d,
                ]
            }
            Err(_) => {
                let mut v = [f64::NAN; 11];
                v[0] = e.e0_ratio * z * z * z;
                v[1] = e.gamma;
                v
            }
        };
        Self { values }
    }
}

/// Note attached to a row (NaN cells, flagged bound violations, failures).
#[derive(Clone, Debug, PartialEq)]
pub struct NoteRow {
    pub e0: f64,
    pub gamma: f64,
    pub note: String,
}

pub fn notes_for(e: &SweepEntry, z: f64) -> Vec<NoteRow> {
    let texts = match &e.outcome {
        Ok(p) => p.notes.clone(),
        Err(err) => vec![format!("point failed: {err}")],
    };
    texts
        .into_iter()
        .map(|note| NoteRow { e0: e.e0_ratio * z * z * z, gamma: e.gamma, note })
        .collect()
}

fn sort_key(a: (f64, f64), b: (f64, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0))
}

pub fn write_sweep_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| sort_key((a.e0(), a.gamma()), (b.e0(), b.gamma())));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for r in &rows {
        w.write_record(r.values.iter().map(|&v| num(v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SWEEP_COLUMNS.iter().copied()) {
        return Err(Error::Config(format!("{} has an unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut values = [0.0; 11];
        for (v, field) in values.iter_mut().zip(rec.iter()) {
            *v = field
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number {field:?} in {}", path.display())))?;
        }
        rows.push(SweepRow { values });
    }
    Ok(rows)
}

pub fn write_note_rows(path: &Path, notes: &[NoteRow]) -> Result<()> {
    let mut notes = notes.to_vec();
    notes.sort_by(|a, b| sort_key((a.e0, a.gamma), (b.e0, b.gamma)));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(NOTES_COLUMNS).map_err(csv_err)?;
    for n in &notes {
        w.write_record([num(n.e0), num(n.gamma), n.note.clone()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_note_rows(path: &Path) -> Result<Vec<NoteRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad notes row in {}", path.display())))
        };
        out.push(NoteRow { e0: parse(0)?, gamma: parse(1)?, note: rec.get(2).unwrap_or("").to_string() });
    }
    Ok(out)
}

/// Write `sweep.csv` and `sweep_notes.csv` into `dir`, replacing both.
pub fn write_sweep(dir: &Path, entries: &[SweepEntry], z: f64) -> Result<PathBuf> {
    let rows: Vec<SweepRow> = entries.iter().map(|e| SweepRow::from_entry(e, z)).collect();
    let notes: Vec<NoteRow> = entries.iter().flat_map(|e| notes_for(e, z)).collect();
    let path = dir.join("sweep.csv");
    write_sweep_rows(&path, &rows)?;
    write_note_rows(&dir.join("sweep_notes.csv"), &notes)?;
    Ok(path)
}

/// Insert or replace the rows of `entry` in an existing `sweep.csv` (and its
/// notes), keeping the table sorted. Re-running a point leaves the files
/// byte-identical.
pub fn upsert_sweep(dir: &Path, entry: &SweepEntry, z: f64) -> Result<PathBuf> {
    let path = dir.join("sweep.csv");
    let notes_path = dir.join("sweep_notes.csv");
    let row = SweepRow::from_entry(entry, z);
    let same = |e0: f64, gamma: f64| e0 == row.e0() && gamma == row.gamma();
    let mut rows = if path.exists() { read_sweep_rows(&path)? } else { Vec::new() };
    rows.retain(|r| !same(r.e0(), r.gamma()));
    rows.push(row.clone());
    let mut notes = if notes_path.exists() { read_note_rows(&notes_path)? } else { Vec::new() };
    notes.retain(|n| !same(n.e0, n.gamma));
    notes.extend(notes_for(entry, z));
    write_sweep_rows(&path, &rows)?;
    write_note_rows(&notes_path, &notes)?;
    Ok(path)
}

/// Trace table: `t`, then `j_k,rho_k` for every detector.
pub fn write_trace_to<W: std::io::Write>(out: W, records: &[DetectorRecord<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for k in 0..records.len() {
        header.push(format!("j_{k}"));
        header.push(format!("rho_{k}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let n = records.first().map_or(0, |r| r.len());
    for i in 0..n {
        let mut row = vec![num(records[0].times[i])];
        for r in records {
            row.push(num(r.current[i]));
            row.push(num(r.density[i]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// File name of a point's trace, built from the parameters as given.
pub fn trace_file_name(e0: f64, gamma: f64) -> String {
    format!("trace_{e0}_{gamma}.csv")
}

pub fn write_trace(dir: &Path, e0: f64, gamma: f64, records: &[DetectorRecord<f64>]) -> Result<PathBuf> {
    let path = dir.join(trace_file_name(e0, gamma));
    write_trace_to(fs::File::create(&path)?, records)?;
    Ok(path)
}
