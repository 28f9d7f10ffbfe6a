//! CSV formats for series and events.
//!
//! Series files carry a header `time,<name>:obs,...,<name>:act` and one row
//! per timestep. Lines starting with `#` are comments (used for provenance
//! metadata on generated files).

use std::io::{Read, Write};

use crate::series::{EventRecord, MultivariateSeries, Role};
use crate::{Error, Result};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn parse_finite(token: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::input(format!("row {row}, column {col}: cannot parse {token:?}")))?;
    if !v.is_finite() {
        return Err(Error::input(format!("row {row}, column {col}: non-finite value {token:?}")));
    }
    Ok(v)
}

/// Parse a role-tagged series CSV.
pub fn read_series<R: Read>(r: R) -> Result<MultivariateSeries> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("time") {
        return Err(Error::input("first column must be `time`"));
    }
    let mut names = Vec::new();
    let mut roles = Vec::new();
    for h in headers.iter().skip(1) {
        let (name, tag) =
            h.rsplit_once(':').ok_or_else(|| Error::input(format!("column {h:?} lacks a :obs or :act tag")))?;
        let role = match tag {
            "obs" => Role::Observation,
            "act" => Role::Action,
            other => return Err(Error::input(format!("column {h:?} has unknown role {other:?}"))),
        };
        names.push(name.to_string());
        roles.push(role);
    }
    if names.is_empty() {
        return Err(Error::input("series file has no data columns"));
    }
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != names.len() + 1 {
            return Err(Error::input(format!("row {row}: expected {} fields, found {}", names.len() + 1, rec.len())));
        }
        times.push(parse_finite(&rec[0], row, "time")?);
        for (c, ch) in values.iter_mut().enumerate() {
            ch.push(parse_finite(&rec[c + 1], row, &headers[c + 1])?);
        }
    }
    if times.is_empty() {
        return Err(Error::input("series file has no rows"));
    }
    let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
    if !(dt > 0.0) {
        return Err(Error::input("time column must be strictly increasing"));
    }
    MultivariateSeries::new(names, roles, values, dt)
}

/// Write a series CSV; time is `start_time + i * dt`.
pub fn write_series<W: Write>(w: W, series: &MultivariateSeries, start_time: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["time".to_string()];
    for (n, r) in series.names().iter().zip(series.roles()) {
        header.push(format!("{n}:{}", r.tag()));
    }
    wtr.write_record(&header)?;
    for i in 0..series.len() {
        let mut rec = vec![format_time(start_time + i as f64 * series.dt())];
        rec.extend(series.values().iter().map(|c| c[i].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn format_time(t: f64) -> String {
    // Trim accumulated binary noise so `0.05 * 3` prints as 0.15.
    let s = format!("{t:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Parse an events CSV with header `start_index,duration,magnitude`.
pub fn read_events<R: Read>(r: R) -> Result<Vec<EventRecord>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let expected = ["start_index", "duration", "magnitude"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::input("events header must be start_index,duration,magnitude"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let int = |s: &str, col: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::input(format!("row {row}, column {col}: bad integer {s:?}")))
        };
        out.push(EventRecord {
            start_index: int(&rec[0], "start_index")?,
            duration: int(&rec[1], "duration")?,
            magnitude: parse_finite(&rec[2], row, "magnitude")?,
        });
    }
    Ok(out)
}
