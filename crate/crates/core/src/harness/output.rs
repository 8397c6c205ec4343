use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diagnostics::ResidualSeries;
use crate::error::Result;
use crate::galerkin::{GalerkinModel, GalerkinState};

use super::FitEntry;

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV write");
    for row in rows {
        w.write_record(&row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

/// `t,value` rows.
pub fn time_series_csv(times: &[f64], values: &[f64]) -> String {
    csv_string(
        &["t", "value"],
        times.iter().zip(values).map(|(t, v)| vec![num(*t), num(*v)]),
    )
}

/// `t,value[,extra...,label]` rows of a residual series.
pub fn residual_csv(series: &ResidualSeries, extra: &[(&str, &[f64])]) -> String {
    let labelled = !series.labels.is_empty();
    let mut header = vec!["t", "value"];
    header.extend(extra.iter().map(|(name, _)| *name));
    if labelled {
        header.push("label");
    }
    csv_string(
        &header,
        (0..series.len()).map(|k| {
            let mut row = vec![num(series.times[k]), num(series.values[k])];
            row.extend(extra.iter().map(|(_, col)| num(col[k])));
            if labelled {
                row.push(series.labels[k].clone());
            }
            row
        }),
    )
}

/// `x,y,v1,v2,theta` on an `n × n` uniform grid of the closed square.
pub fn field_csv(model: &GalerkinModel, state: &GalerkinState, n: usize) -> Result<String> {
    let h = 1.0 / (n - 1) as f64;
    let points: Vec<(f64, f64)> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i as f64 * h, j as f64 * h)))
        .collect();
    let samples = model.evaluate_fields(state, &points)?;
    Ok(csv_string(
        &["x", "y", "v1", "v2", "theta"],
        points
            .iter()
            .zip(&samples)
            .map(|((x, y), s)| vec![num(*x), num(*y), num(s.v[0]), num(s.v[1]), num(s.theta)]),
    ))
}

/// `series,mu_fit,r_squared,window_start,window_end,points`; skipped fits
/// leave the rate columns empty.
pub fn fits_csv(fits: &[FitEntry]) -> String {
    let opt = |x: Option<f64>| x.map_or_else(String::new, num);
    csv_string(
        &["series", "mu_fit", "r_squared", "window_start", "window_end", "points"],
        fits.iter().map(|f| {
            vec![
                f.series.clone(),
                opt(f.mu_fit),
                opt(f.r_squared),
                num(f.window[0]),
                num(f.window[1]),
                f.points.to_string(),
            ]
        }),
    )
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<String> {
    fs::write(dir.join(name), contents)?;
    Ok(name.to_owned())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads the first two columns of a `t,value[,...]` CSV with a header row.
pub fn read_time_series(text: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < 2 || &header[0] != "t" {
        return Err(format!("expected header starting with `t,`, got `{}`", header.iter().collect::<Vec<_>>().join(",")));
    }
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> std::result::Result<f64, String> {
            rec.get(i)
                .ok_or(format!("row {}: too few columns", k + 2))?
                .parse::<f64>()
                .map_err(|e| format!("row {}: {e}", k + 2))
        };
        t.push(parse(0)?);
        v.push(parse(1)?);
    }
    if t.is_empty() {
        return Err("CSV has no data rows".into());
    }
    Ok((t, v))
}
