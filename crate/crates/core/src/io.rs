//! CSV and JSON artifacts. Floats are written in shortest round-trip form.

use std::io::{Read, Write};

use crate::construction::{LedgerRow, LEDGER_COLUMNS};
use crate::error::{LabError, Result};
use crate::measures::{BandSet, DensityCurve, EnergyGrid};
use crate::operator::EmpiricalMeasure;

fn csv_err(what: &'static str) -> impl Fn(csv::Error) -> LabError {
    move |e| LabError::parse(what, e)
}

fn io_err(e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => LabError::Io(e),
        other => LabError::parse("csv", format!("{other:?}")),
    }
}

/// Writes a header row and numeric rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string()))
            .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric table, checking the header when `expect` is given.
pub fn read_table<R: Read>(
    input: R,
    expect: Option<&[&str]>,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err("csv header"))?
        .iter()
        .map(str::to_string)
        .collect();
    if let Some(want) = expect {
        if header.iter().map(String::as_str).ne(want.iter().copied()) {
            return Err(LabError::parse(
                "csv header",
                format!("expected {want:?}, got {header:?}"),
            ));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err("csv row"))?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| LabError::parse("csv cell", format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub const MEASURE_HEADER: [&str; 2] = ["atom", "weight"];

pub fn write_measure_csv<W: Write>(out: W, nu: &EmpiricalMeasure) -> Result<()> {
    let rows: Vec<Vec<f64>> = nu
        .atoms()
        .iter()
        .zip(nu.weights())
        .map(|(a, w)| vec![*a, *w])
        .collect();
    write_table(out, &MEASURE_HEADER, &rows)
}

pub fn read_measure_csv<R: Read>(input: R) -> Result<EmpiricalMeasure> {
    let (_, rows) = read_table(input, Some(&MEASURE_HEADER))?;
    let (atoms, weights) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    EmpiricalMeasure::new(atoms, weights)
}

pub fn read_measure_json(text: &str) -> Result<EmpiricalMeasure> {
    serde_json::from_str(text).map_err(|e| LabError::parse("measure json", e))
}

/// `x,f,f1,…,fJ`.
pub fn curve_header(order: usize) -> Vec<String> {
    let mut h = vec!["x".to_string(), "f".to_string()];
    h.extend((1..=order).map(|j| format!("f{j}")));
    h
}

pub fn write_curve_csv<W: Write>(out: W, curve: &DensityCurve) -> Result<()> {
    let header = curve_header(curve.order());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..curve.grid.len)
        .map(|i| {
            let mut r = vec![curve.grid.point(i)];
            r.extend(curve.orders().iter().map(|o| o[i]));
            r
        })
        .collect();
    write_table(out, &refs, &rows)
}

/// Reads a curve written by [`write_curve_csv`]; `x` must be equispaced.
pub fn read_curve_csv<R: Read>(input: R) -> Result<DensityCurve> {
    let (header, rows) = read_table(input, None)?;
    if header.len() < 2 {
        return Err(LabError::parse("curve csv", "need columns x,f"));
    }
    let want = curve_header(header.len() - 2);
    if header != want {
        return Err(LabError::parse(
            "curve csv",
            format!("expected header {want:?}"),
        ));
    }
    if rows.is_empty() {
        return Err(LabError::parse("curve csv", "no rows"));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = if xs.len() == 1 {
        EnergyGrid {
            start: xs[0],
            step: 0.0,
            len: 1,
        }
    } else {
        EnergyGrid::linspace(xs[0], xs[xs.len() - 1], xs.len())?
    };
    let tol = 1e-9 * (1.0 + grid.lo().abs().max(grid.hi().abs()));
    if xs
        .iter()
        .enumerate()
        .any(|(i, x)| (grid.point(i) - x).abs() > tol)
    {
        return Err(LabError::parse("curve csv", "x is not equispaced"));
    }
    let orders = (1..header.len())
        .map(|c| rows.iter().map(|r| r[c]).collect())
        .collect();
    DensityCurve::new(grid, orders)
}

pub fn write_json<W: Write, T: serde::Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| LabError::parse("json", e))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_bands_json(text: &str) -> Result<BandSet> {
    serde_json::from_str(text).map_err(|e| LabError::parse("bands json", e))
}

pub fn write_ledger_csv<W: Write>(out: W, rows: &[LedgerRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(LEDGER_COLUMNS).map_err(io_err)?;
    for r in rows {
        w.serialize(r).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger_csv<R: Read>(input: R) -> Result<Vec<LedgerRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err("ledger header"))?.clone();
    if header.iter().ne(LEDGER_COLUMNS.iter().copied()) {
        return Err(LabError::parse("ledger header", format!("{header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(csv_err("ledger row")))
        .collect()
}
