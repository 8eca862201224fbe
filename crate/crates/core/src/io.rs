//! File formats: JSON with 17 significant digits, and node-indexed CSV for
//! densities and 1-forms.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::forms::OneFormField;
use crate::ops::WeightedSpace;
use crate::semigroup::{DensityField, NodalField};

/// Pretty JSON whose floats are written as `d.dddddddddddddddde±x`.
struct SigDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with every float at 17 significant digits. Non-finite floats
/// become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn from_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read_text(path)?, path)
}

/// Float in the CSV and JSON artifacts.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// CSV text of the given records.
pub fn csv_string<I, R, S>(records: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut wr = csv::Writer::from_writer(Vec::new());
    for r in records {
        wr.write_record(r).expect("in-memory CSV");
    }
    String::from_utf8(wr.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

/// Header and rows of a CSV file, all fields as text.
pub(crate) fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rd
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

pub(crate) fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::parse(path, format!("line {line}: not a number: {s:?}")))
}

fn check_header(found: &[String], want: &[String], path: &Path) -> Result<()> {
    if found != want {
        return Err(Error::parse(
            path,
            format!("expected columns {want:?}, found {found:?}"),
        ));
    }
    Ok(())
}

fn density_header(ws: &WeightedSpace) -> Vec<String> {
    let mut h = vec!["node_index".to_string()];
    h.extend(ws.space().kind().variables().iter().map(|v| v.to_string()));
    h.push("value".into());
    h
}

fn form_header(ws: &WeightedSpace) -> Vec<String> {
    let mut h = vec!["node_index".to_string()];
    h.extend((1..=ws.space().form_components()).map(|c| format!("comp_{c}")));
    h
}

/// Rows must list every node once, in order.
fn check_rows(rows: &[Vec<String>], ws: &WeightedSpace, path: &Path) -> Result<()> {
    if rows.len() != ws.len() {
        return Err(Error::parse(
            path,
            format!("{} rows for grid {} with {} nodes", rows.len(), ws.key(), ws.len()),
        ));
    }
    for (k, row) in rows.iter().enumerate() {
        if row[0].parse::<usize>().ok() != Some(k) {
            return Err(Error::parse(
                path,
                format!("line {}: expected node index {k}, found {:?}", k + 2, row[0]),
            ));
        }
    }
    Ok(())
}

/// Writes `node_index, coordinate(s), value`.
pub fn write_density_csv(rho: &DensityField, ws: &WeightedSpace, path: &Path) -> Result<()> {
    write_text(path, &nodal_csv_string(rho.values(), ws)?)
}

/// Nodal values as the text of a density file.
pub fn nodal_csv_string(values: &[f64], ws: &WeightedSpace) -> Result<String> {
    ws.check_len(values.len(), "field")?;
    let rows = values.iter().enumerate().map(|(k, v)| {
        let mut rec = vec![k.to_string()];
        rec.extend(ws.space().coords(k).into_iter().map(fmt_f64));
        rec.push(fmt_f64(*v));
        rec
    });
    Ok(csv_string(std::iter::once(density_header(ws)).chain(rows)))
}

/// Reads nodal values written by [`write_density_csv`]. Coordinates must
/// match the grid to 1e-9.
pub fn read_nodal_csv(ws: &WeightedSpace, path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_csv_table(path)?;
    check_header(&header, &density_header(ws), path)?;
    check_rows(&rows, ws, path)?;
    let dim = ws.space().kind().variables().len();
    let mut out = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let want = ws.space().coords(k);
        for c in 0..dim {
            let x = parse_f64(&row[1 + c], path, k + 2)?;
            if (x - want[c]).abs() > 1e-9 {
                return Err(Error::parse(
                    path,
                    format!("line {}: coordinate {x} does not match grid node {}", k + 2, want[c]),
                ));
            }
        }
        out.push(parse_f64(&row[1 + dim], path, k + 2)?);
    }
    Ok(out)
}

/// Reads a density file; the values are normalized against `μ`.
pub fn read_density_csv(ws: &WeightedSpace, path: &Path) -> Result<DensityField> {
    DensityField::normalized(ws, read_nodal_csv(ws, path)?)
}

/// Writes `node_index, comp_1[, comp_2]`.
pub fn write_form_csv(omega: &OneFormField, ws: &WeightedSpace, path: &Path) -> Result<()> {
    if omega.grid() != &ws.key() {
        return Err(Error::Input(format!("form on {} written for {}", omega.grid(), ws.key())));
    }
    let rows = (0..ws.len()).map(|k| {
        let mut rec = vec![k.to_string()];
        rec.extend(omega.comps().iter().map(|c| fmt_f64(c[k])));
        rec
    });
    write_text(path, &csv_string(std::iter::once(form_header(ws)).chain(rows)))
}

pub fn read_form_csv(ws: &WeightedSpace, path: &Path) -> Result<OneFormField> {
    let (header, rows) = read_csv_table(path)?;
    check_header(&header, &form_header(ws), path)?;
    check_rows(&rows, ws, path)?;
    let nc = ws.space().form_components();
    let mut comps = vec![Vec::with_capacity(rows.len()); nc];
    for (k, row) in rows.iter().enumerate() {
        for (c, comp) in comps.iter_mut().enumerate() {
            comp.push(parse_f64(&row[1 + c], path, k + 2)?);
        }
    }
    OneFormField::new(ws, comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_json(&vec![0.1, -0.0, 1e300, f64::NAN]);
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-0.0000000000000000e0"), "{s}");
        assert!(s.contains("null"), "{s}");
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0], Some(0.1));
        assert_eq!(back[2], Some(1e300));
    }
}
