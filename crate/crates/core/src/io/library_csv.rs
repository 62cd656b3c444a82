//! Library CSV: header row `band,sig_0,...,sig_{P-1}`, an optional
//! `material,<id>,...` row, then one row per band with the band index
//! followed by the reflectance of every signature. Values are written with
//! the shortest decimal representation that parses back to the same float.

use crate::datamodel::SpectralLibrary;
use crate::error::{Error, Result};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn write_library(path: &Path, library: &SpectralLibrary<f64>) -> Result<()> {
    let mut writer = BufWriter::new(fs::File::create(path)?);
    write!(writer, "band")?;
    for j in 0..library.count() {
        write!(writer, ",sig_{j}")?;
    }
    writeln!(writer)?;
    if let Some(map) = library.material_map() {
        write!(writer, "material")?;
        for id in map {
            write!(writer, ",{id}")?;
        }
        writeln!(writer)?;
    }
    let sig = library.signatures();
    for l in 0..library.bands() {
        write!(writer, "{l}")?;
        for j in 0..library.count() {
            write!(writer, ",{}", sig[(l, j)])?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_library(path: &Path) -> Result<SpectralLibrary<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::NonNumeric {
            row: 0,
            value: "<empty file>".into(),
        });
    };
    let fields: Vec<&str> = header.split(',').collect();
    if fields.is_empty() || fields[0] != "band" {
        return Err(Error::HeaderMismatch(format!(
            "first field {:?}, expected \"band\"",
            fields.first().copied().unwrap_or_default()
        )));
    }
    let count = fields.len() - 1;
    if count == 0 {
        return Err(Error::HeaderMismatch("no signature columns".into()));
    }

    let mut material_map: Option<Vec<usize>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "material" {
            if fields.len() - 1 != count {
                return Err(Error::RaggedRows {
                    row: idx,
                    expected: count + 1,
                    found: fields.len(),
                });
            }
            let mut map = Vec::with_capacity(count);
            for f in &fields[1..] {
                map.push(f.trim().parse::<usize>().map_err(|_| Error::NonNumeric {
                    row: idx,
                    value: f.to_string(),
                })?);
            }
            material_map = Some(map);
            continue;
        }
        if fields.len() != count + 1 {
            return Err(Error::RaggedRows {
                row: idx,
                expected: count + 1,
                found: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(count);
        for f in &fields[1..] {
            row.push(f.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
                row: idx,
                value: f.to_string(),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NonNumeric {
            row: 0,
            value: "<no data rows>".into(),
        });
    }
    let bands = rows.len();
    let mut signatures = ndarray::Array2::zeros((bands, count));
    for (l, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            signatures[(l, j)] = v;
        }
    }
    SpectralLibrary::new(signatures, material_map)
}
