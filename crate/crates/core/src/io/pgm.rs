//! Binary PGM (P5) export of abundance maps, one 8-bit grayscale file per
//! library signature, values clamped to `[0, 1]` and quantized with
//! round-half-up.

use crate::datamodel::AbundanceMatrix;
use crate::error::{Error, Result};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn export_abundance_maps(
    abundances: &AbundanceMatrix<f64>,
    rows: usize,
    cols: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if abundances.pixels() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "{} abundance pixels cannot fill a {rows}x{cols} map",
            abundances.pixels()
        )));
    }
    fs::create_dir_all(out_dir)?;
    let values = abundances.values();
    let mut paths = Vec::with_capacity(abundances.count());
    for p in 0..abundances.count() {
        let path = out_dir.join(format!("em_{p}.pgm"));
        let mut writer = BufWriter::new(fs::File::create(&path)?);
        write!(writer, "P5\n{cols} {rows}\n255\n")?;
        let bytes: Vec<u8> = (0..rows * cols)
            .map(|n| quantize(values[(p, n)]))
            .collect();
        writer.write_all(&bytes)?;
        writer.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Round-half-up quantization of `[0, 1]` onto `0..=255`.
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}
