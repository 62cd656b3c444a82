//! Raw cube format: a `key: value` text sidecar (`<path>.hdr`) describing a
//! little-endian 64-bit float binary in band-interleaved-by-pixel order
//! (all band values of pixel 0, then pixel 1, ...).

use crate::datamodel::HyperspectralImage;
use crate::error::{Error, Result};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const CUBE_MAGIC: &str = "MUSC1";
pub const CUBE_DTYPE: &str = "f64le";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeHeader {
    pub bands: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: Option<u64>,
    pub description: Option<String>,
}

impl CubeHeader {
    pub fn new(bands: usize, rows: usize, cols: usize) -> Self {
        Self {
            bands,
            rows,
            cols,
            seed: None,
            description: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    fn render(&self) -> String {
        let mut out = format!(
            "magic: {CUBE_MAGIC}\ndtype: {CUBE_DTYPE}\nbands: {}\nrows: {}\ncols: {}\n",
            self.bands, self.rows, self.cols
        );
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed: {seed}\n"));
        }
        if let Some(desc) = &self.description {
            out.push_str(&format!("description: {desc}\n"));
        }
        out
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".hdr");
    PathBuf::from(os)
}

pub fn write_cube(path: &Path, header: &CubeHeader, image: &HyperspectralImage<f64>) -> Result<()> {
    if header.bands != image.bands() || header.rows != image.rows() || header.cols != image.cols()
    {
        return Err(Error::HeaderMismatch(format!(
            "header says {}x{}x{}, image is {}x{}x{}",
            header.bands,
            header.rows,
            header.cols,
            image.bands(),
            image.rows(),
            image.cols()
        )));
    }
    fs::write(sidecar_path(path), header.render())?;
    let mut writer = BufWriter::new(fs::File::create(path)?);
    let data = image.data();
    for n in 0..image.pixels() {
        for b in 0..image.bands() {
            writer.write_all(&data[(b, n)].to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_cube(path: &Path) -> Result<(CubeHeader, HyperspectralImage<f64>)> {
    let header = parse_header(&fs::read_to_string(sidecar_path(path))?)?;
    let expected = header.bands * header.rows * header.cols * 8;
    let actual = fs::metadata(path)?.len() as usize;
    if actual < expected || !actual.is_multiple_of(8) {
        return Err(Error::TruncatedData {
            expected_bytes: expected,
            found_bytes: actual,
        });
    }
    if actual > expected {
        return Err(Error::HeaderMismatch(format!(
            "header implies {expected} bytes, file holds {actual}"
        )));
    }
    let mut reader = BufReader::new(fs::File::open(path)?);
    let pixels = header.rows * header.cols;
    let mut data = ndarray::Array2::<f64>::zeros((header.bands, pixels));
    let mut buf = [0u8; 8];
    for n in 0..pixels {
        for b in 0..header.bands {
            reader.read_exact(&mut buf)?;
            data[(b, n)] = f64::from_le_bytes(buf);
        }
    }
    let image = HyperspectralImage::new(data, header.rows, header.cols)?;
    Ok((header, image))
}

fn parse_header(text: &str) -> Result<CubeHeader> {
    let mut magic = None;
    let mut dtype = None;
    let mut bands = None;
    let mut rows = None;
    let mut cols = None;
    let mut seed = None;
    let mut description = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(Error::HeaderMismatch(format!("malformed line {line:?}")));
        };
        let value = value.trim();
        match key.trim() {
            "magic" => magic = Some(value.to_string()),
            "dtype" => dtype = Some(value.to_string()),
            "bands" => bands = Some(parse_count(value, "bands")?),
            "rows" => rows = Some(parse_count(value, "rows")?),
            "cols" => cols = Some(parse_count(value, "cols")?),
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::HeaderMismatch(format!("seed {value:?} is not an integer"))
                })?)
            }
            "description" => description = Some(value.to_string()),
            _ => {} // forward compatibility: unknown keys are ignored
        }
    }
    let magic = magic.ok_or_else(|| Error::HeaderMismatch("missing magic".into()))?;
    if magic != CUBE_MAGIC {
        return Err(Error::BadMagic {
            found: magic,
            expected: CUBE_MAGIC,
        });
    }
    let dtype = dtype.ok_or_else(|| Error::HeaderMismatch("missing dtype".into()))?;
    if dtype != CUBE_DTYPE {
        return Err(Error::HeaderMismatch(format!(
            "dtype {dtype:?}, expected {CUBE_DTYPE:?}"
        )));
    }
    let header = CubeHeader {
        bands: bands.ok_or_else(|| Error::HeaderMismatch("missing bands".into()))?,
        rows: rows.ok_or_else(|| Error::HeaderMismatch("missing rows".into()))?,
        cols: cols.ok_or_else(|| Error::HeaderMismatch("missing cols".into()))?,
        seed,
        description,
    };
    Ok(header)
}

fn parse_count(value: &str, key: &str) -> Result<usize> {
    let n = value
        .parse::<usize>()
        .map_err(|_| Error::HeaderMismatch(format!("{key} {value:?} is not a count")))?;
    if n == 0 {
        return Err(Error::HeaderMismatch(format!("{key} must be >= 1")));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::fs::OpenOptions;

    fn sample_image() -> HyperspectralImage<f64> {
        let data = Array2::from_shape_fn((3, 6), |(b, n)| (b * 10 + n) as f64 * 0.125 - 0.3);
        HyperspectralImage::new(data, 2, 3).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.raw");
        let image = sample_image();
        let header = CubeHeader::new(3, 2, 3).with_seed(7).with_description("test cube");
        write_cube(&path, &header, &image).unwrap();
        let (read_header, read_image) = read_cube(&path).unwrap();
        assert_eq!(read_header, header);
        assert_eq!(read_image.data(), image.data());
    }

    #[test]
    fn truncated_binary_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.raw");
        write_cube(&path, &CubeHeader::new(3, 2, 3), &sample_image()).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        OpenOptions::new()
            .write(true)
            .open(&path)
            .unwrap()
            .set_len(len - 8)
            .unwrap();
        assert!(matches!(
            read_cube(&path),
            Err(Error::TruncatedData { expected_bytes: 144, found_bytes: 136 })
        ));
    }

    #[test]
    fn inconsistent_header_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.raw");
        write_cube(&path, &CubeHeader::new(3, 2, 3), &sample_image()).unwrap();
        let sidecar = super::sidecar_path(&path);
        let text = std::fs::read_to_string(&sidecar)
            .unwrap()
            .replace("rows: 2", "rows: 1");
        std::fs::write(&sidecar, text).unwrap();
        // header now implies fewer bytes than the file holds
        assert!(matches!(read_cube(&path), Err(Error::HeaderMismatch(_))));
    }

    #[test]
    fn bad_magic_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.raw");
        write_cube(&path, &CubeHeader::new(3, 2, 3), &sample_image()).unwrap();
        let sidecar = super::sidecar_path(&path);
        let text = std::fs::read_to_string(&sidecar)
            .unwrap()
            .replace(CUBE_MAGIC, "NOPE!");
        std::fs::write(&sidecar, text).unwrap();
        assert!(matches!(read_cube(&path), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn header_image_disagreement_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.raw");
        let err = write_cube(&path, &CubeHeader::new(4, 2, 3), &sample_image());
        assert!(matches!(err, Err(Error::HeaderMismatch(_))));
    }
}
