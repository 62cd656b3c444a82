//! Run reports (`key: value` text) and the shared CSV row schema.

use mua_core::error::{Error, Result};
use mua_core::metrics::CSV_HEADER;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

pub fn write_run_report(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (key, value) in pairs {
        out.push_str(key);
        out.push_str(": ");
        out.push_str(value);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_run_report(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(Error::HeaderMismatch(format!(
                "malformed report line {line:?}"
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// One row of the evaluation CSV. `snr_db` of NaN prints as an empty field.
#[allow(clippy::too_many_arguments)]
pub fn csv_row(
    config_hash: u64,
    transform: &str,
    lambda_c: f64,
    lambda: f64,
    beta: f64,
    region_size: usize,
    snr_db: f64,
    sre_db: f64,
    rmse: f64,
    runtime_s: f64,
) -> String {
    let snr = if snr_db.is_nan() {
        String::new()
    } else {
        format!("{snr_db}")
    };
    format!(
        "{config_hash:016x},{transform},{lambda_c},{lambda},{beta},{region_size},{snr},{sre_db},{rmse},{runtime_s}"
    )
}

/// Appends a row, writing the header first if the file is new or empty.
pub fn append_csv_row(path: &Path, row: &str) -> Result<()> {
    let needs_header = match fs::metadata(path) {
        Ok(meta) => meta.len() == 0,
        Err(_) => true,
    };
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if needs_header {
        writeln!(file, "{CSV_HEADER}")?;
    }
    writeln!(file, "{row}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.txt");
        let pairs = vec![
            ("method".to_string(), "mua".to_string()),
            ("lambda".to_string(), "0.1".to_string()),
        ];
        write_run_report(&path, &pairs).unwrap();
        let map = read_run_report(&path).unwrap();
        assert_eq!(map["method"], "mua");
        assert_eq!(map["lambda"], "0.1");
    }

    #[test]
    fn csv_header_written_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        append_csv_row(&path, "a,b").unwrap();
        append_csv_row(&path, "c,d").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
    }

    #[test]
    fn nan_snr_prints_empty() {
        let row = csv_row(1, "none", 0.0, 0.5, 0.0, 0, f64::NAN, 1.0, 0.1, 2.0);
        assert!(row.contains(",0.5,0,0,,1,"));
    }
}
