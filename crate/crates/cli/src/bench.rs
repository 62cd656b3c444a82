//! Grid sweeps: a flat `key = comma-separated-values` sweep file expands
//! into the Cartesian product of all listed values, one CSV row per cell.
//! Cells run on worker threads; each cell is independent and seeded, and
//! rows are sorted by configuration hash before the file is written, so a
//! sweep's output is deterministic regardless of scheduling.

use crate::commands::{DatasetArg, MethodArg};
use crate::report;
use clap::Args;
use mua_core::datamodel::{
    AbundanceMatrix, HyperspectralImage, MuaConfig, SolverOptions, SpectralLibrary, TransformKind,
};
use mua_core::error::{Error, Result};
use mua_core::metrics::{fnv1a_64, rmse, sre, CSV_HEADER};
use mua_core::pipeline::{mua_unmix, sunsal_unmix};
use mua_core::synth::{add_noise, generate_dc1, generate_dc2, generate_library, Dc1Params, Dc2Params};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Sweep file: `key = value[,value...]` lines, `#` starts a comment.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV (overwritten).
    #[arg(long)]
    pub out: PathBuf,
}

const SWEEP_KEYS: [&str; 18] = [
    "dataset",
    "rows",
    "cols",
    "bands",
    "library_size",
    "min_angle",
    "data_seed",
    "snr",
    "seed",
    "method",
    "transform",
    "lambda_c",
    "lambda",
    "beta",
    "region_size",
    "mu",
    "tol",
    "max_iters",
];

const MAX_CELLS: usize = 4096;

#[derive(Debug, Clone)]
struct Cell {
    dataset: DatasetArg,
    rows: Option<usize>,
    cols: Option<usize>,
    bands: usize,
    library_size: usize,
    min_angle: f64,
    data_seed: u64,
    snr: f64,
    noise_seed: u64,
    method: MethodArg,
    transform: TransformKind,
    lambda_c: f64,
    lambda: f64,
    beta: f64,
    region_size: usize,
    mu: f64,
    tol: f64,
    max_iters: usize,
}

impl Cell {
    fn echo(&self) -> String {
        format!(
            "dataset={};rows={:?};cols={:?};bands={};library_size={};min_angle={};data_seed={};\
             snr={};seed={};method={};transform={};lambda_c={};lambda={};beta={};region_size={};\
             mu={};tol={};max_iters={}",
            dataset_label(self.dataset),
            self.rows,
            self.cols,
            self.bands,
            self.library_size,
            self.min_angle,
            self.data_seed,
            self.snr,
            self.noise_seed,
            method_label(self.method),
            self.transform.as_str(),
            self.lambda_c,
            self.lambda,
            self.beta,
            self.region_size,
            self.mu,
            self.tol,
            self.max_iters
        )
    }

    fn library_key(&self) -> (usize, usize, u64, u64) {
        (self.bands, self.library_size, self.min_angle.to_bits(), self.data_seed)
    }

    fn dataset_key(&self) -> DatasetKey {
        (
            self.bands,
            self.library_size,
            self.min_angle.to_bits(),
            self.data_seed,
            dataset_code(self.dataset),
            self.rows.unwrap_or(0),
            self.cols.unwrap_or(0),
        )
    }

    fn cube_key(&self) -> CubeKey {
        (self.dataset_key(), self.snr.to_bits(), self.noise_seed)
    }
}

type DatasetKey = (usize, usize, u64, u64, u8, usize, usize);
type CubeKey = (DatasetKey, u64, u64);

fn dataset_label(d: DatasetArg) -> &'static str {
    match d {
        DatasetArg::Dc1 => "dc1",
        DatasetArg::Dc2 => "dc2",
    }
}

fn dataset_code(d: DatasetArg) -> u8 {
    match d {
        DatasetArg::Dc1 => 1,
        DatasetArg::Dc2 => 2,
    }
}

fn method_label(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Mua => "mua",
        MethodArg::Sunsal => "sunsal",
    }
}

pub fn run_bench(args: &BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let cells = expand_sweep(&text)?;

    // Base data shared by all cells of a (library, dataset, noise) tuple,
    // generated up front so the parallel phase is pure computation.
    let mut libraries: BTreeMap<(usize, usize, u64, u64), SpectralLibrary<f64>> = BTreeMap::new();
    for cell in &cells {
        let key = cell.library_key();
        if let std::collections::btree_map::Entry::Vacant(e) = libraries.entry(key) {
            e.insert(generate_library(cell.bands, cell.library_size, cell.min_angle, cell.data_seed)?);
        }
    }
    let mut truths: BTreeMap<DatasetKey, (AbundanceMatrix<f64>, HyperspectralImage<f64>)> =
        BTreeMap::new();
    for cell in &cells {
        let key = cell.dataset_key();
        if let std::collections::btree_map::Entry::Vacant(e) = truths.entry(key) {
            let library = &libraries[&cell.library_key()];
            let data_seed = cell.data_seed.wrapping_add(1);
            let pair = match cell.dataset {
                DatasetArg::Dc1 => {
                    let mut params = Dc1Params {
                        seed: data_seed,
                        ..Dc1Params::default()
                    };
                    if let Some(rows) = cell.rows {
                        params.rows = rows;
                    }
                    if let Some(cols) = cell.cols {
                        params.cols = cols;
                    }
                    generate_dc1(library, &params)?
                }
                DatasetArg::Dc2 => {
                    let mut params = Dc2Params {
                        seed: data_seed,
                        ..Dc2Params::default()
                    };
                    if let Some(rows) = cell.rows {
                        params.rows = rows;
                    }
                    if let Some(cols) = cell.cols {
                        params.cols = cols;
                    }
                    generate_dc2(library, &params)?
                }
            };
            e.insert(pair);
        }
    }
    let mut cubes: BTreeMap<CubeKey, HyperspectralImage<f64>> = BTreeMap::new();
    for cell in &cells {
        let key = cell.cube_key();
        cubes.entry(key).or_insert_with(|| {
            let (_, clean) = &truths[&cell.dataset_key()];
            add_noise(clean, cell.snr, cell.noise_seed)
        });
    }

    let rows: Result<Vec<(u64, String)>> = cells
        .par_iter()
        .map(|cell| {
            let library = &libraries[&cell.library_key()];
            let (truth, _) = &truths[&cell.dataset_key()];
            let observed = &cubes[&cell.cube_key()];
            run_cell(cell, library, truth, observed)
        })
        .collect();
    let mut rows = rows?;
    rows.sort();

    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (_, row) in &rows {
        out.push_str(row);
        out.push('\n');
    }
    fs::write(&args.out, out)?;
    println!("wrote {} sweep rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn run_cell(
    cell: &Cell,
    library: &SpectralLibrary<f64>,
    truth: &AbundanceMatrix<f64>,
    observed: &HyperspectralImage<f64>,
) -> Result<(u64, String)> {
    let hash = fnv1a_64(cell.echo().as_bytes());
    let solver = SolverOptions {
        mu: cell.mu,
        max_iters: cell.max_iters,
        tol: cell.tol,
    };
    let started = Instant::now();
    let (estimate, transform_label, lambda_c, beta, region_size) = match cell.method {
        MethodArg::Mua => {
            let config = MuaConfig::new(
                cell.lambda_c,
                cell.lambda,
                cell.beta,
                cell.transform,
                cell.region_size,
            )?
            .with_solver(solver)
            .with_seed(cell.noise_seed);
            let result = mua_unmix(observed, library, &config)?;
            (
                result.abundances,
                cell.transform.as_str(),
                cell.lambda_c,
                cell.beta,
                cell.region_size,
            )
        }
        MethodArg::Sunsal => {
            let report = sunsal_unmix(observed, library, cell.lambda, &solver)?;
            (report.abundances, "none", 0.0, 0.0, 0)
        }
    };
    let runtime = started.elapsed().as_secs_f64();
    let row = report::csv_row(
        hash,
        transform_label,
        lambda_c,
        cell.lambda,
        beta,
        region_size,
        cell.snr,
        sre(truth, &estimate)?,
        rmse(truth, &estimate)?,
        runtime,
    );
    Ok((hash, row))
}

fn expand_sweep(text: &str) -> Result<Vec<Cell>> {
    let mut lists: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, values)) = line.split_once('=') else {
            return Err(Error::InvalidParameter(format!(
                "sweep line {} has no '=': {raw:?}",
                idx + 1
            )));
        };
        let key = key.trim().to_string();
        if !SWEEP_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "unknown sweep key {key:?} (expected one of {SWEEP_KEYS:?})"
            )));
        }
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "sweep key {key:?} has no values"
            )));
        }
        lists.insert(key, values);
    }

    let defaults: [(&str, &str); 18] = [
        ("dataset", "dc1"),
        ("rows", ""),
        ("cols", ""),
        ("bands", "224"),
        ("library_size", "240"),
        ("min_angle", "4.44"),
        ("data_seed", "0"),
        ("snr", "20"),
        ("seed", "0"),
        ("method", "mua"),
        ("transform", "slic"),
        ("lambda_c", "0.01"),
        ("lambda", "0.1"),
        ("beta", "1"),
        ("region_size", "6"),
        ("mu", "0.01"),
        ("tol", "1e-6"),
        ("max_iters", "1000"),
    ];
    let axes: Vec<Vec<String>> = defaults
        .iter()
        .map(|(key, default)| {
            lists
                .get(*key)
                .cloned()
                .unwrap_or_else(|| vec![default.to_string()])
        })
        .collect();

    // odometer over all axes, first key outermost
    let mut cells = Vec::new();
    let mut index = vec![0usize; axes.len()];
    'grid: loop {
        let v: Vec<&str> = axes
            .iter()
            .zip(&index)
            .map(|(axis, &i)| axis[i].as_str())
            .collect();
        cells.push(build_cell(
            v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12],
            v[13], v[14], v[15], v[16], v[17],
        )?);
        if cells.len() > MAX_CELLS {
            return Err(Error::InvalidParameter(format!(
                "sweep exceeds {MAX_CELLS} cells"
            )));
        }
        let mut axis = axes.len();
        loop {
            if axis == 0 {
                break 'grid;
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < axes[axis].len() {
                break;
            }
            index[axis] = 0;
        }
    }
    Ok(cells)
}

#[allow(clippy::too_many_arguments)]
fn build_cell(
    dataset: &str,
    rows: &str,
    cols: &str,
    bands: &str,
    library_size: &str,
    min_angle: &str,
    data_seed: &str,
    snr: &str,
    noise_seed: &str,
    method: &str,
    transform: &str,
    lambda_c: &str,
    lambda: &str,
    beta: &str,
    region_size: &str,
    mu: &str,
    tol: &str,
    max_iters: &str,
) -> Result<Cell> {
    Ok(Cell {
        dataset: match dataset {
            "dc1" => DatasetArg::Dc1,
            "dc2" => DatasetArg::Dc2,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown dataset {other:?}"
                )))
            }
        },
        rows: parse_optional(rows, "rows")?,
        cols: parse_optional(cols, "cols")?,
        bands: parse_value(bands, "bands")?,
        library_size: parse_value(library_size, "library_size")?,
        min_angle: parse_value(min_angle, "min_angle")?,
        data_seed: parse_value(data_seed, "data_seed")?,
        snr: parse_value(snr, "snr")?,
        noise_seed: parse_value(noise_seed, "seed")?,
        method: match method {
            "mua" => MethodArg::Mua,
            "sunsal" => MethodArg::Sunsal,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown method {other:?}"
                )))
            }
        },
        transform: transform.parse()?,
        lambda_c: parse_value(lambda_c, "lambda_c")?,
        lambda: parse_value(lambda, "lambda")?,
        beta: parse_value(beta, "beta")?,
        region_size: parse_value(region_size, "region_size")?,
        mu: parse_value(mu, "mu")?,
        tol: parse_value(tol, "tol")?,
        max_iters: parse_value(max_iters, "max_iters")?,
    })
}

fn parse_value<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        Error::InvalidParameter(format!("sweep key {key:?}: cannot parse {value:?}"))
    })
}

fn parse_optional(value: &str, key: &str) -> Result<Option<usize>> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse_value(value, key).map(Some)
    }
}
