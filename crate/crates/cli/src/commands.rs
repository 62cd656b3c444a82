//! The synth, segment, unmix and eval subcommands.

use crate::report;
use clap::{Args, ValueEnum};
use mua_core::datamodel::{
    AbundanceMatrix, HyperspectralImage, MuaConfig, SolverOptions, TransformKind,
};
use mua_core::error::{Error, Result};
use mua_core::io::{
    export_abundance_maps, read_cube, read_library, write_cube, write_library,
    write_segment_map, CubeHeader,
};
use mua_core::metrics::{fnv1a_64, rmse, sre};
use mua_core::pipeline::{mua_unmix, sunsal_unmix};
use mua_core::synth::{add_noise, generate_dc1, generate_dc2, generate_library, Dc1Params, Dc2Params};
use mua_core::transform::{grid_segment, kmeans_segment, slic_segment, SlicParams};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Dc1,
    Dc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mua,
    Sunsal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Slic,
    Kmeans,
    Grid,
}

impl From<TransformArg> for TransformKind {
    fn from(value: TransformArg) -> Self {
        match value {
            TransformArg::Slic => TransformKind::Slic,
            TransformArg::Kmeans => TransformKind::Kmeans,
            TransformArg::Grid => TransformKind::Grid,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Which ground-truth cube to generate.
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    #[arg(long, default_value_t = 224)]
    pub bands: usize,
    #[arg(long, default_value_t = 240)]
    pub library_size: usize,
    /// Minimum pairwise spectral angle of the library, degrees.
    #[arg(long, default_value_t = 4.44)]
    pub min_angle: f64,
    /// Signal-to-noise ratio in dB; `inf` writes the clean cube.
    #[arg(long, default_value_t = 20.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Sub-seeds: the library, the abundance cube and the noise draw their own
/// streams from the run seed, so each stage is independently reproducible.
fn sub_seeds(seed: u64) -> (u64, u64, u64) {
    (seed, seed.wrapping_add(1), seed.wrapping_add(2))
}

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    fs::create_dir_all(&args.out_dir)?;
    let (library_seed, data_seed, noise_seed) = sub_seeds(args.seed);
    let library = generate_library::<f64>(args.bands, args.library_size, args.min_angle, library_seed)?;
    let (dataset_name, truth, clean) = match args.dataset {
        DatasetArg::Dc1 => {
            let params = Dc1Params {
                seed: data_seed,
                ..Dc1Params::default()
            };
            let (truth, clean) = generate_dc1(&library, &params)?;
            ("dc1", truth, clean)
        }
        DatasetArg::Dc2 => {
            let params = Dc2Params {
                seed: data_seed,
                ..Dc2Params::default()
            };
            let (truth, clean) = generate_dc2(&library, &params)?;
            ("dc2", truth, clean)
        }
    };
    let observed = add_noise(&clean, args.snr, noise_seed);

    write_library(&args.out_dir.join("library.csv"), &library)?;
    let rows = observed.rows();
    let cols = observed.cols();
    let truth_image = HyperspectralImage::new(truth.into_values(), rows, cols)?;
    write_cube(
        &args.out_dir.join("truth.cube"),
        &CubeHeader::new(truth_image.bands(), rows, cols)
            .with_seed(args.seed)
            .with_description(format!("{dataset_name} ground-truth abundances")),
        &truth_image,
    )?;
    write_cube(
        &args.out_dir.join("observed.cube"),
        &CubeHeader::new(observed.bands(), rows, cols)
            .with_seed(args.seed)
            .with_description(format!("{dataset_name} observed cube, snr {} dB", args.snr)),
        &observed,
    )?;
    println!(
        "wrote {dataset_name} cube ({} bands, {rows}x{cols}), truth and library to {}",
        observed.bands(),
        args.out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long, value_enum)]
    pub method: TransformArg,
    #[arg(long)]
    pub region_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spatial-versus-spectral weight for slic; defaults to a data-derived
    /// scale when omitted.
    #[arg(long)]
    pub compactness: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_segment(args: &SegmentArgs) -> Result<()> {
    let (_, image) = read_cube(&args.cube)?;
    let seg = match args.method {
        TransformArg::Slic => slic_segment(
            &image,
            &SlicParams {
                region_size: args.region_size,
                compactness: args.compactness,
                iters: 10,
                seed: args.seed,
            },
        )?,
        TransformArg::Kmeans => {
            let k = (image.pixels() / (args.region_size * args.region_size)).max(1);
            kmeans_segment(&image, k, 10, args.seed)?
        }
        TransformArg::Grid => grid_segment(&image, args.region_size)?,
    };
    write_segment_map(&args.out, &seg)?;
    println!(
        "segmented {} pixels into {} segments",
        seg.pixels(),
        seg.segment_count()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub library: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = TransformArg::Slic)]
    pub transform: TransformArg,
    /// Coarse-scale sparsity weight (required for mua).
    #[arg(long)]
    pub lambda_c: Option<f64>,
    /// Sparsity weight.
    #[arg(long)]
    pub lambda: f64,
    /// Multiscale regularization weight (required for mua).
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub mu: f64,
    /// Target segment side length (required for mua).
    #[arg(long)]
    pub region_size: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write one grayscale PGM per signature under `<out-dir>/maps/`.
    #[arg(long, default_value_t = false)]
    pub export_maps: bool,
}

pub fn run_unmix(args: &UnmixArgs) -> Result<()> {
    let (_, image) = read_cube(&args.cube)?;
    let library = read_library(&args.library)?;
    fs::create_dir_all(&args.out_dir)?;
    let solver = SolverOptions {
        mu: args.mu,
        max_iters: args.max_iters,
        tol: args.tol,
    };

    let started = Instant::now();
    let mut pairs: Vec<(String, String)> = Vec::new();
    let abundances: AbundanceMatrix<f64> = match args.method {
        MethodArg::Mua => {
            let lambda_c = args
                .lambda_c
                .ok_or_else(|| Error::InvalidParameter("--lambda-c is required for mua".into()))?;
            let beta = args
                .beta
                .ok_or_else(|| Error::InvalidParameter("--beta is required for mua".into()))?;
            let region_size = args.region_size.ok_or_else(|| {
                Error::InvalidParameter("--region-size is required for mua".into())
            })?;
            let config = MuaConfig::new(
                lambda_c,
                args.lambda,
                beta,
                args.transform.into(),
                region_size,
            )?
            .with_solver(solver)
            .with_seed(args.seed);
            let result = mua_unmix(&image, &library, &config)?;
            let runtime = started.elapsed().as_secs_f64();
            let transform_label = config.transform.as_str();
            let hash = fnv1a_64(
                unmix_echo(
                    "mua",
                    transform_label,
                    lambda_c,
                    args.lambda,
                    beta,
                    args.mu,
                    region_size,
                    args.tol,
                    args.max_iters,
                    args.seed,
                )
                .as_bytes(),
            );
            pairs.push(("method".into(), "mua".into()));
            pairs.push(("transform".into(), transform_label.into()));
            pairs.push(("lambda_c".into(), lambda_c.to_string()));
            pairs.push(("lambda".into(), args.lambda.to_string()));
            pairs.push(("beta".into(), beta.to_string()));
            pairs.push(("mu".into(), args.mu.to_string()));
            pairs.push(("region_size".into(), region_size.to_string()));
            pairs.push(("tol".into(), args.tol.to_string()));
            pairs.push(("max_iters".into(), args.max_iters.to_string()));
            pairs.push(("seed".into(), args.seed.to_string()));
            pairs.push(("segments".into(), result.segment_map.segment_count().to_string()));
            pairs.push((
                "coarse_iterations".into(),
                result.coarse_report.iterations.to_string(),
            ));
            pairs.push((
                "coarse_primal_residual".into(),
                result.coarse_report.final_primal_residual.to_string(),
            ));
            pairs.push((
                "coarse_dual_residual".into(),
                result.coarse_report.final_dual_residual.to_string(),
            ));
            pairs.push((
                "coarse_objective".into(),
                result.coarse_report.objective.to_string(),
            ));
            pairs.push(("iterations".into(), result.fine_report.iterations.to_string()));
            pairs.push((
                "primal_residual".into(),
                result.fine_report.final_primal_residual.to_string(),
            ));
            pairs.push((
                "dual_residual".into(),
                result.fine_report.final_dual_residual.to_string(),
            ));
            pairs.push(("objective".into(), result.fine_report.objective.to_string()));
            pairs.push(("runtime_s".into(), runtime.to_string()));
            pairs.push(("config_hash".into(), format!("{hash:016x}")));
            result.abundances
        }
        MethodArg::Sunsal => {
            let report = sunsal_unmix(&image, &library, args.lambda, &solver)?;
            let runtime = started.elapsed().as_secs_f64();
            let hash = fnv1a_64(
                unmix_echo(
                    "sunsal",
                    "none",
                    0.0,
                    args.lambda,
                    0.0,
                    args.mu,
                    0,
                    args.tol,
                    args.max_iters,
                    args.seed,
                )
                .as_bytes(),
            );
            pairs.push(("method".into(), "sunsal".into()));
            pairs.push(("transform".into(), "none".into()));
            pairs.push(("lambda_c".into(), "0".into()));
            pairs.push(("lambda".into(), args.lambda.to_string()));
            pairs.push(("beta".into(), "0".into()));
            pairs.push(("mu".into(), args.mu.to_string()));
            pairs.push(("region_size".into(), "0".into()));
            pairs.push(("tol".into(), args.tol.to_string()));
            pairs.push(("max_iters".into(), args.max_iters.to_string()));
            pairs.push(("seed".into(), args.seed.to_string()));
            pairs.push(("iterations".into(), report.iterations.to_string()));
            pairs.push((
                "primal_residual".into(),
                report.final_primal_residual.to_string(),
            ));
            pairs.push((
                "dual_residual".into(),
                report.final_dual_residual.to_string(),
            ));
            pairs.push(("objective".into(), report.objective.to_string()));
            pairs.push(("runtime_s".into(), runtime.to_string()));
            pairs.push(("config_hash".into(), format!("{hash:016x}")));
            report.abundances
        }
    };

    let rows = image.rows();
    let cols = image.cols();
    if args.export_maps {
        export_abundance_maps(&abundances, rows, cols, &args.out_dir.join("maps"))?;
    }
    let estimate = HyperspectralImage::new(abundances.into_values(), rows, cols)?;
    write_cube(
        &args.out_dir.join("abundances.cube"),
        &CubeHeader::new(estimate.bands(), rows, cols)
            .with_seed(args.seed)
            .with_description("estimated abundances".to_string()),
        &estimate,
    )?;
    report::write_run_report(&args.out_dir.join("report.txt"), &pairs)?;
    println!("wrote abundances and report to {}", args.out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn unmix_echo(
    method: &str,
    transform: &str,
    lambda_c: f64,
    lambda: f64,
    beta: f64,
    mu: f64,
    region_size: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> String {
    format!(
        "method={method};transform={transform};lambda_c={lambda_c};lambda={lambda};beta={beta};\
         mu={mu};region_size={region_size};tol={tol};max_iters={max_iters};seed={seed}"
    )
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth abundance cube.
    #[arg(long)]
    pub truth: PathBuf,
    /// Estimated abundance cube.
    #[arg(long)]
    pub estimate: PathBuf,
    /// CSV file to append the evaluation row to.
    #[arg(long)]
    pub out: PathBuf,
    /// Run report of the unmix invocation; fills the configuration columns.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// SNR column value, when known.
    #[arg(long)]
    pub snr: Option<f64>,
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let truth = read_abundance_cube(&args.truth)?;
    let estimate = read_abundance_cube(&args.estimate)?;
    let sre_db = sre(&truth, &estimate)?;
    let rmse_val = rmse(&truth, &estimate)?;

    let (hash, transform, lambda_c, lambda, beta, region_size, runtime_s) = match &args.report {
        Some(path) => {
            let map = report::read_run_report(path)?;
            let get_f64 = |key: &str| -> f64 {
                map.get(key).and_then(|v| v.parse().ok()).unwrap_or(0.0)
            };
            let hash = map
                .get("config_hash")
                .and_then(|v| u64::from_str_radix(v, 16).ok())
                .unwrap_or(0);
            (
                hash,
                map.get("transform").cloned().unwrap_or_else(|| "none".into()),
                get_f64("lambda_c"),
                get_f64("lambda"),
                get_f64("beta"),
                get_f64("region_size") as usize,
                get_f64("runtime_s"),
            )
        }
        None => {
            let hash = fnv1a_64(
                format!("{}|{}", args.truth.display(), args.estimate.display()).as_bytes(),
            );
            (hash, "none".to_string(), 0.0, 0.0, 0.0, 0, 0.0)
        }
    };
    let row = report::csv_row(
        hash,
        &transform,
        lambda_c,
        lambda,
        beta,
        region_size,
        args.snr.unwrap_or(f64::NAN),
        sre_db,
        rmse_val,
        runtime_s,
    );
    report::append_csv_row(&args.out, &row)?;
    println!("sre_db {sre_db}, rmse {rmse_val}");
    Ok(())
}

pub(crate) fn read_abundance_cube(path: &Path) -> Result<AbundanceMatrix<f64>> {
    let (_, image) = read_cube(path)?;
    AbundanceMatrix::new(image.into_data())
}
