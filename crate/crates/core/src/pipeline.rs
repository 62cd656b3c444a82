//! End-to-end multiscale unmixing and the unregularized baseline.
//!
//! A run (1) segments the observed image, (2) unmixes the segment averages
//! with the plain sparse solver, (3) broadcasts the coarse abundances back
//! to the pixel grid, and (4) unmixes the full image with the broadcast
//! estimate as a quadratic proximity prior.

use crate::datamodel::{
    validate_pair, AbundanceMatrix, HyperspectralImage, MuaConfig, SegmentMap, SolverOptions,
    SpectralLibrary,
};
use crate::error::Result;
use crate::solver::{admm_solve, AdmmParams, SolveReport};
use crate::transform::{apply_w, apply_w_conj, build_segment_map};
use crate::Float;
use ndarray::Array2;

/// Everything a multiscale run produces, intermediates included.
#[derive(Debug, Clone)]
pub struct MuaResult<T> {
    /// Final full-resolution abundances (nonnegative).
    pub abundances: AbundanceMatrix<T>,
    /// Coarse-scale abundances, one column per segment.
    pub coarse_abundances: Array2<T>,
    /// Coarse abundances broadcast back to the pixel grid; the prior of the
    /// fine stage. Piecewise constant over the segments by construction.
    pub prior: AbundanceMatrix<T>,
    pub segment_map: SegmentMap,
    pub coarse_report: SolveReport<T>,
    pub fine_report: SolveReport<T>,
}

/// Runs the full multiscale pipeline.
///
/// The segmentation is computed on the noisy observed image (the transform
/// is signal-dependent); no denoising precedes it. With `beta = 0` the
/// prior term is dropped entirely and the result is bit-identical to
/// [`sunsal_unmix`] under the same solver options.
pub fn mua_unmix<T: Float>(
    image: &HyperspectralImage<T>,
    library: &SpectralLibrary<T>,
    config: &MuaConfig<T>,
) -> Result<MuaResult<T>> {
    validate_pair(image, library)?;
    config.validate(image.pixels())?;

    let seg = build_segment_map(image, config.transform, config.region_size, config.seed)?;
    let y_coarse = apply_w(image.data().view(), &seg)?;

    let coarse_params = AdmmParams {
        lambda: config.lambda_c,
        beta: T::zero(),
        mu: config.solver.mu,
        max_iters: config.solver.max_iters,
        tol: config.solver.tol,
    };
    let coarse_report = admm_solve(
        y_coarse.view(),
        library.signatures().view(),
        None,
        &coarse_params,
    )?;
    let coarse_abundances = coarse_report.abundances.values().clone();
    let prior = apply_w_conj(coarse_abundances.view(), &seg)?;

    let fine_params = AdmmParams {
        lambda: config.lambda,
        beta: config.beta,
        mu: config.solver.mu,
        max_iters: config.solver.max_iters,
        tol: config.solver.tol,
    };
    let prior_arg = if config.beta > T::zero() {
        Some(prior.view())
    } else {
        None
    };
    let fine_report = admm_solve(
        image.data().view(),
        library.signatures().view(),
        prior_arg,
        &fine_params,
    )?;

    Ok(MuaResult {
        abundances: fine_report.abundances.clone(),
        coarse_abundances,
        prior: AbundanceMatrix::new(prior)?,
        segment_map: seg,
        coarse_report,
        fine_report,
    })
}

/// The spatially unregularized baseline: one sparse solve on the full
/// image, no prior.
pub fn sunsal_unmix<T: Float>(
    image: &HyperspectralImage<T>,
    library: &SpectralLibrary<T>,
    lambda: T,
    options: &SolverOptions<T>,
) -> Result<SolveReport<T>> {
    validate_pair(image, library)?;
    options.validate()?;
    let params = AdmmParams {
        lambda,
        beta: T::zero(),
        mu: options.mu,
        max_iters: options.max_iters,
        tol: options.tol,
    };
    admm_solve(image.data().view(), library.signatures().view(), None, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::TransformKind;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_setup(
        seed: u64,
        bands: usize,
        count: usize,
        rows: usize,
        cols: usize,
    ) -> (HyperspectralImage<f64>, SpectralLibrary<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((bands, count), |_| 0.05 + 0.9 * rng.random::<f64>());
        let library = SpectralLibrary::new(a, None).unwrap();
        let x = Array2::from_shape_fn((count, rows * cols), |_| {
            if rng.random::<f64>() < 0.8 {
                0.0
            } else {
                rng.random::<f64>()
            }
        });
        let y = library.signatures().dot(&x);
        let image = HyperspectralImage::new(y, rows, cols).unwrap();
        (image, library)
    }

    #[test]
    fn beta_zero_is_bit_identical_to_baseline() {
        let (image, library) = random_setup(2, 12, 8, 4, 5);
        // beta = 0 must be representable, so build the config directly
        let config = MuaConfig {
            lambda_c: 0.01,
            lambda: 0.02,
            beta: 0.0,
            transform: TransformKind::Grid,
            region_size: 2,
            solver: SolverOptions {
                mu: 0.01,
                max_iters: 150,
                tol: 1e-8,
            },
            seed: 0,
        };
        let mua = mua_unmix(&image, &library, &config).unwrap();
        let baseline = sunsal_unmix(&image, &library, 0.02, &config.solver).unwrap();
        assert_eq!(
            mua.abundances.values(),
            baseline.abundances.values(),
            "beta = 0 run must match the baseline bitwise"
        );
        assert_eq!(mua.fine_report.iterations, baseline.iterations);
    }

    #[test]
    fn near_zero_lambda_recovers_consistent_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = Array2::from_shape_fn((12, 5), |_| rng.random::<f64>());
        let library = SpectralLibrary::new(a.mapv(|v| v * 0.999), None).unwrap();
        let x = Array2::from_shape_fn((5, 6), |_| rng.random::<f64>());
        let y = library.signatures().dot(&x);
        let image = HyperspectralImage::new(y, 2, 3).unwrap();
        let options = SolverOptions {
            mu: 0.01,
            max_iters: 200_000,
            tol: 1e-9,
        };
        let report = sunsal_unmix(&image, &library, 1e-9, &options).unwrap();
        for (got, want) in report.abundances.values().iter().zip(x.iter()) {
            assert!((got - want).abs() < 1e-4, "got {got}, want {want}");
        }
    }

    #[test]
    fn prior_is_piecewise_constant_over_segments() {
        let (image, library) = random_setup(5, 10, 7, 6, 6);
        let config = MuaConfig::new(0.01, 0.02, 5.0, TransformKind::Slic, 2).unwrap();
        let result = mua_unmix(&image, &library, &config).unwrap();
        let prior = result.prior.values();
        let seg = &result.segment_map;
        for n in 0..seg.pixels() {
            let first = (0..seg.pixels()).find(|&m| seg.label(m) == seg.label(n)).unwrap();
            for p in 0..prior.nrows() {
                assert_eq!(prior[(p, n)], prior[(p, first)]);
            }
        }
        // and it is exactly the broadcast coarse estimate
        let rebuilt = apply_w_conj(result.coarse_abundances.view(), seg).unwrap();
        assert_eq!(&rebuilt, prior);
    }

    #[test]
    fn single_segment_constant_image_collapses_scales() {
        // On a spatially constant image K-means degenerates to a single
        // segment, so coarse and fine stages see the same problem and the
        // result matches the shared per-pixel truth.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Array2::from_shape_fn((16, 6), |_| 0.1 + 0.8 * rng.random::<f64>());
        let library = SpectralLibrary::new(a, None).unwrap();
        let mut x_col = [0.0; 6];
        x_col[1] = 0.6;
        x_col[4] = 0.4;
        let n = 16;
        let x = Array2::from_shape_fn((6, n), |(p, _)| x_col[p]);
        let y = library.signatures().dot(&x);
        let image = HyperspectralImage::new(y, 4, 4).unwrap();
        let config = MuaConfig {
            lambda_c: 1e-6,
            lambda: 1e-6,
            beta: 1.0,
            transform: TransformKind::Kmeans,
            region_size: 2,
            solver: SolverOptions {
                mu: 0.01,
                max_iters: 100_000,
                tol: 1e-10,
            },
            seed: 0,
        };
        let result = mua_unmix(&image, &library, &config).unwrap();
        assert_eq!(result.segment_map.segment_count(), 1);
        for (got, want) in result.abundances.values().iter().zip(x.iter()) {
            assert!((got - want).abs() <= 1e-3, "got {got}, want {want}");
        }
    }

    #[test]
    fn deterministic_given_config() {
        let (image, library) = random_setup(13, 10, 6, 5, 5);
        let config = MuaConfig::new(0.01, 0.05, 2.0, TransformKind::Kmeans, 2)
            .unwrap()
            .with_seed(3);
        let a = mua_unmix(&image, &library, &config).unwrap();
        let b = mua_unmix(&image, &library, &config).unwrap();
        assert_eq!(a.abundances.values(), b.abundances.values());
        assert_eq!(a.segment_map, b.segment_map);
        assert_eq!(a.coarse_abundances, b.coarse_abundances);
    }
}
