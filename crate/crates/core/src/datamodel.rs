//! Core value types shared by every other module.
//!
//! Shape invariants are checked once, at construction; all types are
//! immutable afterwards and safe to share across threads. Pixel
//! linearization is row-major throughout: pixel `(r, c)` maps to column
//! `r * cols + c`.

use crate::error::{Error, Result};
use crate::Float;
use ndarray::Array2;

/// An observed hyperspectral cube: `bands x pixels` reflectance matrix plus
/// its spatial dimensions. Values are dimensionless reflectance, expected
/// nonnegative but not enforced (additive noise may push them below zero).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralImage<T> {
    rows: usize,
    cols: usize,
    data: Array2<T>,
}

impl<T: Float> HyperspectralImage<T> {
    pub fn new(data: Array2<T>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || data.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "image needs at least one band, one row and one column".into(),
            ));
        }
        if data.ncols() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "image data has {} pixel columns, expected rows*cols = {}",
                data.ncols(),
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// The `bands x pixels` matrix, pixels in row-major order.
    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn into_data(self) -> Array2<T> {
        self.data
    }
}

/// A spectral library: one candidate endmember reflectance spectrum per
/// column, every entry in `[0, 1]`, no all-zero column. The optional
/// material map assigns each signature to a material identifier for
/// post-hoc aggregation of abundances.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary<T> {
    signatures: Array2<T>,
    material_map: Option<Vec<usize>>,
}

impl<T: Float> SpectralLibrary<T> {
    pub fn new(signatures: Array2<T>, material_map: Option<Vec<usize>>) -> Result<Self> {
        if signatures.nrows() == 0 || signatures.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "library needs at least one band and one signature".into(),
            ));
        }
        for (i, v) in signatures.iter().enumerate() {
            if !(*v >= T::zero() && *v <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "library entry {i} = {v} outside [0, 1]"
                )));
            }
        }
        for (j, col) in signatures.columns().into_iter().enumerate() {
            if col.iter().all(|v| *v == T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "library column {j} is all zero"
                )));
            }
        }
        if let Some(map) = &material_map {
            if map.len() != signatures.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "material map covers {} signatures, library has {}",
                    map.len(),
                    signatures.ncols()
                )));
            }
        }
        Ok(Self {
            signatures,
            material_map,
        })
    }

    pub fn bands(&self) -> usize {
        self.signatures.nrows()
    }

    /// Number of signatures in the library.
    pub fn count(&self) -> usize {
        self.signatures.ncols()
    }

    /// The `bands x count` signature matrix.
    pub fn signatures(&self) -> &Array2<T> {
        &self.signatures
    }

    pub fn material_map(&self) -> Option<&[usize]> {
        self.material_map.as_deref()
    }
}

/// A fractional abundance matrix: one column per pixel, one row per library
/// signature. Only the shape is enforced here; solver outputs additionally
/// guarantee elementwise nonnegativity, while priors fed back into the
/// solver may carry arbitrary values.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix<T> {
    values: Array2<T>,
}

impl<T: Float> AbundanceMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "abundance matrix must be nonempty".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Number of library signatures (rows).
    pub fn count(&self) -> usize {
        self.values.nrows()
    }

    /// Number of pixels (columns).
    pub fn pixels(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= T::zero())
    }
}

/// Assignment of each pixel to one of `K` segments. Embodies the averaging
/// operator and its broadcast conjugate used by the multiscale transform.
///
/// Labels are always dense: every id in `[0, K)` occurs at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl SegmentMap {
    /// Builds a segment map from an arbitrary label array, renumbering the
    /// labels densely in order of first appearance so that no segment is
    /// empty.
    pub fn from_labels(raw: &[usize]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidParameter(
                "segment map needs at least one pixel".into(),
            ));
        }
        let mut remap: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut sizes = Vec::new();
        for &r in raw {
            let next = sizes.len();
            let id = *remap.entry(r).or_insert(next);
            if id == next {
                sizes.push(0);
            }
            sizes[id] += 1;
            labels.push(id);
        }
        Ok(Self { labels, sizes })
    }

    /// One segment per pixel (the identity transform up to scaling).
    pub fn singletons(pixels: usize) -> Result<Self> {
        Self::from_labels(&(0..pixels).collect::<Vec<_>>())
    }

    pub fn pixels(&self) -> usize {
        self.labels.len()
    }

    pub fn segment_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Pixel count of each segment; sums to `pixels()`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn label(&self, pixel: usize) -> usize {
        self.labels[pixel]
    }
}

/// Which segmentation builds the multiscale operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Superpixel over-segmentation with joint spectral-spatial distance.
    Slic,
    /// Plain spectral K-means; clusters need not be spatially connected.
    Kmeans,
    /// Uniform rectangular tiling.
    Grid,
}

impl TransformKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransformKind::Slic => "slic",
            TransformKind::Kmeans => "kmeans",
            TransformKind::Grid => "grid",
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slic" => Ok(TransformKind::Slic),
            "kmeans" => Ok(TransformKind::Kmeans),
            "grid" => Ok(TransformKind::Grid),
            other => Err(Error::InvalidParameter(format!(
                "unknown transform {other:?} (expected slic, kmeans or grid)"
            ))),
        }
    }
}

/// ADMM stopping rule and penalty weight, shared by the coarse and fine
/// stages of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// ADMM penalty parameter.
    pub mu: T,
    pub max_iters: usize,
    /// Joint primal/dual residual tolerance, scaled internally by
    /// `sqrt(count * pixels)`.
    pub tol: T,
}

impl<T: Float> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            mu: T::from_f64_lossy(0.01),
            max_iters: 1000,
            tol: T::from_f64_lossy(1e-6),
        }
    }
}

impl<T: Float> SolverOptions<T> {
    // negated comparisons so NaN parameters are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero()) {
            return Err(Error::InvalidParameter(format!("mu = {} must be > 0", self.mu)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tol = {} must be > 0",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Every tuning knob of a multiscale unmixing run.
#[derive(Debug, Clone, PartialEq)]
pub struct MuaConfig<T> {
    /// Sparsity weight of the coarse-scale problem.
    pub lambda_c: T,
    /// Sparsity weight of the full-resolution problem.
    pub lambda: T,
    /// Weight of the quadratic proximity to the coarse prior; `0` disables
    /// the multiscale term entirely.
    pub beta: T,
    pub transform: TransformKind,
    /// Target segment side length: the segment count aims at
    /// `pixels / region_size^2`.
    pub region_size: usize,
    pub solver: SolverOptions<T>,
    pub seed: u64,
}

impl<T: Float> MuaConfig<T> {
    pub fn new(
        lambda_c: T,
        lambda: T,
        beta: T,
        transform: TransformKind,
        region_size: usize,
    ) -> Result<Self> {
        let config = Self {
            lambda_c,
            lambda,
            beta,
            transform,
            region_size,
            solver: SolverOptions::default(),
            seed: 0,
        };
        config.validate_params()?;
        Ok(config)
    }

    pub fn with_solver(mut self, solver: SolverOptions<T>) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    // negated comparisons so NaN parameters are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate_params(&self) -> Result<()> {
        if !(self.lambda_c > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda_c = {} must be > 0",
                self.lambda_c
            )));
        }
        if !(self.lambda > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be > 0",
                self.lambda
            )));
        }
        if !(self.beta >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "beta = {} must be >= 0",
                self.beta
            )));
        }
        if self.region_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "region_size = {} must be >= 2",
                self.region_size
            )));
        }
        self.solver.validate()
    }

    /// Full validation against a concrete image size.
    pub fn validate(&self, pixels: usize) -> Result<()> {
        self.validate_params()?;
        if self.region_size * self.region_size >= pixels {
            return Err(Error::RegionTooLarge {
                region_size: self.region_size,
                pixels,
            });
        }
        Ok(())
    }
}

/// Checks that an image and a library live on the same band grid.
pub fn validate_pair<T: Float>(
    image: &HyperspectralImage<T>,
    library: &SpectralLibrary<T>,
) -> Result<()> {
    if image.bands() != library.bands() {
        return Err(Error::BandMismatch {
            image: image.bands(),
            library: library.bands(),
        });
    }
    Ok(())
}
