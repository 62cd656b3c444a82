//! Evaluation: reconstruction quality in decibels, root-mean-square error,
//! and per-material aggregation of abundance estimates.

use crate::datamodel::{AbundanceMatrix, MuaConfig};
use crate::error::{Error, Result};
use crate::Float;
use ndarray::Array2;

/// Signal-to-reconstruction error in dB:
/// `10 log10(||X||_F^2 / ||X - Xhat||_F^2)`.
///
/// A perfect estimate returns the infinity sentinel rather than an error,
/// so sweep tables stay rectangular.
pub fn sre<T: Float>(truth: &AbundanceMatrix<T>, estimate: &AbundanceMatrix<T>) -> Result<T> {
    check_shapes(truth, estimate)?;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&t, &e) in truth.values().iter().zip(estimate.values().iter()) {
        num += t * t;
        let d = t - e;
        den += d * d;
    }
    if num == T::zero() {
        return Err(Error::ZeroTruth);
    }
    if den == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::from_f64_lossy(10.0) * (num / den).log10())
}

/// `||X - Xhat||_F / sqrt(count * pixels)`.
pub fn rmse<T: Float>(truth: &AbundanceMatrix<T>, estimate: &AbundanceMatrix<T>) -> Result<T> {
    check_shapes(truth, estimate)?;
    let mut den = T::zero();
    for (&t, &e) in truth.values().iter().zip(estimate.values().iter()) {
        let d = t - e;
        den += d * d;
    }
    Ok((den / T::from_usize(truth.values().len()).unwrap()).sqrt())
}

fn check_shapes<T: Float>(
    truth: &AbundanceMatrix<T>,
    estimate: &AbundanceMatrix<T>,
) -> Result<()> {
    if truth.count() != estimate.count() || truth.pixels() != estimate.pixels() {
        return Err(Error::ShapeMismatch(format!(
            "truth is {}x{}, estimate is {}x{}",
            truth.count(),
            truth.pixels(),
            estimate.count(),
            estimate.pixels()
        )));
    }
    Ok(())
}

/// Sums abundance rows sharing a material id and renormalizes each pixel
/// column to sum to one (columns with no mass stay zero). Material ids are
/// mapped to output rows in ascending order.
pub fn aggregate_by_material<T: Float>(
    estimate: &AbundanceMatrix<T>,
    material_map: &[usize],
) -> Result<AbundanceMatrix<T>> {
    if material_map.len() < estimate.count() {
        return Err(Error::UnmappedSignature {
            index: material_map.len(),
        });
    }
    let mut ids: Vec<usize> = material_map[..estimate.count()].to_vec();
    ids.sort_unstable();
    ids.dedup();
    let row_of = |material: usize| ids.binary_search(&material).unwrap();

    let n = estimate.pixels();
    let mut out: Array2<T> = Array2::zeros((ids.len(), n));
    let values = estimate.values();
    for p in 0..estimate.count() {
        let r = row_of(material_map[p]);
        for c in 0..n {
            out[(r, c)] += values[(p, c)];
        }
    }
    for c in 0..n {
        let mut sum = T::zero();
        for r in 0..ids.len() {
            sum += out[(r, c)];
        }
        if sum > T::zero() {
            for r in 0..ids.len() {
                out[(r, c)] /= sum;
            }
        }
    }
    AbundanceMatrix::new(out)
}

/// One evaluated run: quality metrics plus the configuration that produced
/// them, ready for CSV serialization.
#[derive(Debug, Clone)]
pub struct EvalReport<T> {
    pub sre_db: T,
    pub rmse: T,
    pub runtime_s: f64,
    pub config_echo: MuaConfig<T>,
}

pub const CSV_HEADER: &str =
    "config_hash,transform,lambda_c,lambda,beta,region_size,snr_db,sre_db,rmse,runtime_s";

impl<T: Float> EvalReport<T> {
    /// Serializes to the report CSV schema. The hash identifies the full
    /// run configuration (the caller decides what it covers); `snr_db` is
    /// NaN when unknown and then left empty.
    pub fn csv_row(&self, config_hash: u64, snr_db: f64) -> String {
        let snr = if snr_db.is_nan() {
            String::new()
        } else {
            format!("{snr_db}")
        };
        format!(
            "{:016x},{},{},{},{},{},{},{},{},{}",
            config_hash,
            self.config_echo.transform.as_str(),
            self.config_echo.lambda_c,
            self.config_echo.lambda,
            self.config_echo.beta,
            self.config_echo.region_size,
            snr,
            self.sre_db,
            self.rmse,
            self.runtime_s
        )
    }
}

/// FNV-1a, stable across platforms and releases; used to key sweep rows.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
