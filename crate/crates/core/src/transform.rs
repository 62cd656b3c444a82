//! The signal-adaptive multiscale decomposition: pixel grouping plus
//! segment averaging (the coarse transform) and label broadcast back to the
//! pixel grid (its conjugate).
//!
//! Three segmenters build the grouping: SLIC over-segmentation on the joint
//! spectral-spatial distance, plain spectral K-means, and a uniform
//! rectangular grid. All are deterministic in their seeds.

use crate::datamodel::{HyperspectralImage, SegmentMap, TransformKind};
use crate::error::{Error, Result};
use crate::Float;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Averages the columns of `matrix` inside each segment; column `k` of the
/// result is the arithmetic mean of the input columns labeled `k`.
pub fn apply_w<T: Float>(matrix: ArrayView2<T>, seg: &SegmentMap) -> Result<Array2<T>> {
    if matrix.ncols() != seg.pixels() {
        return Err(Error::PixelCountMismatch {
            expected: seg.pixels(),
            actual: matrix.ncols(),
        });
    }
    let rows = matrix.nrows();
    let k = seg.segment_count();
    let mut out: Array2<T> = Array2::zeros((rows, k));
    for (n, col) in matrix.columns().into_iter().enumerate() {
        let label = seg.label(n);
        for (r, v) in col.iter().enumerate() {
            out[(r, label)] += *v;
        }
    }
    for (j, &size) in seg.sizes().iter().enumerate() {
        let inv = T::one() / T::from_usize(size).unwrap();
        for r in 0..rows {
            out[(r, j)] *= inv;
        }
    }
    Ok(out)
}

/// Conjugate of [`apply_w`]: broadcasts each segment value to every pixel
/// of that segment.
pub fn apply_w_conj<T: Float>(coarse: ArrayView2<T>, seg: &SegmentMap) -> Result<Array2<T>> {
    if coarse.ncols() != seg.segment_count() {
        return Err(Error::SegmentCountMismatch {
            expected: seg.segment_count(),
            actual: coarse.ncols(),
        });
    }
    let rows = coarse.nrows();
    let mut out: Array2<T> = Array2::zeros((rows, seg.pixels()));
    for n in 0..seg.pixels() {
        let label = seg.label(n);
        for r in 0..rows {
            out[(r, n)] = coarse[(r, label)];
        }
    }
    Ok(out)
}

/// SLIC parameters. `compactness` weighs spatial against spectral distance;
/// `None` picks a data-scaled default (0.1 times the mean per-pixel
/// spectral norm). That scale keeps segment boundaries on genuine spectral
/// edges instead of chasing per-pixel noise, while strong edges still
/// dominate the spatial term.
#[derive(Debug, Clone, Copy)]
pub struct SlicParams<T> {
    pub region_size: usize,
    pub compactness: Option<T>,
    pub iters: usize,
    pub seed: u64,
}

impl<T> SlicParams<T> {
    pub fn new(region_size: usize) -> Self {
        Self {
            region_size,
            compactness: None,
            iters: 10,
            seed: 0,
        }
    }
}

/// SLIC superpixel over-segmentation.
///
/// Pixels are assigned to the nearest of roughly `pixels / region_size^2`
/// cluster centers under
/// `d^2 = d_spec^2 + (compactness / region_size)^2 * d_spat^2`,
/// where `d_spec` is the Euclidean distance between full reflectance
/// vectors and `d_spat` the Euclidean pixel-coordinate distance. Centers
/// average both spectrum and position over their members; the local search
/// visits a window of half-width `2 * region_size` around each center.
/// A final connectivity pass splits segments into 4-connected components
/// and merges fragments smaller than `region_size^2 / 4` into their largest
/// adjacent segment.
pub fn slic_segment<T: Float>(
    image: &HyperspectralImage<T>,
    params: &SlicParams<T>,
) -> Result<SegmentMap> {
    let (rows, cols) = (image.rows(), image.cols());
    let pixels = image.pixels();
    let s = params.region_size;
    if s < 2 {
        return Err(Error::InvalidParameter(format!(
            "region_size = {s} must be >= 2"
        )));
    }
    if s * s >= pixels {
        return Err(Error::RegionTooLarge {
            region_size: s,
            pixels,
        });
    }
    let data = image.data();
    let bands = image.bands();

    let compactness = params.compactness.unwrap_or_else(|| {
        let mut total = T::zero();
        for col in data.columns() {
            let mut sq = T::zero();
            for v in col.iter() {
                sq += *v * *v;
            }
            total += sq.sqrt();
        }
        T::from_f64_lossy(0.1) * total / T::from_usize(pixels).unwrap()
    });
    let spatial_weight = {
        let ratio = compactness / T::from_usize(s).unwrap();
        ratio * ratio
    };

    // Initial centers on a regular grid with spacing ~region_size.
    let ny = ((rows as f64 / s as f64).round() as usize).max(1);
    let nx = ((cols as f64 / s as f64).round() as usize).max(1);
    let k = ny * nx;
    let mut center_spec: Array2<T> = Array2::zeros((bands, k));
    let mut center_pos: Vec<(T, T)> = Vec::with_capacity(k);
    for iy in 0..ny {
        let r = (((iy as f64 + 0.5) * rows as f64 / ny as f64) as usize).min(rows - 1);
        for ix in 0..nx {
            let c = (((ix as f64 + 0.5) * cols as f64 / nx as f64) as usize).min(cols - 1);
            let idx = center_pos.len();
            let n = r * cols + c;
            for b in 0..bands {
                center_spec[(b, idx)] = data[(b, n)];
            }
            center_pos.push((T::from_usize(r).unwrap(), T::from_usize(c).unwrap()));
        }
    }

    let window = 2 * s;
    let mut labels = vec![usize::MAX; pixels];
    let mut dists = vec![T::infinity(); pixels];
    for _ in 0..params.iters.max(1) {
        labels.iter_mut().for_each(|l| *l = usize::MAX);
        dists.iter_mut().for_each(|d| *d = T::infinity());
        for kc in 0..k {
            let (cr, cc) = center_pos[kc];
            let cri = cr.to_f64().unwrap().round() as isize;
            let cci = cc.to_f64().unwrap().round() as isize;
            let r0 = (cri - window as isize).max(0) as usize;
            let r1 = ((cri + window as isize + 1) as usize).min(rows);
            let c0 = (cci - window as isize).max(0) as usize;
            let c1 = ((cci + window as isize + 1) as usize).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    let n = r * cols + c;
                    let mut d = T::zero();
                    for b in 0..bands {
                        let diff = data[(b, n)] - center_spec[(b, kc)];
                        d += diff * diff;
                    }
                    let dr = T::from_usize(r).unwrap() - cr;
                    let dc = T::from_usize(c).unwrap() - cc;
                    d += spatial_weight * (dr * dr + dc * dc);
                    // <= so a later equidistant center wins; keeps tilings
                    // exact on spatially constant inputs
                    if d <= dists[n] {
                        dists[n] = d;
                        labels[n] = kc;
                    }
                }
            }
        }
        // Pixels outside every search window (possible after large center
        // drift) are assigned by brute force.
        for n in 0..pixels {
            if labels[n] != usize::MAX {
                continue;
            }
            let (r, c) = (n / cols, n % cols);
            for kc in 0..k {
                let mut d = T::zero();
                for b in 0..bands {
                    let diff = data[(b, n)] - center_spec[(b, kc)];
                    d += diff * diff;
                }
                let dr = T::from_usize(r).unwrap() - center_pos[kc].0;
                let dc = T::from_usize(c).unwrap() - center_pos[kc].1;
                d += spatial_weight * (dr * dr + dc * dc);
                if d <= dists[n] {
                    dists[n] = d;
                    labels[n] = kc;
                }
            }
        }

        // Center update: mean spectrum and mean position, accumulated in
        // pixel order. Empty centers keep their previous state.
        let mut spec_sum: Array2<T> = Array2::zeros((bands, k));
        let mut pos_sum: Vec<(T, T)> = vec![(T::zero(), T::zero()); k];
        let mut counts = vec![0usize; k];
        for n in 0..pixels {
            let kc = labels[n];
            counts[kc] += 1;
            let (r, c) = (n / cols, n % cols);
            pos_sum[kc].0 += T::from_usize(r).unwrap();
            pos_sum[kc].1 += T::from_usize(c).unwrap();
            for b in 0..bands {
                spec_sum[(b, kc)] += data[(b, n)];
            }
        }
        for kc in 0..k {
            if counts[kc] == 0 {
                continue;
            }
            let inv = T::one() / T::from_usize(counts[kc]).unwrap();
            for b in 0..bands {
                center_spec[(b, kc)] = spec_sum[(b, kc)] * inv;
            }
            center_pos[kc] = (pos_sum[kc].0 * inv, pos_sum[kc].1 * inv);
        }
    }

    let merged = enforce_connectivity(&labels, rows, cols, s * s / 4);
    SegmentMap::from_labels(&merged)
}

/// Splits label regions into 4-connected components and merges components
/// smaller than `min_size` into their largest adjacent neighbor.
fn enforce_connectivity(
    labels: &[usize],
    rows: usize,
    cols: usize,
    min_size: usize,
) -> Vec<usize> {
    let pixels = rows * cols;
    // Connected components of equal-label regions, ids in scan order.
    let mut comp = vec![usize::MAX; pixels];
    let mut comp_pixels: Vec<Vec<usize>> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..pixels {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_pixels.len();
        let mut members = Vec::new();
        comp[start] = id;
        queue.push_back(start);
        while let Some(n) = queue.pop_front() {
            members.push(n);
            let (r, c) = (n / cols, n % cols);
            let mut visit = |m: usize| {
                if comp[m] == usize::MAX && labels[m] == labels[n] {
                    comp[m] = id;
                    queue.push_back(m);
                }
            };
            if r > 0 {
                visit(n - cols);
            }
            if r + 1 < rows {
                visit(n + cols);
            }
            if c > 0 {
                visit(n - 1);
            }
            if c + 1 < cols {
                visit(n + 1);
            }
        }
        comp_pixels.push(members);
    }

    if min_size <= 1 || comp_pixels.len() <= 1 {
        return comp;
    }

    let mut sizes: Vec<usize> = comp_pixels.iter().map(Vec::len).collect();
    // Union-find over component ids, so merged fragments follow their
    // target through later merges.
    let mut parent: Vec<usize> = (0..comp_pixels.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    loop {
        // Smallest live fragment below the threshold, lowest id on ties.
        let mut fragment: Option<(usize, usize)> = None;
        #[allow(clippy::needless_range_loop)] // id also feeds the union-find
        for id in 0..sizes.len() {
            if find(&mut parent, id) != id || sizes[id] >= min_size {
                continue;
            }
            match fragment {
                Some((_, best)) if sizes[id] >= best => {}
                _ => fragment = Some((id, sizes[id])),
            }
        }
        let Some((frag, _)) = fragment else { break };

        // Largest adjacent live component, lowest id on ties.
        let mut best: Option<(usize, usize)> = None;
        for &n in &comp_pixels[frag] {
            let (r, c) = (n / cols, n % cols);
            let mut consider = |m: usize, parent: &mut Vec<usize>| {
                let root = find(parent, comp[m]);
                if root == frag {
                    return;
                }
                match best {
                    Some((bid, bsize)) if bsize > sizes[root] || (bsize == sizes[root] && bid <= root) => {}
                    _ => best = Some((root, sizes[root])),
                }
            };
            if r > 0 {
                consider(n - cols, &mut parent);
            }
            if r + 1 < rows {
                consider(n + cols, &mut parent);
            }
            if c > 0 {
                consider(n - 1, &mut parent);
            }
            if c + 1 < cols {
                consider(n + 1, &mut parent);
            }
        }
        let Some((target, _)) = best else { break };
        parent[frag] = target;
        sizes[target] += sizes[frag];
        let members = std::mem::take(&mut comp_pixels[frag]);
        for &n in &members {
            comp[n] = target;
        }
        comp_pixels[target].extend(members);
    }

    comp
}

/// Lloyd's K-means on the reflectance vectors with Euclidean distance and
/// k-means++ seeding; clusters need not be spatially connected. Empty
/// clusters are re-seeded from the point farthest from its own center.
pub fn kmeans_segment<T: Float>(
    image: &HyperspectralImage<T>,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<SegmentMap> {
    let pixels = image.pixels();
    if k == 0 || k >= pixels {
        return Err(Error::InvalidK { k, pixels });
    }
    let data = image.data();
    let bands = image.bands();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let dist_sq = |n: usize, center: &[T]| -> T {
        let mut d = T::zero();
        for b in 0..bands {
            let diff = data[(b, n)] - center[b];
            d += diff * diff;
        }
        d
    };
    let pixel_vec = |n: usize| -> Vec<T> { (0..bands).map(|b| data[(b, n)]).collect() };

    // k-means++ seeding: first center uniform, then each next center drawn
    // with probability proportional to the squared distance to the nearest
    // chosen center (cumulative-sum inversion of one uniform draw).
    let mut centers: Vec<Vec<T>> = Vec::with_capacity(k);
    centers.push(pixel_vec(rng.random_range(0..pixels)));
    let mut min_d: Vec<T> = (0..pixels).map(|n| dist_sq(n, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = min_d.iter().map(|d| d.to_f64().unwrap()).sum();
        let idx = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = pixels - 1;
            for (n, d) in min_d.iter().enumerate() {
                cum += d.to_f64().unwrap();
                if cum > r {
                    chosen = n;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..pixels)
        };
        centers.push(pixel_vec(idx));
        let c = centers.last().unwrap();
        for (n, best) in min_d.iter_mut().enumerate() {
            let d = dist_sq(n, c);
            if d < *best {
                *best = d;
            }
        }
    }

    let mut labels = vec![0usize; pixels];
    for _ in 0..iters.max(1) {
        // Assignment: nearest center, first index on ties. Pixels are
        // independent, so the parallel map is bit-identical to sequential.
        let new_labels: Vec<usize> = (0..pixels)
            .into_par_iter()
            .map(|n| {
                let mut best = T::infinity();
                let mut label = 0usize;
                for (kc, c) in centers.iter().enumerate() {
                    let d = dist_sq(n, c);
                    if d < best {
                        best = d;
                        label = kc;
                    }
                }
                label
            })
            .collect();
        let unchanged = new_labels == labels;
        labels = new_labels;

        // Update: mean of members, accumulated in pixel order.
        let mut sums: Vec<Vec<T>> = vec![vec![T::zero(); bands]; k];
        let mut counts = vec![0usize; k];
        for n in 0..pixels {
            let kc = labels[n];
            counts[kc] += 1;
            for b in 0..bands {
                sums[kc][b] += data[(b, n)];
            }
        }
        for kc in 0..k {
            if counts[kc] == 0 {
                // farthest point from its current center takes over
                let mut far_n = 0usize;
                let mut far_d = T::neg_infinity();
                for n in 0..pixels {
                    let d = dist_sq(n, &centers[labels[n]]);
                    if d > far_d {
                        far_d = d;
                        far_n = n;
                    }
                }
                centers[kc] = pixel_vec(far_n);
            } else {
                let inv = T::one() / T::from_usize(counts[kc]).unwrap();
                for b in 0..bands {
                    centers[kc][b] = sums[kc][b] * inv;
                }
            }
        }
        if unchanged {
            break;
        }
    }

    // A final assignment guarantees labels match the updated centers and
    // that no cluster is left empty after a re-seed on the last iteration.
    let final_labels: Vec<usize> = (0..pixels)
        .into_par_iter()
        .map(|n| {
            let mut best = T::infinity();
            let mut label = 0usize;
            for (kc, c) in centers.iter().enumerate() {
                let d = dist_sq(n, c);
                if d < best {
                    best = d;
                    label = kc;
                }
            }
            label
        })
        .collect();
    SegmentMap::from_labels(&final_labels)
}

/// Tiles the image into `ceil(rows/region_size) x ceil(cols/region_size)`
/// rectangular blocks; edge blocks are smaller.
pub fn grid_segment<T: Float>(
    image: &HyperspectralImage<T>,
    region_size: usize,
) -> Result<SegmentMap> {
    if region_size == 0 {
        return Err(Error::InvalidParameter("region_size must be >= 1".into()));
    }
    let (rows, cols) = (image.rows(), image.cols());
    let blocks_x = cols.div_ceil(region_size);
    let mut labels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            labels.push((r / region_size) * blocks_x + c / region_size);
        }
    }
    SegmentMap::from_labels(&labels)
}

/// Builds a segment map per the configured transform kind, all three
/// parameterized by the same `region_size` knob (K-means targets
/// `pixels / region_size^2` clusters).
pub fn build_segment_map<T: Float>(
    image: &HyperspectralImage<T>,
    kind: TransformKind,
    region_size: usize,
    seed: u64,
) -> Result<SegmentMap> {
    match kind {
        TransformKind::Slic => {
            let params = SlicParams {
                region_size,
                compactness: None,
                iters: 10,
                seed,
            };
            slic_segment(image, &params)
        }
        TransformKind::Kmeans => {
            let k = (image.pixels() / (region_size * region_size)).max(1);
            kmeans_segment(image, k, 10, seed)
        }
        TransformKind::Grid => grid_segment(image, region_size),
    }
}
