//! Smoothing, feature extraction, k-means, and cluster clean-up.
//!
//! The clustering stage works on a Gaussian-smoothed copy of the heatmap:
//! every pixel above the medium threshold contributes a 5-dimensional
//! feature `(x_n, y_n, r, g, b)` with normalised coordinates, and every
//! other pixel contributes the zero vector. K-means runs over *all*
//! entries (zeros included) so one cluster absorbs the background; that
//! cluster is removed afterwards, remaining clusters are split into
//! 8-connected parts, and parts below the area floor are discarded.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;
use crate::heatmap::Heatmap;

// ── Gaussian smoothing ──────────────────────────────────────────────────

/// Default bandwidth for a given odd kernel size:
/// `0.3 * ((size - 1) / 2 - 1) + 0.8`, which gives sigma 2.0 for the
/// standard 11-tap kernel.
pub fn default_sigma(kernel_size: u32) -> f64 {
    0.3 * ((f64::from(kernel_size) - 1.0) / 2.0 - 1.0) + 0.8
}

fn gaussian_kernel(kernel_size: u32, sigma: f64) -> Vec<f64> {
    let radius = (kernel_size / 2) as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|offset| (-((offset * offset) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// One separable convolution pass along an axis with replicated edges.
///
/// The kernel is a convex combination, so each output value lies between
/// the window's minimum and maximum; clamping to that range removes only
/// floating-point dust, which keeps constant inputs bit-identical and the
/// output inside `[0, 1]` whenever the input is.
fn convolve_axis(
    pixels: &[[f64; 3]],
    width: usize,
    height: usize,
    kernel: &[f64],
    horizontal: bool,
) -> Vec<[f64; 3]> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![[0.0f64; 3]; pixels.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = [0.0f64; 3];
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for (j, w) in kernel.iter().enumerate() {
                let offset = j as i64 - radius;
                let (sx, sy) = if horizontal {
                    ((x as i64 + offset).clamp(0, width as i64 - 1), y as i64)
                } else {
                    (x as i64, (y as i64 + offset).clamp(0, height as i64 - 1))
                };
                let sample = pixels[sy as usize * width + sx as usize];
                for c in 0..3 {
                    acc[c] += w * sample[c];
                    lo[c] = lo[c].min(sample[c]);
                    hi[c] = hi[c].max(sample[c]);
                }
            }
            let idx = y * width + x;
            for c in 0..3 {
                out[idx][c] = acc[c].clamp(lo[c], hi[c]);
            }
        }
    }
    out
}

/// Smooths all three channels with a normalised Gaussian kernel,
/// replicating edge pixels at the border. `kernel_size` must be odd;
/// a size of 1 is the identity. Pass `None` for sigma to use
/// [`default_sigma`].
pub fn gaussian_smooth(h: &Heatmap, kernel_size: u32, sigma: Option<f64>) -> Result<Heatmap> {
    if kernel_size == 0 || kernel_size.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "kernel size must be odd and positive, got {kernel_size}"
        )));
    }
    let sigma = sigma.unwrap_or_else(|| default_sigma(kernel_size));
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::validation(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    let kernel = gaussian_kernel(kernel_size, sigma);
    let (w, h_px) = (h.width() as usize, h.height() as usize);
    let horizontal = convolve_axis(h.pixels(), w, h_px, &kernel, true);
    let smoothed = convolve_axis(&horizontal, w, h_px, &kernel, false);
    Heatmap::new(h.width(), h.height(), smoothed)
}

// ── Feature grid ────────────────────────────────────────────────────────

/// Per-pixel feature vectors over the smoothed heatmap. Pixels passing the
/// medium threshold carry `(x_n, y_n, r, g, b)`; all others carry the zero
/// vector and are flagged inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    width: u32,
    height: u32,
    features: Vec<[f64; 5]>,
    active: Vec<bool>,
}

impl FeatureGrid {
    /// Assembles a grid from precomputed parts. Inactive entries must be
    /// zero vectors; lengths must match the dimensions.
    pub fn from_parts(
        width: u32,
        height: u32,
        features: Vec<[f64; 5]>,
        active: Vec<bool>,
    ) -> Result<Self> {
        let expected = width as usize * height as usize;
        if features.len() != expected || active.len() != expected {
            return Err(Error::validation(format!(
                "feature grid parts disagree: {} features, {} flags, {expected} cells",
                features.len(),
                active.len()
            )));
        }
        if let Some(i) = (0..expected).find(|&i| !active[i] && features[i] != [0.0; 5]) {
            return Err(Error::validation(format!(
                "inactive cell {i} carries a non-zero feature"
            )));
        }
        Ok(FeatureGrid {
            width,
            height,
            features,
            active,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.features.len()
    }

    /// Row-major feature slice (zero vectors for inactive cells).
    pub fn features(&self) -> &[[f64; 5]] {
        &self.features
    }

    /// Row-major activity flags (true = passed the medium threshold).
    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn feature_at(&self, x: u32, y: u32) -> [f64; 5] {
        self.features[y as usize * self.width as usize + x as usize]
    }

    pub fn is_active(&self, x: u32, y: u32) -> bool {
        self.active[y as usize * self.width as usize + x as usize]
    }

    /// Distinct feature values in first-occurrence order. All zero-vector
    /// cells collapse into a single entry.
    pub fn distinct_features(&self) -> Vec<[f64; 5]> {
        let mut seen = HashSet::new();
        let mut distinct = Vec::new();
        for f in &self.features {
            if seen.insert(f.map(f64::to_bits)) {
                distinct.push(*f);
            }
        }
        distinct
    }
}

/// Lifts a smoothed heatmap into a [`FeatureGrid`] with threshold `t_m`.
///
/// A pixel is active when red **or** green strictly exceeds `t_m`.
/// Coordinates are normalised as `x / (width - 1)` so corners map to 0
/// and 1; single-pixel axes normalise to 0 rather than dividing by zero.
pub fn build_feature_grid(h_g: &Heatmap, t_m: f64) -> FeatureGrid {
    let (w, h) = (h_g.width(), h_g.height());
    let norm = |v: u32, extent: u32| {
        if extent > 1 {
            f64::from(v) / f64::from(extent - 1)
        } else {
            0.0
        }
    };
    let mut features = Vec::with_capacity(h_g.pixel_count());
    let mut active = Vec::with_capacity(h_g.pixel_count());
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = h_g.get(x, y);
            if r > t_m || g > t_m {
                features.push([norm(x, w), norm(y, h), r, g, b]);
                active.push(true);
            } else {
                features.push([0.0; 5]);
                active.push(false);
            }
        }
    }
    FeatureGrid {
        width: w,
        height: h,
        features,
        active,
    }
}

// ── K-means ─────────────────────────────────────────────────────────────

/// Lloyd-iteration parameters. Defaults: 300 iterations, seed 0, exact
/// assignment-fixpoint convergence, a single restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    /// Hard cap on Lloyd iterations per restart.
    pub max_iterations: usize,
    /// Seed for centroid initialisation (and nothing else).
    pub seed: u64,
    /// Optional early stop: when positive, iteration also ends once the
    /// SSE improvement between consecutive iterations drops to this value
    /// or below. Zero means run to the exact assignment fixpoint.
    pub convergence_epsilon: f64,
    /// Independent runs; the outcome with the lowest final SSE wins, ties
    /// going to the earliest run.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iterations: 300,
            seed: 0,
            convergence_epsilon: 0.0,
            restarts: 1,
        }
    }
}

/// Result of a k-means run over a feature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    /// Cluster index in `0..k` for every grid cell, row-major.
    pub assignments: Vec<u32>,
    pub centroids: Vec<[f64; 5]>,
    /// Within-cluster sum of squared distances after each assignment
    /// step; non-increasing from start to finish.
    pub sse_history: Vec<f64>,
    /// Assignment steps performed.
    pub iterations: usize,
    /// True when iteration stopped at a fixpoint (or epsilon stop) rather
    /// than the iteration cap.
    pub converged: bool,
}

impl KMeansOutcome {
    /// Final SSE (the last recorded assignment step).
    pub fn final_sse(&self) -> f64 {
        *self.sse_history.last().expect("at least one iteration runs")
    }
}

fn squared_distance(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    let mut acc = 0.0;
    for c in 0..5 {
        let d = a[c] - b[c];
        acc += d * d;
    }
    acc
}

/// Nearest centroid by squared Euclidean distance; ties go to the lowest
/// centroid index so assignment is deterministic.
fn nearest_centroid(centroids: &[[f64; 5]], f: &[f64; 5]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d2 = squared_distance(c, f);
        if d2 < best_d2 {
            best = i;
            best_d2 = d2;
        }
    }
    (best, best_d2)
}

/// One full Lloyd run from the given initial centroids.
fn run_lloyd(cells: &[[f64; 5]], init: Vec<[f64; 5]>, cfg: &KMeansConfig) -> KMeansOutcome {
    let k = init.len();
    let mut centroids = init;
    let mut assignments = vec![u32::MAX; cells.len()];
    let mut sse_history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;

        // Assignment step; SSE is measured against the centroids the
        // assignment was made with.
        let mut changed = 0usize;
        let mut sse = 0.0;
        for (i, f) in cells.iter().enumerate() {
            let (best, d2) = nearest_centroid(&centroids, f);
            sse += d2;
            if assignments[i] != best as u32 {
                assignments[i] = best as u32;
                changed += 1;
            }
        }
        if let Some(prev) = sse_history.last() {
            // Each Lloyd step minimises the objective for one block of
            // variables, so the recorded SSE can only go down (up to
            // floating-point dust).
            debug_assert!(sse <= prev + 1e-9, "SSE rose from {prev} to {sse}");
        }
        let improvement = sse_history.last().map(|prev| prev - sse);
        sse_history.push(sse);

        if changed == 0 {
            converged = true;
            break;
        }
        if cfg.convergence_epsilon > 0.0 {
            if let Some(improvement) = improvement {
                if improvement <= cfg.convergence_epsilon {
                    converged = true;
                    break;
                }
            }
        }

        // Update step: move each centroid to the mean of its members.
        let mut sums = vec![[0.0f64; 5]; k];
        let mut counts = vec![0usize; k];
        for (f, a) in cells.iter().zip(&assignments) {
            let a = *a as usize;
            counts[a] += 1;
            for c in 0..5 {
                sums[a][c] += f[c];
            }
        }
        for i in 0..k {
            if counts[i] > 0 {
                centroids[i] = sums[i].map(|s| s / counts[i] as f64);
            }
        }

        // Empty-cluster repair: reseed each starved centroid to the entry
        // farthest from its own assigned centroid. Already-used entries
        // are skipped so two empty centroids never collapse onto the same
        // point.
        let mut reseeded: Vec<usize> = Vec::new();
        for i in 0..k {
            if counts[i] > 0 {
                continue;
            }
            let mut far_idx = None;
            let mut far_d2 = -1.0;
            for (j, f) in cells.iter().enumerate() {
                if reseeded.contains(&j) {
                    continue;
                }
                let d2 = squared_distance(f, &centroids[assignments[j] as usize]);
                if d2 > far_d2 {
                    far_d2 = d2;
                    far_idx = Some(j);
                }
            }
            if let Some(j) = far_idx {
                centroids[i] = cells[j];
                reseeded.push(j);
            }
        }
    }

    KMeansOutcome {
        assignments,
        centroids,
        sse_history,
        iterations,
        converged,
    }
}

/// Clusters the feature grid into `k` groups with Lloyd's algorithm.
///
/// All cells participate, zero vectors included. Initial centroids are
/// drawn uniformly without replacement from the grid's *distinct* feature
/// values using `cfg.seed`; `k` may not exceed the distinct count. With
/// multiple restarts, each run draws fresh centroids from the same seeded
/// stream and the lowest final SSE wins.
pub fn kmeans(grid: &FeatureGrid, k: usize, cfg: &KMeansConfig) -> Result<KMeansOutcome> {
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if cfg.max_iterations == 0 {
        return Err(Error::validation("max_iterations must be at least 1"));
    }
    if cfg.restarts == 0 {
        return Err(Error::validation("restarts must be at least 1"));
    }
    if !(cfg.convergence_epsilon >= 0.0 && cfg.convergence_epsilon.is_finite()) {
        return Err(Error::validation(format!(
            "convergence epsilon must be finite and non-negative, got {}",
            cfg.convergence_epsilon
        )));
    }
    let distinct = grid.distinct_features();
    if k > distinct.len() {
        return Err(Error::validation(format!(
            "k={k} exceeds the {} distinct feature entries",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansOutcome> = None;
    for _ in 0..cfg.restarts {
        // Partial Fisher–Yates: the first k slots end up holding a
        // uniform sample without replacement.
        let mut indices: Vec<usize> = (0..distinct.len()).collect();
        for i in 0..k {
            let j = rng.random_range(i..indices.len());
            indices.swap(i, j);
        }
        let init: Vec<[f64; 5]> = indices[..k].iter().map(|&i| distinct[i]).collect();
        let outcome = run_lloyd(grid.features(), init, cfg);
        let better = match &best {
            None => true,
            Some(b) => outcome.final_sse() < b.final_sse(),
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart runs"))
}

// ── Cluster post-processing ─────────────────────────────────────────────

/// A connected group of active pixels surviving post-processing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Sequential id starting at 1, in raster discovery order.
    pub id: u32,
    /// Member pixels, raster-sorted, no duplicates.
    pub members: Vec<PixelCoord>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Clusters remaining after background removal, connectivity splitting,
/// and the area floor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Cleans up a raw k-means partition:
///
/// 1. every cluster containing a zero-vector (inactive) cell is dropped —
///    all zero vectors are identical, so they land in one cluster, which
///    is exactly the absorbed background;
/// 2. each remaining cluster is split into 8-connected parts;
/// 3. parts with fewer than `min_area` pixels are discarded.
///
/// Surviving parts are renumbered from 1 in raster discovery order.
pub fn postprocess_clusters(
    grid: &FeatureGrid,
    assignments: &[u32],
    min_area: usize,
) -> ClusterSet {
    assert_eq!(
        assignments.len(),
        grid.cell_count(),
        "assignment raster must match the grid"
    );
    let background: HashSet<u32> = assignments
        .iter()
        .zip(grid.active())
        .filter(|(_, active)| !**active)
        .map(|(a, _)| *a)
        .collect();

    // Flood-fill same-assignment active regions in raster order, reusing
    // the connected-component machinery on one cluster id at a time would
    // rescan the raster per id; a single constrained pass is enough.
    let (w, h) = (grid.width() as usize, grid.height() as usize);
    let mut visited = vec![false; assignments.len()];
    let mut parts: Vec<Vec<PixelCoord>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..assignments.len() {
        if visited[start] || !grid.active()[start] || background.contains(&assignments[start]) {
            continue;
        }
        let id = assignments[start];
        let mut members = Vec::new();
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            members.push(PixelCoord::new(x as u32, y as u32));
            for (dx, dy) in [
                (-1i64, -1i64),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && grid.active()[nidx] && assignments[nidx] == id {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        if members.len() >= min_area {
            members.sort_unstable_by_key(|p| (p.y, p.x));
            parts.push(members);
        }
    }

    let clusters = parts
        .into_iter()
        .enumerate()
        .map(|(i, members)| Cluster {
            id: i as u32 + 1,
            members,
        })
        .collect();
    ClusterSet { clusters }
}
