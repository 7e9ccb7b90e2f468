//! Cluster scoring, ordering, and the end-to-end proposal pipeline.
//!
//! Every surviving cluster is scored by the mean weighted activation of
//! its pixels **in the original heatmap** (red weighted above green), then
//! clusters are sorted by descending score and wrapped in tight bounding
//! boxes. [`propose_regions`] chains all stages: mask, component count,
//! smooth, feature grid, k-means, post-processing, ranking.

use serde::{Deserialize, Serialize};

use crate::activation::{active_mask, count_regions, label_components, ActiveMask, ComponentLabeling, RegionCount};
use crate::clustering::{
    build_feature_grid, gaussian_smooth, kmeans, postprocess_clusters, Cluster, ClusterSet,
    KMeansConfig,
};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::heatmap::Heatmap;

/// Knobs for the whole proposal pipeline. The defaults reproduce the
/// reference behaviour: high threshold 0.9, medium threshold 0.5, 11-tap
/// smoothing, a 150-pixel area floor, and activation weights 0.7 (red) /
/// 0.3 (green).
#[derive(Debug, Clone, PartialEq)]
pub struct RankingConfig {
    /// High threshold for the active mask (strict comparison).
    pub t_h: f64,
    /// Medium threshold for the feature grid (strict comparison).
    pub t_m: f64,
    /// Gaussian kernel size; must be odd.
    pub kernel_size: u32,
    /// Smoothing bandwidth; `None` derives it from the kernel size.
    pub sigma: Option<f64>,
    /// Minimum pixel count for components and cluster parts.
    pub min_area: usize,
    /// Red-channel weight in the activation score.
    pub w_r: f64,
    /// Green-channel weight in the activation score.
    pub w_g: f64,
    /// k-means parameters (iteration cap, seed, restarts).
    pub kmeans: KMeansConfig,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            t_h: 0.9,
            t_m: 0.5,
            kernel_size: 11,
            sigma: None,
            min_area: 150,
            w_r: 0.7,
            w_g: 0.3,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl RankingConfig {
    /// Checks threshold ranges, weights, and the area floor. Kernel and
    /// k-means parameters are validated where they are consumed.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_h", self.t_h), ("t_m", self.t_m)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::validation(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        for (name, v) in [("w_r", self.w_r), ("w_g", self.w_g)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if self.min_area == 0 {
            return Err(Error::validation("min_area must be at least 1"));
        }
        Ok(())
    }
}

/// A cluster with its activation score and tight bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCluster {
    pub cluster: Cluster,
    pub activation: f64,
    pub bounds: BoundingBox,
}

/// Clusters in rank order (highest activation first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedCandidates {
    pub candidates: Vec<ScoredCluster>,
}

impl RankedCandidates {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Candidate boxes in rank order.
    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.candidates.iter().map(|c| c.bounds).collect()
    }

    /// Wire-format records with 1-based ranks.
    pub fn records(&self) -> Vec<CandidateRecord> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, c)| CandidateRecord {
                rank: i + 1,
                bounds: c.bounds,
                activation: c.activation,
                area: c.cluster.size(),
            })
            .collect()
    }
}

/// One candidate as emitted on the wire: rank, box, score, pixel count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub rank: usize,
    #[serde(rename = "box")]
    pub bounds: BoundingBox,
    pub activation: f64,
    pub area: usize,
}

/// Mean weighted activation of a cluster over the original heatmap:
/// `w_r * mean(r) + w_g * mean(g)` across member pixels. Linear in the
/// pixel values and bounded by `w_r + w_g` for unit-interval channels.
/// Channels are summed separately so that clusters drawn from a uniform
/// field score exactly equal regardless of member count.
pub fn cluster_activation(cluster: &Cluster, h: &Heatmap, w_r: f64, w_g: f64) -> Result<f64> {
    if cluster.members.is_empty() {
        return Err(Error::validation(format!(
            "cluster {} has no members to score",
            cluster.id
        )));
    }
    let mut sum_r = 0.0;
    let mut sum_g = 0.0;
    for p in &cluster.members {
        if p.x >= h.width() || p.y >= h.height() {
            return Err(Error::validation(format!(
                "cluster {} member ({}, {}) lies outside the {}x{} heatmap",
                cluster.id,
                p.x,
                p.y,
                h.width(),
                h.height()
            )));
        }
        let [r, g, _] = h.get(p.x, p.y);
        sum_r += r;
        sum_g += g;
    }
    let n = cluster.members.len() as f64;
    Ok(w_r * (sum_r / n) + w_g * (sum_g / n))
}

/// Tight bounding box around a cluster's members.
pub fn tight_box(cluster: &Cluster) -> Result<BoundingBox> {
    BoundingBox::around(cluster.members.iter()).map_err(|_| {
        Error::validation(format!("cluster {} has no members to bound", cluster.id))
    })
}

/// Scores every cluster against the original heatmap and sorts by
/// descending activation. Ties break towards the larger pixel count, then
/// towards the smaller `(y0, x0)` box corner, making the order total and
/// deterministic.
pub fn rank_clusters(set: &ClusterSet, h: &Heatmap, cfg: &RankingConfig) -> Result<RankedCandidates> {
    cfg.validate()?;
    let mut scored = Vec::with_capacity(set.len());
    for cluster in &set.clusters {
        let activation = cluster_activation(cluster, h, cfg.w_r, cfg.w_g)?;
        let bounds = tight_box(cluster)?;
        scored.push(ScoredCluster {
            cluster: cluster.clone(),
            activation,
            bounds,
        });
    }
    scored.sort_by(|a, b| {
        b.activation
            .total_cmp(&a.activation)
            .then_with(|| b.cluster.size().cmp(&a.cluster.size()))
            .then_with(|| {
                (a.bounds.y0(), a.bounds.x0()).cmp(&(b.bounds.y0(), b.bounds.x0()))
            })
    });
    Ok(RankedCandidates { candidates: scored })
}

/// Intermediate products of one pipeline run, for diagnostics.
#[derive(Debug, Clone)]
pub struct ProposalTrace {
    pub mask: ActiveMask,
    pub labeling: ComponentLabeling,
    pub regions: RegionCount,
    /// Cluster budget implied by the component count.
    pub requested_k: usize,
    /// Budget actually used; smaller than requested when the feature grid
    /// has too few distinct entries, zero when clustering was skipped
    /// because no component met the area floor.
    pub effective_k: usize,
    pub clusters: ClusterSet,
    pub candidates: RankedCandidates,
}

/// Runs the full pipeline and keeps every intermediate stage.
///
/// When no active component meets the area floor there is nothing to
/// propose: clustering is skipped entirely and the candidate list is
/// empty (not an error).
pub fn propose_regions_traced(h: &Heatmap, cfg: &RankingConfig) -> Result<ProposalTrace> {
    cfg.validate()?;
    let mask = active_mask(h, cfg.t_h);
    let labeling = label_components(&mask);
    let regions = count_regions(&labeling, cfg.min_area);

    if regions.active_components == 0 {
        return Ok(ProposalTrace {
            mask,
            labeling,
            regions,
            requested_k: regions.k,
            effective_k: 0,
            clusters: ClusterSet::default(),
            candidates: RankedCandidates::default(),
        });
    }

    let smoothed = gaussian_smooth(h, cfg.kernel_size, cfg.sigma)?;
    let grid = build_feature_grid(&smoothed, cfg.t_m);
    let distinct = grid.distinct_features().len();
    let effective_k = regions.k.min(distinct);
    if effective_k < regions.k {
        log::warn!(
            "clamping k from {} to the {} distinct feature entries",
            regions.k,
            distinct
        );
    }
    let outcome = kmeans(&grid, effective_k, &cfg.kmeans)?;
    let clusters = postprocess_clusters(&grid, &outcome.assignments, cfg.min_area);
    let candidates = rank_clusters(&clusters, h, cfg)?;

    Ok(ProposalTrace {
        mask,
        labeling,
        regions,
        requested_k: regions.k,
        effective_k,
        clusters,
        candidates,
    })
}

/// Runs the full pipeline and returns the ranked candidates. Returns all
/// survivors, not just the leading three; downstream consumers decide how
/// deep to look.
pub fn propose_regions(h: &Heatmap, cfg: &RankingConfig) -> Result<RankedCandidates> {
    propose_regions_traced(h, cfg).map(|trace| trace.candidates)
}
