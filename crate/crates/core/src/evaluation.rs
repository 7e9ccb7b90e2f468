//! Candidate-versus-target scoring and manifest-level evaluation.
//!
//! A candidate matches a target through a distance-penalised IoU: the
//! plain overlap ratio minus the squared centre distance normalised by
//! the squared diagonal of the covering box. The score lives in
//! `[-1, 1]`; 1 means identical boxes, anything non-positive is a miss.
//! An entry counts as matched at rank *r* when the r-th candidate is the
//! first among the leading three with a strictly positive score.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::BoundingBox;
use crate::heatmap::load_heatmap;
use crate::manifest::{Difficulty, ManifestEntry};
use crate::ranking::{propose_regions, RankingConfig};

/// Method label stamped into reports produced by this pipeline.
pub const METHOD_LABEL: &str = "activation-clustering";

/// Distance-penalised IoU between two boxes: `IoU - d^2 / c^2`, where `d`
/// is the centre distance and `c` the diagonal of the smallest box
/// covering both, all in pixels.
///
/// The covering span counts pixels (inclusive corners), consistent with
/// how area and centre are measured; this keeps the denominator positive
/// even when both boxes are the same single pixel. Identical boxes score
/// exactly 1; disjoint boxes score strictly below 0.
pub fn match_score(candidate: &BoundingBox, target: &BoundingBox) -> f64 {
    let inter = candidate.intersection_area(target) as f64;
    let union = (candidate.area() + target.area()) as f64 - inter;
    let iou = inter / union;

    let (ax, ay) = candidate.center();
    let (bx, by) = target.center();
    let d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);

    let cover = candidate.covering(target);
    let (cw, ch) = (f64::from(cover.width()), f64::from(cover.height()));
    let c2 = cw * cw + ch * ch;

    iou - d2 / c2
}

/// Rank at which an entry was matched, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchRank {
    First,
    Second,
    Third,
    None,
}

impl fmt::Display for MatchRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MatchRank::First => "first",
            MatchRank::Second => "second",
            MatchRank::Third => "third",
            MatchRank::None => "none",
        };
        f.write_str(s)
    }
}

/// Outcome of matching one target against a candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub rank: MatchRank,
    /// Scores of the examined candidates, in rank order (at most three).
    pub scores: Vec<f64>,
}

/// First rank whose score is strictly positive; a score of exactly zero
/// is not a match.
fn first_positive_rank(scores: &[f64]) -> MatchRank {
    match scores.iter().position(|s| *s > 0.0) {
        Some(0) => MatchRank::First,
        Some(1) => MatchRank::Second,
        Some(2) => MatchRank::Third,
        _ => MatchRank::None,
    }
}

/// Scores the leading three candidates against the target and reports the
/// first strictly positive rank.
pub fn match_top3(candidates: &[BoundingBox], target: &BoundingBox) -> MatchOutcome {
    let scores: Vec<f64> = candidates
        .iter()
        .take(3)
        .map(|c| match_score(c, target))
        .collect();
    MatchOutcome {
        rank: first_positive_rank(&scores),
        scores,
    }
}

/// Match tallies for one slice of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub first: usize,
    pub second: usize,
    pub third: usize,
    pub none: usize,
}

impl OutcomeCounts {
    pub fn record(&mut self, rank: MatchRank) {
        match rank {
            MatchRank::First => self.first += 1,
            MatchRank::Second => self.second += 1,
            MatchRank::Third => self.third += 1,
            MatchRank::None => self.none += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.first + self.second + self.third + self.none
    }
}

/// Tallies broken down by difficulty bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DifficultyCounts {
    pub easy: OutcomeCounts,
    pub medium: OutcomeCounts,
    pub hard: OutcomeCounts,
}

impl DifficultyCounts {
    pub fn get(&self, d: Difficulty) -> &OutcomeCounts {
        match d {
            Difficulty::Easy => &self.easy,
            Difficulty::Medium => &self.medium,
            Difficulty::Hard => &self.hard,
        }
    }

    fn get_mut(&mut self, d: Difficulty) -> &mut OutcomeCounts {
        match d {
            Difficulty::Easy => &mut self.easy,
            Difficulty::Medium => &mut self.medium,
            Difficulty::Hard => &mut self.hard,
        }
    }
}

/// A manifest entry that could not be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    /// Position in the entry list (0-based).
    pub index: usize,
    pub image_id: String,
    pub message: String,
}

/// Full evaluation result. Serialises with a stable field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Label identifying the proposal method that produced the counts.
    pub method: String,
    pub overall: OutcomeCounts,
    pub per_difficulty: DifficultyCounts,
    /// Entries that were scored (errors excluded).
    pub entries_scored: usize,
    pub errors: Vec<EntryError>,
}

/// Evaluates every manifest entry: load the heatmap, propose regions,
/// match the leading three candidates against the target, and tally by
/// difficulty. Entries whose heatmap cannot be loaded — or whose target
/// box falls outside the image — are recorded under `errors` and excluded
/// from the tallies; the run always continues.
///
/// Relative heatmap paths are resolved against `base_dir`. Entries are
/// scored in parallel; the tallies and error order follow the manifest.
pub fn evaluate_manifest(
    entries: &[ManifestEntry],
    base_dir: &Path,
    cfg: &RankingConfig,
) -> Result<EvalReport> {
    cfg.validate()?;

    let outcomes: Vec<std::result::Result<(Difficulty, MatchRank), String>> = entries
        .par_iter()
        .map(|entry| {
            let raw = Path::new(&entry.heatmap_path);
            let resolved = if raw.is_absolute() {
                raw.to_path_buf()
            } else {
                base_dir.join(raw)
            };
            let heatmap = load_heatmap(&resolved).map_err(|e| e.to_string())?;
            if !entry.target_box.within(heatmap.width(), heatmap.height()) {
                return Err(format!(
                    "target box {:?} exceeds the {}x{} image",
                    entry.target_box.corners(),
                    heatmap.width(),
                    heatmap.height()
                ));
            }
            let candidates = propose_regions(&heatmap, cfg).map_err(|e| e.to_string())?;
            let outcome = match_top3(&candidates.boxes(), &entry.target_box);
            Ok((entry.difficulty, outcome.rank))
        })
        .collect();

    let mut report = EvalReport {
        method: METHOD_LABEL.to_string(),
        overall: OutcomeCounts::default(),
        per_difficulty: DifficultyCounts::default(),
        entries_scored: 0,
        errors: Vec::new(),
    };
    for (index, (entry, outcome)) in entries.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok((difficulty, rank)) => {
                report.overall.record(rank);
                report.per_difficulty.get_mut(difficulty).record(rank);
                report.entries_scored += 1;
            }
            Err(message) => report.errors.push(EntryError {
                index,
                image_id: entry.image_id.clone(),
                message,
            }),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PixelCoord;
    use crate::synth::{generate, BlobSpec, Falloff, SynthScene};
    use proptest::prelude::*;

    fn bb(x0: u32, y0: u32, x1: u32, y1: u32) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn identical_boxes_score_exactly_one() {
        for b in [bb(0, 0, 9, 9), bb(3, 7, 3, 7), bb(1, 2, 300, 40)] {
            assert_eq!(match_score(&b, &b), 1.0);
        }
    }

    #[test]
    fn disjoint_boxes_score_the_negative_distance_penalty() {
        // IoU 0; centres (1,1) and (5,5) give d^2 = 32; the covering box
        // (0,0,6,6) spans 7x7 pixels, so c^2 = 98.
        let s = match_score(&bb(0, 0, 2, 2), &bb(4, 4, 6, 6));
        assert!((s - (-32.0 / 98.0)).abs() < 1e-12, "got {s}");
        assert!(s < 0.0);
    }

    #[test]
    fn partial_overlap_scores_iou_minus_penalty() {
        // Intersection 50, union 100, IoU 0.5; centres (4.5,4.5) and
        // (2,4.5) give d^2 = 6.25; covering box (0,0,9,9) spans 10x10, so
        // c^2 = 200 and the penalty is exactly 0.03125.
        let s = match_score(&bb(0, 0, 9, 9), &bb(0, 0, 4, 9));
        assert_eq!(s, 0.46875);
    }

    #[test]
    fn first_positive_rank_is_strict() {
        assert_eq!(first_positive_rank(&[]), MatchRank::None);
        assert_eq!(first_positive_rank(&[0.3]), MatchRank::First);
        assert_eq!(first_positive_rank(&[0.0, 0.5]), MatchRank::Second);
        assert_eq!(first_positive_rank(&[-1.0, -0.5, 1e-12]), MatchRank::Third);
        assert_eq!(first_positive_rank(&[-0.1, 0.0, 0.0]), MatchRank::None);
    }

    #[test]
    fn match_top3_reports_the_first_hit() {
        let target = bb(10, 10, 19, 19);
        let far = bb(50, 50, 59, 59);
        let outcome = match_top3(&[target], &target);
        assert_eq!(outcome.rank, MatchRank::First);
        assert_eq!(outcome.scores, vec![1.0]);

        let outcome = match_top3(&[far, target, far], &target);
        assert_eq!(outcome.rank, MatchRank::Second);
        assert_eq!(outcome.scores.len(), 3);

        let outcome = match_top3(&[], &target);
        assert_eq!(outcome.rank, MatchRank::None);
        assert!(outcome.scores.is_empty());
    }

    #[test]
    fn only_the_leading_three_candidates_count() {
        let target = bb(70, 70, 79, 79);
        let miss = |i: u32| bb(i * 10, 0, i * 10 + 5, 5);
        let candidates = vec![miss(0), miss(1), miss(2), target];
        let outcome = match_top3(&candidates, &target);
        assert_eq!(outcome.rank, MatchRank::None);
        assert_eq!(outcome.scores.len(), 3);
    }

    proptest! {
        #[test]
        fn score_is_symmetric_and_bounded(
            (ax0, ay0, aw, ah) in (0u32..60, 0u32..60, 0u32..20, 0u32..20),
            (bx0, by0, bw, bh) in (0u32..60, 0u32..60, 0u32..20, 0u32..20),
        ) {
            let a = bb(ax0, ay0, ax0 + aw, ay0 + ah);
            let b = bb(bx0, by0, bx0 + bw, by0 + bh);
            let s_ab = match_score(&a, &b);
            let s_ba = match_score(&b, &a);
            prop_assert!((s_ab - s_ba).abs() < 1e-15);
            prop_assert!((-1.0..=1.0).contains(&s_ab));
            if a.intersection_area(&b) == 0 {
                prop_assert!(s_ab < 0.0, "disjoint boxes must score negative");
            }
        }

        #[test]
        fn score_is_translation_invariant(
            (ax0, ay0, aw, ah) in (0u32..40, 0u32..40, 0u32..15, 0u32..15),
            (bx0, by0, bw, bh) in (0u32..40, 0u32..40, 0u32..15, 0u32..15),
            (dx, dy) in (0u32..50, 0u32..50),
        ) {
            let a = bb(ax0, ay0, ax0 + aw, ay0 + ah);
            let b = bb(bx0, by0, bx0 + bw, by0 + bh);
            let a2 = bb(ax0 + dx, ay0 + dy, ax0 + aw + dx, ay0 + ah + dy);
            let b2 = bb(bx0 + dx, by0 + dy, bx0 + bw + dx, by0 + bh + dy);
            prop_assert!((match_score(&a, &b) - match_score(&a2, &b2)).abs() < 1e-12);
        }

        /// Scaling boxes as half-open pixel ranges by an integer factor
        /// leaves the score unchanged: every length in the formula scales
        /// by the same factor.
        #[test]
        fn score_is_scale_invariant(
            (ax0, ay0, aw, ah) in (0u32..30, 0u32..30, 0u32..10, 0u32..10),
            (bx0, by0, bw, bh) in (0u32..30, 0u32..30, 0u32..10, 0u32..10),
            factor in 2u32..6,
        ) {
            let scale = |x0: u32, y0: u32, x1: u32, y1: u32| {
                bb(x0 * factor, y0 * factor, (x1 + 1) * factor - 1, (y1 + 1) * factor - 1)
            };
            let a = bb(ax0, ay0, ax0 + aw, ay0 + ah);
            let b = bb(bx0, by0, bx0 + bw, by0 + bh);
            let a2 = scale(ax0, ay0, ax0 + aw, ay0 + ah);
            let b2 = scale(bx0, by0, bx0 + bw, by0 + bh);
            prop_assert!((match_score(&a, &b) - match_score(&a2, &b2)).abs() < 1e-12);
        }
    }

    // ── Manifest evaluation ─────────────────────────────────────────

    /// Writes a flat-blob heatmap to `dir` and returns its entry.
    fn fixture_entry(
        dir: &Path,
        name: &str,
        center: (u32, u32),
        target: BoundingBox,
        difficulty: Difficulty,
    ) -> ManifestEntry {
        let scene = SynthScene {
            width: 96,
            height: 96,
            blobs: vec![BlobSpec {
                center: PixelCoord::new(center.0, center.1),
                radius_x: 12,
                radius_y: 12,
                peak_r: 1.0,
                peak_g: 0.0,
                falloff: Falloff::Flat,
            }],
            noise_amplitude: 0.0,
            seed: 1,
        };
        let (heatmap, _) = generate(&scene).unwrap();
        let path = dir.join(format!("{name}.png"));
        heatmap.save_png(&path).unwrap();
        ManifestEntry {
            image_id: name.to_string(),
            heatmap_path: format!("{name}.png"),
            expression: "synthetic blob".into(),
            target_box: target,
            difficulty,
        }
    }

    #[test]
    fn scored_entries_land_in_their_difficulty_bucket() {
        let dir = tempfile::tempdir().unwrap();
        // A flat blob at (40, 40) with radius 12 fills the open ellipse,
        // whose tight box is (29, 29, 51, 51).
        let planted = bb(29, 29, 51, 51);
        let entries = vec![
            fixture_entry(dir.path(), "a", (40, 40), planted, Difficulty::Easy),
            fixture_entry(dir.path(), "b", (40, 40), planted, Difficulty::Hard),
        ];
        let report =
            evaluate_manifest(&entries, dir.path(), &RankingConfig::default()).unwrap();
        assert_eq!(report.method, METHOD_LABEL);
        assert_eq!(report.entries_scored, 2);
        assert!(report.errors.is_empty());
        assert_eq!(report.overall.first, 2);
        assert_eq!(report.per_difficulty.easy.first, 1);
        assert_eq!(report.per_difficulty.hard.first, 1);
        assert_eq!(report.per_difficulty.medium, OutcomeCounts::default());
    }

    #[test]
    fn unreadable_heatmaps_become_entry_errors() {
        let dir = tempfile::tempdir().unwrap();
        let planted = bb(29, 29, 51, 51);
        let mut entries = vec![fixture_entry(
            dir.path(),
            "ok",
            (40, 40),
            planted,
            Difficulty::Easy,
        )];
        entries.push(ManifestEntry {
            image_id: "ghost".into(),
            heatmap_path: "missing.png".into(),
            expression: "x".into(),
            target_box: planted,
            difficulty: Difficulty::Easy,
        });
        let report =
            evaluate_manifest(&entries, dir.path(), &RankingConfig::default()).unwrap();
        assert_eq!(report.entries_scored, 1);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].index, 1);
        assert_eq!(report.errors[0].image_id, "ghost");
        assert_eq!(report.overall.total(), 1);
    }

    #[test]
    fn out_of_bounds_target_is_an_entry_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut entry = fixture_entry(
            dir.path(),
            "oob",
            (40, 40),
            bb(29, 29, 51, 51),
            Difficulty::Medium,
        );
        entry.target_box = bb(90, 90, 96, 96); // image is 96x96
        let report =
            evaluate_manifest(&[entry], dir.path(), &RankingConfig::default()).unwrap();
        assert_eq!(report.entries_scored, 0);
        assert_eq!(report.errors.len(), 1);
        assert!(report.errors[0].message.contains("target box"));
    }

    #[test]
    fn empty_manifest_produces_an_empty_report() {
        let report =
            evaluate_manifest(&[], Path::new("."), &RankingConfig::default()).unwrap();
        assert_eq!(report.entries_scored, 0);
        assert_eq!(report.overall.total(), 0);
        assert!(report.errors.is_empty());
    }

    #[test]
    fn report_serialisation_round_trips_with_stable_keys() {
        let dir = tempfile::tempdir().unwrap();
        let planted = bb(29, 29, 51, 51);
        let entries = vec![fixture_entry(
            dir.path(),
            "r",
            (40, 40),
            planted,
            Difficulty::Easy,
        )];
        let report =
            evaluate_manifest(&entries, dir.path(), &RankingConfig::default()).unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        // Field order is fixed by the struct definition.
        let method_pos = json.find("\"method\"").unwrap();
        let overall_pos = json.find("\"overall\"").unwrap();
        let per_difficulty_pos = json.find("\"per_difficulty\"").unwrap();
        assert!(method_pos < overall_pos && overall_pos < per_difficulty_pos);
    }
}
