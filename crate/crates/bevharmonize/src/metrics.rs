//! BEV detection evaluation.
//!
//! Matching and scoring follow the standard surround-view protocol:
//! detections and ground truth are compared per category in the
//! bird's-eye-view plane, inside a square evaluation range. A detection
//! is a true positive when its BEV center lies strictly within a distance
//! threshold of an unmatched same-sample ground-truth box, matched
//! greedily in descending score order. AP interpolates precision over 101
//! recall points with 10% recall/precision floors and averages over the
//! distance thresholds {0.5, 1, 2, 4} m; translation / scale /
//! orientation errors are means over the pairs matched at 2 m. The
//! combined per-category score is
//!
//! ```text
//! (1/6) * [3*AP + sum over {ATE, ASE, AOE} of (1 - min(1, err))]
//! ```
//!
//! and `mAP` / the mean combined score average over categories that have
//! ground truth, in fixed category order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::{Category, CategoryMap};
use crate::dataset::{BoxRecord, DatasetManifest};
use crate::geometry::{wrap_angle, Box3D};
use crate::record::{self, RecordError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("detection score {score} outside [0, 1]")]
    InvalidScore { score: f64 },
    #[error("detection references unknown sample id '{sample_id}'")]
    UnknownSampleId { sample_id: String },
    #[error("no ground-truth boxes in range for any category")]
    EmptyGroundTruth,
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{path}:{line}: {message}")]
    InvalidDetection {
        path: String,
        line: usize,
        message: String,
    },
}

/// A scored box prediction for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub sample_id: String,
    pub bbox: Box3D,
    pub score: f64,
}

impl Detection {
    pub fn new(sample_id: String, bbox: Box3D, score: f64) -> Result<Self, MetricsError> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(MetricsError::InvalidScore { score });
        }
        Ok(Self {
            sample_id,
            bbox,
            score,
        })
    }
}

/// Anything with a BEV center that can be range-filtered.
pub trait BevCenter {
    fn bev_center(&self) -> (f64, f64);
}

impl BevCenter for Box3D {
    fn bev_center(&self) -> (f64, f64) {
        (self.center.x, self.center.y)
    }
}

impl BevCenter for Detection {
    fn bev_center(&self) -> (f64, f64) {
        self.bbox.bev_center()
    }
}

/// Keep items whose BEV center has |x| <= bound and |y| <= bound
/// (closed interval).
pub fn filter_range<T: BevCenter>(items: impl IntoIterator<Item = T>, bound_m: f64) -> Vec<T> {
    items
        .into_iter()
        .filter(|item| {
            let (x, y) = item.bev_center();
            x.abs() <= bound_m && y.abs() <= bound_m
        })
        .collect()
}

fn bev_distance(a: &Box3D, b: &Box3D) -> f64 {
    let (ax, ay) = a.bev_center();
    let (bx, by) = b.bev_center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// One detection's fate after matching, in descending-score order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub score: f64,
    pub true_positive: bool,
}

/// A matched (ground truth, detection) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub distance: f64,
    pub gt: Box3D,
    pub det: Box3D,
}

/// Result of greedy matching at one distance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Outcomes sorted by (score desc, sample_id, insertion index).
    pub outcomes: Vec<DetectionOutcome>,
    pub pairs: Vec<MatchedPair>,
    pub n_gt: usize,
}

/// Greedily match detections to ground truth per sample.
///
/// Inputs are assumed pre-filtered to a single category and the
/// evaluation range. Detections are visited in descending score order
/// (ties broken by sample id, then input position); each becomes a TP iff
/// the nearest unmatched ground-truth box of its sample is strictly
/// within `threshold_m` meters in BEV.
pub fn match_detections(
    gts: &BTreeMap<String, Vec<Box3D>>,
    dets: &[Detection],
    threshold_m: f64,
) -> MatchResult {
    let n_gt = gts.values().map(Vec::len).sum();

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .expect("finite scores")
            .then_with(|| dets[i].sample_id.cmp(&dets[j].sample_id))
            .then_with(|| i.cmp(&j))
    });

    let mut matched: HashMap<&str, Vec<bool>> = gts
        .iter()
        .map(|(id, boxes)| (id.as_str(), vec![false; boxes.len()]))
        .collect();

    let mut outcomes = Vec::with_capacity(dets.len());
    let mut pairs = Vec::new();
    for &i in &order {
        let det = &dets[i];
        let mut best: Option<(f64, usize)> = None;
        if let Some(boxes) = gts.get(&det.sample_id) {
            let taken = matched.get_mut(det.sample_id.as_str()).expect("same keys");
            for (gi, gt) in boxes.iter().enumerate() {
                if taken[gi] {
                    continue;
                }
                let dist = bev_distance(gt, &det.bbox);
                if best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, gi));
                }
            }
            if let Some((dist, gi)) = best {
                if dist < threshold_m {
                    taken[gi] = true;
                    pairs.push(MatchedPair {
                        distance: dist,
                        gt: boxes[gi].clone(),
                        det: det.bbox.clone(),
                    });
                    outcomes.push(DetectionOutcome {
                        score: det.score,
                        true_positive: true,
                    });
                    continue;
                }
            }
        }
        outcomes.push(DetectionOutcome {
            score: det.score,
            true_positive: false,
        });
    }
    MatchResult {
        outcomes,
        pairs,
        n_gt,
    }
}

/// Default floors of the AP integration: operating points below 10%
/// recall or 10% precision are clipped away.
pub const AP_MIN_RECALL: f64 = 0.1;
pub const AP_MIN_PRECISION: f64 = 0.1;

/// Average precision over the interpolated precision-recall curve.
///
/// Cumulative TP/FP counts in descending score order give the operating
/// points; precision is linearly interpolated at 101 evenly spaced recall
/// points (0 beyond the last achieved recall), clipped by the floors, and
/// averaged. Returns `None` when there is no ground truth (AP undefined).
pub fn average_precision(matches: &MatchResult) -> Option<f64> {
    average_precision_with_floors(matches, AP_MIN_RECALL, AP_MIN_PRECISION)
}

pub fn average_precision_with_floors(
    matches: &MatchResult,
    min_recall: f64,
    min_precision: f64,
) -> Option<f64> {
    if matches.n_gt == 0 {
        return None;
    }
    let mut recall = Vec::with_capacity(matches.outcomes.len());
    let mut precision = Vec::with_capacity(matches.outcomes.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for outcome in &matches.outcomes {
        if outcome.true_positive {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / matches.n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }

    let start = (100.0 * min_recall).round() as usize + 1;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in start..=100 {
        let p = interp_precision(&recall, &precision, i as f64 / 100.0);
        acc += (p - min_precision).max(0.0);
        count += 1;
    }
    Some((acc / count as f64 / (1.0 - min_precision)).clamp(0.0, 1.0))
}

/// Linear interpolation of the PR curve at recall `r`, with value 0 past
/// the last achieved recall and the first precision before the first.
/// Duplicate recall values (FP runs) resolve to the last occurrence.
fn interp_precision(recall: &[f64], precision: &[f64], r: f64) -> f64 {
    if recall.is_empty() || r > *recall.last().unwrap() {
        return 0.0;
    }
    if r < recall[0] {
        return precision[0];
    }
    // last index j with recall[j] <= r
    let j = recall.partition_point(|&x| x <= r) - 1;
    if j + 1 == recall.len() {
        return precision[j];
    }
    let (x0, x1) = (recall[j], recall[j + 1]);
    // x1 > r >= x0 here, so the segment is never flat
    precision[j] + (precision[j + 1] - precision[j]) * (r - x0) / (x1 - x0)
}

/// Mean translation / scale / orientation errors over matched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpErrors {
    /// Mean BEV center distance, meters.
    pub ate: f64,
    /// Mean (1 - IoU) of the size boxes after aligning center and yaw.
    pub ase: f64,
    /// Mean smallest absolute yaw difference, radians in [0, pi].
    pub aoe: f64,
}

/// TP errors over `pairs`; zero pairs give the worst case (1, 1, 1),
/// which the combined score clamps to zero contribution.
pub fn tp_errors(pairs: &[MatchedPair]) -> TpErrors {
    if pairs.is_empty() {
        return TpErrors {
            ate: 1.0,
            ase: 1.0,
            aoe: 1.0,
        };
    }
    let n = pairs.len() as f64;
    let mut ate = 0.0;
    let mut ase = 0.0;
    let mut aoe = 0.0;
    for pair in pairs {
        ate += pair.distance;
        ase += 1.0 - aligned_size_iou(&pair.gt, &pair.det);
        aoe += wrap_angle(pair.gt.yaw - pair.det.yaw).abs();
    }
    TpErrors {
        ate: ate / n,
        ase: ase / n,
        aoe: aoe / n,
    }
}

/// Volume IoU of two boxes after aligning centers and yaw: per-axis
/// min product over union.
fn aligned_size_iou(a: &Box3D, b: &Box3D) -> f64 {
    let inter = a.size.x.min(b.size.x) * a.size.y.min(b.size.y) * a.size.z.min(b.size.z);
    let union = a.volume() + b.volume() - inter;
    inter / union
}

/// Combined detection score:
/// `(1/6) * [3*ap + sum(1 - min(1, err))]` over the three TP errors.
pub fn nds_plus(ap: f64, ate: f64, ase: f64, aoe: f64) -> f64 {
    let tp_term: f64 = [ate, ase, aoe].iter().map(|e| 1.0 - e.min(1.0)).sum();
    (3.0 * ap + tp_term) / 6.0
}

/// Evaluation protocol parameters, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Center-distance thresholds AP is averaged over, meters.
    pub dist_thresholds: Vec<f64>,
    /// Threshold whose matches feed the TP errors, meters.
    pub tp_threshold: f64,
    /// Half-width of the square evaluation range, meters.
    pub range_m: f64,
    pub min_recall: f64,
    pub min_precision: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            dist_thresholds: vec![0.5, 1.0, 2.0, 4.0],
            tp_threshold: 2.0,
            range_m: 50.0,
            min_recall: AP_MIN_RECALL,
            min_precision: AP_MIN_PRECISION,
        }
    }
}

impl EvalConfig {
    /// Same protocol without the AP floors (raw area under the PR curve).
    pub fn raw_ap(mut self) -> Self {
        self.min_recall = 0.0;
        self.min_precision = 0.0;
        self
    }
}

/// Per-category scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub category: Category,
    pub ap: f64,
    pub ate: f64,
    pub ase: f64,
    pub aoe: f64,
    pub nds_plus: f64,
    pub n_gt: usize,
}

/// Full evaluation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Categories with ground truth, in fixed category order.
    pub per_class: Vec<ClassMetrics>,
    /// Categories without ground truth, excluded from the means.
    pub excluded: Vec<Category>,
    pub map: f64,
    pub mnds_plus: f64,
    pub config: EvalConfig,
}

impl EvalReport {
    /// Human-readable fixed-width table.
    pub fn table(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(
            out,
            "{:<12} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "category", "n_gt", "AP", "ATE", "ASE", "AOE", "NDS+"
        )
        .unwrap();
        for m in &self.per_class {
            writeln!(
                out,
                "{:<12} {:>7} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                m.category.to_string(),
                m.n_gt,
                m.ap,
                m.ate,
                m.ase,
                m.aoe,
                m.nds_plus
            )
            .unwrap();
        }
        for c in &self.excluded {
            writeln!(
                out,
                "{:<12} {:>7} (no ground truth; excluded from means)",
                c.to_string(),
                0
            )
            .unwrap();
        }
        let thresholds = self
            .config
            .dist_thresholds
            .iter()
            .map(|t| format!("{t}"))
            .collect::<Vec<_>>()
            .join("/");
        writeln!(
            out,
            "mAP {:.4}  mNDS+ {:.4}  (range +-{} m, thresholds {} m, TP errors at {} m)",
            self.map, self.mnds_plus, self.config.range_m, thresholds, self.config.tp_threshold
        )
        .unwrap();
        out
    }
}

/// Evaluate detections against a manifest's ground truth.
///
/// Every detection's sample id must exist in the manifest. Categories
/// with no in-range ground truth are excluded from the means; if no
/// category has ground truth the evaluation is undefined and errors.
pub fn evaluate(
    manifest: &DatasetManifest,
    detections: &[Detection],
    config: &EvalConfig,
) -> Result<EvalReport, MetricsError> {
    let known: BTreeSet<&str> = manifest
        .samples
        .iter()
        .map(|s| s.sample_id.as_str())
        .collect();
    for det in detections {
        if !known.contains(det.sample_id.as_str()) {
            return Err(MetricsError::UnknownSampleId {
                sample_id: det.sample_id.clone(),
            });
        }
    }

    let mut per_class = Vec::new();
    let mut excluded = Vec::new();
    for category in Category::ALL {
        let mut gts: BTreeMap<String, Vec<Box3D>> = BTreeMap::new();
        for sample in &manifest.samples {
            let in_range = filter_range(
                sample
                    .boxes
                    .iter()
                    .filter(|b| b.category == category)
                    .cloned(),
                config.range_m,
            );
            if !in_range.is_empty() {
                gts.insert(sample.sample_id.clone(), in_range);
            }
        }
        let n_gt: usize = gts.values().map(Vec::len).sum();
        if n_gt == 0 {
            excluded.push(category);
            continue;
        }
        let dets: Vec<Detection> = filter_range(
            detections
                .iter()
                .filter(|d| d.bbox.category == category)
                .cloned(),
            config.range_m,
        );

        let mut ap_acc = 0.0;
        for threshold in &config.dist_thresholds {
            let matches = match_detections(&gts, &dets, *threshold);
            ap_acc +=
                average_precision_with_floors(&matches, config.min_recall, config.min_precision)
                    .expect("n_gt > 0");
        }
        let ap = ap_acc / config.dist_thresholds.len() as f64;

        let tp_matches = match_detections(&gts, &dets, config.tp_threshold);
        let errors = tp_errors(&tp_matches.pairs);
        per_class.push(ClassMetrics {
            category,
            ap,
            ate: errors.ate,
            ase: errors.ase,
            aoe: errors.aoe,
            nds_plus: nds_plus(ap, errors.ate, errors.ase, errors.aoe),
            n_gt,
        });
    }

    if per_class.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let n = per_class.len() as f64;
    let map = per_class.iter().map(|m| m.ap).sum::<f64>() / n;
    let mnds_plus = per_class.iter().map(|m| m.nds_plus).sum::<f64>() / n;
    Ok(EvalReport {
        per_class,
        excluded,
        map,
        mnds_plus,
        config: config.clone(),
    })
}

// ---------------------------------------------------------------------------
// Detections file
// ---------------------------------------------------------------------------

/// Wire record: one detection per line, the manifest box shape plus a
/// sample id and score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub sample_id: String,
    #[serde(flatten)]
    pub bbox: BoxRecord,
    pub score: f64,
}

impl DetectionRecord {
    pub fn from_detection(det: &Detection) -> Self {
        Self {
            sample_id: det.sample_id.clone(),
            bbox: BoxRecord::from_box(&det.bbox),
            score: det.score,
        }
    }
}

/// Load a detections file, harmonizing categories through `cmap`.
/// Detections whose label maps to `ignore` are dropped.
pub fn load_detections(path: &Path, cmap: &CategoryMap) -> Result<Vec<Detection>, MetricsError> {
    let (_, records) = record::read_records::<DetectionRecord>(path)?;
    let path_str = path.display().to_string();
    let mut detections = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let mapped = cmap.lookup("*", &rec.bbox.raw_category).ok_or_else(|| {
            MetricsError::InvalidDetection {
                path: path_str.clone(),
                line,
                message: format!("unknown category '{}'", rec.bbox.raw_category),
            }
        })?;
        let Some(category) = mapped.to_category() else {
            continue;
        };
        let bbox = rec
            .bbox
            .to_box(category)
            .map_err(|e| MetricsError::InvalidDetection {
                path: path_str.clone(),
                line,
                message: e.to_string(),
            })?;
        detections.push(Detection::new(rec.sample_id, bbox, rec.score).map_err(|e| {
            MetricsError::InvalidDetection {
                path: path_str.clone(),
                line,
                message: e.to_string(),
            }
        })?);
    }
    Ok(detections)
}

/// Write a detections file, echoing `config` into the header.
pub fn write_detections(
    path: &Path,
    detections: &[Detection],
    config: Option<serde_json::Value>,
) -> Result<(), MetricsError> {
    let records: Vec<DetectionRecord> = detections
        .iter()
        .map(DetectionRecord::from_detection)
        .collect();
    record::write_records(path, config, &records)?;
    Ok(())
}
