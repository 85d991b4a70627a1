//! Instance segmentation evaluation: the AP family over IoU thresholds and
//! per-category point-wise mIoU.
//!
//! Matching follows the common 3D instance segmentation protocol: at each
//! IoU threshold, predictions are visited in descending score order (ties by
//! lowest prediction id) and greedily matched to the unmatched ground-truth
//! instance of highest IoU; a match counts when that IoU reaches the
//! threshold. AP is the area under the precision-recall curve with the
//! precision envelope (all-point interpolation).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::BuildingCategory;
use crate::{Error, Result};

/// A predicted instance: its point-index set (sorted ascending) and a score
/// used for ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    pub points: Vec<u32>,
    pub score: f64,
}

/// Set IoU of two point-index sets over the same universe. Both slices must
/// be sorted ascending; the IoU of two empty sets is undefined.
pub fn instance_iou(pred: &[u32], gt: &[u32]) -> Result<f64> {
    if pred.is_empty() && gt.is_empty() {
        return Err(Error::InvalidInput("IoU of two empty sets is undefined"));
    }
    let mut inter = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < pred.len() && j < gt.len() {
        match pred[i].cmp(&gt[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = pred.len() + gt.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// One row of a [`MatchTable`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchRecord {
    /// Prediction index into the evaluated slice.
    pub pred: usize,
    /// Matched ground-truth index, if the greedy match reached the threshold.
    pub gt: Option<usize>,
    /// IoU against the matched ground truth (0 when unmatched).
    pub iou: f64,
    pub score: f64,
}

/// Greedy matching outcome at one IoU threshold, in descending score order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchTable {
    pub threshold: f64,
    pub records: Vec<MatchRecord>,
    pub num_gts: usize,
}

/// Greedily match predictions to ground-truth instances at one threshold.
pub fn match_at_threshold(
    preds: &[ScoredInstance],
    gts: &[Vec<u32>],
    threshold: f64,
) -> MatchTable {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "IoU threshold must be in (0, 1]"
    );

    // Point -> ground-truth index, for counting intersections in one pass
    // per prediction.
    let mut gt_of_point: BTreeMap<u32, usize> = BTreeMap::new();
    for (g, set) in gts.iter().enumerate() {
        for &p in set {
            gt_of_point.insert(p, g);
        }
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut records = Vec::with_capacity(preds.len());
    for &p in &order {
        let mut inter: BTreeMap<usize, usize> = BTreeMap::new();
        for point in &preds[p].points {
            if let Some(&g) = gt_of_point.get(point) {
                *inter.entry(g).or_insert(0) += 1;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (&g, &count) in &inter {
            if gt_taken[g] {
                continue;
            }
            let union = preds[p].points.len() + gts[g].len() - count;
            let iou = count as f64 / union as f64;
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        match best {
            Some((g, iou)) if iou >= threshold => {
                gt_taken[g] = true;
                records.push(MatchRecord {
                    pred: p,
                    gt: Some(g),
                    iou,
                    score: preds[p].score,
                });
            }
            _ => records.push(MatchRecord {
                pred: p,
                gt: None,
                iou: 0.0,
                score: preds[p].score,
            }),
        }
    }
    MatchTable {
        threshold,
        records,
        num_gts: gts.len(),
    }
}

/// Precision-recall points of a match table, in descending score order.
fn precision_recall(table: &MatchTable) -> (Vec<f64>, Vec<f64>) {
    let mut precision = Vec::with_capacity(table.records.len());
    let mut recall = Vec::with_capacity(table.records.len());
    let mut tp = 0usize;
    for (rank, record) in table.records.iter().enumerate() {
        if record.gt.is_some() {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(if table.num_gts == 0 {
            0.0
        } else {
            tp as f64 / table.num_gts as f64
        });
    }
    (precision, recall)
}

fn ap_from_table(table: &MatchTable) -> f64 {
    if table.num_gts == 0 {
        // No ground truth: perfect when nothing is predicted.
        return if table.records.is_empty() { 1.0 } else { 0.0 };
    }
    if table.records.is_empty() {
        return 0.0;
    }
    let (precision, _) = precision_recall(table);
    // Precision envelope: the best precision achieved at this rank or later.
    let mut envelope = precision;
    for k in (0..envelope.len() - 1).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    // Each true positive advances recall by 1/num_gts; dividing the
    // envelope sum once keeps perfect inputs at exactly 1.0.
    table
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.gt.is_some())
        .map(|(k, _)| envelope[k])
        .sum::<f64>()
        / table.num_gts as f64
}

/// Average precision at a single IoU threshold.
pub fn average_precision(preds: &[ScoredInstance], gts: &[Vec<u32>], threshold: f64) -> f64 {
    ap_from_table(&match_at_threshold(preds, gts, threshold))
}

/// Which IoU thresholds the headline AP averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ApRange {
    /// 25% to 95% with a step of 5%.
    #[default]
    #[cfg_attr(feature = "serde", serde(rename = "25-95"))]
    From25,
    /// 50% to 95% with a step of 5%, for cross-tool comparison.
    #[cfg_attr(feature = "serde", serde(rename = "50-95"))]
    From50,
}

impl ApRange {
    pub fn label(self) -> &'static str {
        match self {
            ApRange::From25 => "25-95",
            ApRange::From50 => "50-95",
        }
    }

    pub fn thresholds(self) -> Vec<f64> {
        let start = match self {
            ApRange::From25 => 25u32,
            ApRange::From50 => 50u32,
        };
        // Percent / 100 keeps thresholds bit-equal to IoU ratios like 60/100.
        (start..=95).step_by(5).map(|t| t as f64 / 100.0).collect()
    }
}

/// The AP family: the mean over the threshold range plus the single-threshold
/// scores at 50% and 25%.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ApScores {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
}

/// AP averaged over IoU thresholds 25%..=95% step 5%, plus AP50 and AP25.
pub fn ap_summary(preds: &[ScoredInstance], gts: &[Vec<u32>]) -> ApScores {
    ap_summary_range(preds, gts, ApRange::From25)
}

pub fn ap_summary_range(preds: &[ScoredInstance], gts: &[Vec<u32>], range: ApRange) -> ApScores {
    let thresholds = range.thresholds();
    let mean: f64 = thresholds
        .iter()
        .map(|&t| average_precision(preds, gts, t))
        .sum::<f64>()
        / thresholds.len() as f64;
    ApScores {
        ap: mean,
        ap50: average_precision(preds, gts, 50.0 / 100.0),
        ap25: average_precision(preds, gts, 25.0 / 100.0),
    }
}

/// Point-wise IoU per building category.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategoryMiou {
    /// Indexed like [`BuildingCategory::LABELED`]; `None` marks categories
    /// absent from the ground truth (not applicable).
    pub per_category: [Option<f64>; 7],
    /// Mean over categories present in the ground truth.
    pub mean: Option<f64>,
}

/// Point-wise category-mask IoU between predicted and ground-truth labels.
///
/// Labels are `None` for points outside any building (or any surviving
/// proposal). Categories absent from the ground truth are reported as not
/// applicable and excluded from the mean.
pub fn miou_by_category(
    pred: &[Option<BuildingCategory>],
    gt: &[Option<BuildingCategory>],
) -> Result<CategoryMiou> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            what: "category labels",
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let slot = |cat: BuildingCategory| cat.code() as usize;
    let mut inter = [0u64; 7];
    let mut pred_count = [0u64; 7];
    let mut gt_count = [0u64; 7];
    for (&p, &g) in pred.iter().zip(gt) {
        if let Some(p) = p.filter(|&c| c != BuildingCategory::Unlabeled) {
            pred_count[slot(p)] += 1;
        }
        if let Some(g) = g.filter(|&c| c != BuildingCategory::Unlabeled) {
            gt_count[slot(g)] += 1;
            if p == Some(g) {
                inter[slot(g)] += 1;
            }
        }
    }
    let mut per_category = [None; 7];
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 0..7 {
        if gt_count[c] == 0 {
            continue;
        }
        let union = pred_count[c] + gt_count[c] - inter[c];
        let iou = inter[c] as f64 / union as f64;
        per_category[c] = Some(iou);
        sum += iou;
        present += 1;
    }
    Ok(CategoryMiou {
        per_category,
        mean: (present > 0).then(|| sum / present as f64),
    })
}

/// Precision-recall curve at one threshold, in descending score order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrCurve {
    pub threshold: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Ground-truth instances matched at this threshold.
    pub matched: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalCounts {
    pub ground_truth: usize,
    pub predictions: usize,
}

/// Full evaluation report: AP family, per-category mIoU, and the
/// per-threshold precision-recall curves.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub ap_range: ApRange,
    pub miou: CategoryMiou,
    pub counts: EvalCounts,
    pub curves: Vec<PrCurve>,
}

/// Evaluate predicted instances (and per-point category labels) against the
/// ground truth.
pub fn evaluate_instances(
    preds: &[ScoredInstance],
    gts: &[Vec<u32>],
    pred_labels: &[Option<BuildingCategory>],
    gt_labels: &[Option<BuildingCategory>],
    range: ApRange,
) -> Result<EvalReport> {
    let scores = ap_summary_range(preds, gts, range);
    let miou = miou_by_category(pred_labels, gt_labels)?;
    let curves = range
        .thresholds()
        .into_iter()
        .map(|t| {
            let table = match_at_threshold(preds, gts, t);
            let (precision, recall) = precision_recall(&table);
            PrCurve {
                threshold: t,
                precision,
                recall,
                matched: table.records.iter().filter(|r| r.gt.is_some()).count(),
            }
        })
        .collect();
    Ok(EvalReport {
        ap: scores.ap,
        ap50: scores.ap50,
        ap25: scores.ap25,
        ap_range: range,
        miou,
        counts: EvalCounts {
            ground_truth: gts.len(),
            predictions: preds.len(),
        },
        curves,
    })
}

/// Best AP over every admissible one-to-one matching, by exhaustive search.
///
/// Exponential in the number of predictions; intended as an independent
/// oracle for tiny cases when checking the greedy matcher.
pub fn optimal_ap_bruteforce(preds: &[ScoredInstance], gts: &[Vec<u32>], threshold: f64) -> f64 {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "IoU threshold must be in (0, 1]"
    );
    if gts.is_empty() {
        return if preds.is_empty() { 1.0 } else { 0.0 };
    }
    if preds.is_empty() {
        return 0.0;
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    // IoU of every (pred, gt) pair, in rank order.
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&p| {
            gts.iter()
                .map(|g| instance_iou(&preds[p].points, g).unwrap_or(0.0))
                .collect()
        })
        .collect();

    fn ap_of_flags(flags: &[bool], num_gts: usize) -> f64 {
        let mut precision = Vec::with_capacity(flags.len());
        let mut tp = 0usize;
        for (rank, &is_tp) in flags.iter().enumerate() {
            if is_tp {
                tp += 1;
            }
            precision.push(tp as f64 / (rank + 1) as f64);
        }
        for k in (0..precision.len().saturating_sub(1)).rev() {
            precision[k] = precision[k].max(precision[k + 1]);
        }
        flags
            .iter()
            .enumerate()
            .filter(|(_, &is_tp)| is_tp)
            .map(|(k, _)| precision[k])
            .sum::<f64>()
            / num_gts as f64
    }

    fn search(
        rank: usize,
        ious: &[Vec<f64>],
        threshold: f64,
        used: &mut [bool],
        flags: &mut Vec<bool>,
        best: &mut f64,
        num_gts: usize,
    ) {
        if rank == ious.len() {
            *best = best.max(ap_of_flags(flags, num_gts));
            return;
        }
        // Leave this prediction unmatched.
        flags.push(false);
        search(rank + 1, ious, threshold, used, flags, best, num_gts);
        flags.pop();
        // Or match it to any free ground truth above the threshold.
        for g in 0..num_gts {
            if !used[g] && ious[rank][g] >= threshold {
                used[g] = true;
                flags.push(true);
                search(rank + 1, ious, threshold, used, flags, best, num_gts);
                flags.pop();
                used[g] = false;
            }
        }
    }

    let mut best = 0.0;
    let mut used = vec![false; gts.len()];
    let mut flags = Vec::with_capacity(preds.len());
    search(0, &ious, threshold, &mut used, &mut flags, &mut best, gts.len());
    best
}
