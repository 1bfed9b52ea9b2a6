//! Detection and tracking metrics: greedy confidence-ordered matching,
//! precision/recall, AP by monotone-envelope trapezoid integration, mAP over
//! IoU thresholds, trajectory errors against identity correspondence, and ID
//! switch counting.

use crate::detect::{iou, Detection};
use crate::error::{Error, Result};
use crate::io::TrackedFrame;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Outcome of matching one frame's predictions against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// (prediction index, ground-truth index, IoU) for each match.
    pub pairs: Vec<(usize, usize, f64)>,
    /// (confidence, is_tp) per prediction, for PR curves.
    pub pred_records: Vec<(f64, bool)>,
}

/// Greedy matching in descending prediction confidence: each prediction takes
/// the highest-IoU unmatched same-class ground truth with IoU >= threshold.
pub fn match_frame(preds: &[Detection], gts: &[Detection], iou_threshold: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .partial_cmp(&preds[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut pred_is_tp = vec![false; preds.len()];
    for &pi in &order {
        let pred = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_taken[gi] || gt.class_id != pred.class_id {
                continue;
            }
            let overlap = iou(&pred.box_, &gt.box_);
            if overlap >= iou_threshold {
                let better = match best {
                    None => true,
                    Some((_, best_iou)) => overlap > best_iou,
                };
                if better {
                    best = Some((gi, overlap));
                }
            }
        }
        if let Some((gi, overlap)) = best {
            gt_taken[gi] = true;
            pred_is_tp[pi] = true;
            pairs.push((pi, gi, overlap));
        }
    }
    pairs.sort_by_key(|&(pi, _, _)| pi);

    let tp = pairs.len();
    MatchResult {
        tp,
        fp: preds.len() - tp,
        fn_: gts.len() - tp,
        pairs,
        pred_records: preds
            .iter()
            .zip(&pred_is_tp)
            .map(|(p, &is_tp)| (p.confidence, is_tp))
            .collect(),
    }
}

/// Precision and recall with the 0/0 -> 1.0 convention (no predictions means
/// none were wrong; no ground truth means none were missed).
pub fn precision_recall(m: &MatchResult) -> (f64, f64) {
    let precision = if m.tp + m.fp == 0 {
        1.0
    } else {
        m.tp as f64 / (m.tp + m.fp) as f64
    };
    let recall = if m.tp + m.fn_ == 0 {
        1.0
    } else {
        m.tp as f64 / (m.tp + m.fn_) as f64
    };
    (precision, recall)
}

/// Confidence-descending PR points with non-decreasing recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>, // (recall, precision)
}

/// Build the PR curve from per-prediction records pooled over a dataset.
pub fn pr_curve(records: &[(f64, bool)], gt_count: usize) -> PrCurve {
    let mut sorted: Vec<(f64, bool)> = records.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut points = Vec::with_capacity(sorted.len());
    let mut cum_tp = 0usize;
    for (k, (_, is_tp)) in sorted.iter().enumerate() {
        if *is_tp {
            cum_tp += 1;
        }
        let recall = if gt_count == 0 {
            0.0
        } else {
            cum_tp as f64 / gt_count as f64
        };
        let precision = cum_tp as f64 / (k + 1) as f64;
        points.push((recall, precision));
    }
    PrCurve { points }
}

/// Area under the PR curve: monotone precision envelope (precision at recall
/// r becomes the maximum precision at any recall >= r) then trapezoidal
/// integration over recall, anchored at (0, envelope start).
pub fn average_precision(curve: &PrCurve) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    let mut pts = curve.points.clone();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut env: Vec<f64> = pts.iter().map(|&(_, p)| p).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let mut area = 0.0;
    let mut prev_r = 0.0;
    let mut prev_p = env[0];
    for (&(r, _), &p) in pts.iter().zip(&env) {
        area += (r - prev_r) * (prev_p + p) / 2.0;
        prev_r = r;
        prev_p = p;
    }
    area
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub threshold: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEval {
    /// AP per class per IoU threshold, for classes present in ground truth.
    pub per_class: BTreeMap<u32, Vec<ThresholdAp>>,
    pub map_50: f64,
    pub map_50_95: f64,
    /// Micro-averaged at IoU 0.5.
    pub precision: f64,
    pub recall: f64,
}

/// The ten standard thresholds 0.5..0.95 in steps of 0.05.
pub fn standard_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

fn frames_by_index(frames: &[TrackedFrame]) -> BTreeMap<u64, &TrackedFrame> {
    frames.iter().map(|f| (f.frame_index, f)).collect()
}

/// Per-class AP over the given thresholds plus the two mAP summaries.
/// Classes absent from the ground truth are excluded from the class means.
pub fn map_over_thresholds(
    preds: &[TrackedFrame],
    gts: &[TrackedFrame],
    thresholds: &[f64],
) -> DetectionEval {
    assert!(!thresholds.is_empty());
    let pred_map = frames_by_index(preds);
    let gt_map = frames_by_index(gts);
    let all_frames: BTreeSet<u64> = pred_map.keys().chain(gt_map.keys()).copied().collect();
    let gt_classes: BTreeSet<u32> = gts
        .iter()
        .flat_map(|f| f.boxes.iter().map(|b| b.det.class_id))
        .collect();

    let empty: Vec<crate::io::TrackedBox> = Vec::new();
    let frame_dets: Vec<(Vec<Detection>, Vec<Detection>)> = all_frames
        .iter()
        .map(|fi| {
            let p = pred_map.get(fi).map_or(&empty, |f| &f.boxes);
            let g = gt_map.get(fi).map_or(&empty, |f| &f.boxes);
            (
                p.iter().map(|b| b.det.clone()).collect(),
                g.iter().map(|b| b.det.clone()).collect(),
            )
        })
        .collect();

    // Frames are independent: match them all per threshold, reduce in order.
    let per_threshold: Vec<Vec<MatchResult>> = crate::par::map(thresholds, |&tau| {
        frame_dets
            .iter()
            .map(|(p, g)| match_frame(p, g, tau))
            .collect()
    });

    let mut per_class: BTreeMap<u32, Vec<ThresholdAp>> = BTreeMap::new();
    for &class in &gt_classes {
        let gt_count: usize = frame_dets
            .iter()
            .map(|(_, g)| g.iter().filter(|d| d.class_id == class).count())
            .sum();
        let mut rows = Vec::with_capacity(thresholds.len());
        for (ti, &tau) in thresholds.iter().enumerate() {
            let mut records: Vec<(f64, bool)> = Vec::new();
            for ((p, _), m) in frame_dets.iter().zip(&per_threshold[ti]) {
                for (det, rec) in p.iter().zip(&m.pred_records) {
                    if det.class_id == class {
                        records.push(*rec);
                    }
                }
            }
            let ap = average_precision(&pr_curve(&records, gt_count));
            rows.push(ThresholdAp { threshold: tau, ap });
        }
        per_class.insert(class, rows);
    }

    let map_at = |ti: usize| -> f64 {
        if per_class.is_empty() {
            return 1.0; // no ground-truth classes: nothing was missed
        }
        per_class.values().map(|rows| rows[ti].ap).sum::<f64>() / per_class.len() as f64
    };
    let idx_50 = thresholds
        .iter()
        .position(|&t| (t - 0.5).abs() < 1e-9)
        .unwrap_or(0);
    let map_50 = map_at(idx_50);
    let map_50_95 =
        (0..thresholds.len()).map(map_at).sum::<f64>() / thresholds.len() as f64;

    // Micro precision/recall at the 0.5-indexed threshold.
    let agg = per_threshold[idx_50].iter().fold((0, 0, 0), |acc, m| {
        (acc.0 + m.tp, acc.1 + m.fp, acc.2 + m.fn_)
    });
    let total = MatchResult {
        tp: agg.0,
        fp: agg.1,
        fn_: agg.2,
        pairs: Vec::new(),
        pred_records: Vec::new(),
    };
    let (precision, recall) = precision_recall(&total);

    DetectionEval {
        per_class,
        map_50,
        map_50_95,
        precision,
        recall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryErrors {
    pub mae: f64,
    pub rmse: f64,
    pub mape_percent: f64,
}

/// Per frame: (gt id, track id, center dx, center dy) for every match.
type FrameIdentityMatches = Vec<(u64, Vec<(u64, u64, f64, f64)>)>;

fn identity_matches(
    tracked: &[TrackedFrame],
    gt: &[TrackedFrame],
    iou_threshold: f64,
) -> FrameIdentityMatches {
    let tracked_map = frames_by_index(tracked);
    let gt_map = frames_by_index(gt);
    let all_frames: BTreeSet<u64> = tracked_map.keys().chain(gt_map.keys()).copied().collect();
    let mut out = Vec::new();
    for fi in all_frames {
        let (Some(tf), Some(gf)) = (tracked_map.get(&fi), gt_map.get(&fi)) else {
            continue;
        };
        let preds: Vec<Detection> = tf.boxes.iter().map(|b| b.det.clone()).collect();
        let gts: Vec<Detection> = gf.boxes.iter().map(|b| b.det.clone()).collect();
        let m = match_frame(&preds, &gts, iou_threshold);
        let rows: Vec<(u64, u64, f64, f64)> = m
            .pairs
            .iter()
            .map(|&(pi, gi, _)| {
                let t = &tf.boxes[pi];
                let g = &gf.boxes[gi];
                (
                    g.id,
                    t.id,
                    t.det.box_.cx - g.det.box_.cx,
                    t.det.box_.cy - g.det.box_.cy,
                )
            })
            .collect();
        out.push((fi, rows));
    }
    out
}

/// Majority-overlap vote: each ground-truth object is assigned the track it
/// matched in the most frames (ties toward the lower track id).
pub fn majority_correspondence(
    tracked: &[TrackedFrame],
    gt: &[TrackedFrame],
    iou_threshold: f64,
) -> BTreeMap<u64, u64> {
    let mut votes: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (_, rows) in identity_matches(tracked, gt, iou_threshold) {
        for (gt_id, track_id, _, _) in rows {
            *votes.entry((gt_id, track_id)).or_insert(0) += 1;
        }
    }
    let mut best: BTreeMap<u64, (u64, usize)> = BTreeMap::new();
    for (&(gt_id, track_id), &count) in &votes {
        match best.get(&gt_id) {
            Some(&(_, best_count)) if best_count >= count => {}
            _ => {
                best.insert(gt_id, (track_id, count));
            }
        }
    }
    best.into_iter().map(|(g, (t, _))| (g, t)).collect()
}

/// Center-position errors in pixels over frames where each ground-truth
/// object was matched by its majority track. MAPE is relative to the ground
/// truth center's distance from the image origin, guarded at 1e-6.
pub fn trajectory_errors(
    tracked: &[TrackedFrame],
    gt: &[TrackedFrame],
    iou_threshold: f64,
    img_w: f64,
    img_h: f64,
) -> Result<TrajectoryErrors> {
    let correspondence = majority_correspondence(tracked, gt, iou_threshold);
    if correspondence.is_empty() {
        return Err(Error::Correspondence(
            "no tracked box ever matched a ground-truth box".into(),
        ));
    }
    let gt_map = frames_by_index(gt);
    let mut errors: Vec<(f64, f64)> = Vec::new(); // (error_px, reference_px)
    for (fi, rows) in identity_matches(tracked, gt, iou_threshold) {
        let gf = gt_map[&fi];
        for (gt_id, track_id, dx, dy) in rows {
            if correspondence.get(&gt_id) != Some(&track_id) {
                continue;
            }
            let err_px = ((dx * img_w).powi(2) + (dy * img_h).powi(2)).sqrt();
            let g = gf.boxes.iter().find(|b| b.id == gt_id).expect("matched gt exists");
            let ref_px =
                ((g.det.box_.cx * img_w).powi(2) + (g.det.box_.cy * img_h).powi(2)).sqrt();
            errors.push((err_px, ref_px));
        }
    }
    if errors.is_empty() {
        return Err(Error::Correspondence(
            "majority correspondence produced no matched frames".into(),
        ));
    }
    let n = errors.len() as f64;
    let mae = errors.iter().map(|(e, _)| e).sum::<f64>() / n;
    let rmse = (errors.iter().map(|(e, _)| e * e).sum::<f64>() / n).sqrt();
    let mape_percent = errors
        .iter()
        .map(|(e, r)| 100.0 * e / r.max(1e-6))
        .sum::<f64>()
        / n;
    Ok(TrajectoryErrors {
        mae,
        rmse,
        mape_percent,
    })
}

/// Count of frames where a ground-truth object's matched track id differs
/// from its id in the previous matched frame.
pub fn id_switches(tracked: &[TrackedFrame], gt: &[TrackedFrame], iou_threshold: f64) -> usize {
    let mut last_id: BTreeMap<u64, u64> = BTreeMap::new();
    let mut switches = 0usize;
    for (_, rows) in identity_matches(tracked, gt, iou_threshold) {
        for (gt_id, track_id, _, _) in rows {
            if let Some(&prev) = last_id.get(&gt_id) {
                if prev != track_id {
                    switches += 1;
                }
            }
            last_id.insert(gt_id, track_id);
        }
    }
    switches
}

/// Fraction of matched-frame transitions where an object kept its track id.
/// 1.0 when there are no transitions.
pub fn association_accuracy(
    tracked: &[TrackedFrame],
    gt: &[TrackedFrame],
    iou_threshold: f64,
) -> f64 {
    let mut last_id: BTreeMap<u64, u64> = BTreeMap::new();
    let mut transitions = 0usize;
    let mut correct = 0usize;
    for (_, rows) in identity_matches(tracked, gt, iou_threshold) {
        for (gt_id, track_id, _, _) in rows {
            if let Some(&prev) = last_id.get(&gt_id) {
                transitions += 1;
                if prev == track_id {
                    correct += 1;
                }
            }
            last_id.insert(gt_id, track_id);
        }
    }
    if transitions == 0 {
        1.0
    } else {
        correct as f64 / transitions as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detection: DetectionEval,
    pub trajectory: TrajectoryErrors,
    pub id_switches: usize,
    pub association_accuracy: f64,
    pub frames_evaluated: usize,
}

/// Full evaluation of a tracked stream against ground truth.
pub fn evaluate(
    tracked: &[TrackedFrame],
    gt: &[TrackedFrame],
    iou_threshold: f64,
    img_w: f64,
    img_h: f64,
) -> Result<EvalReport> {
    let detection = map_over_thresholds(tracked, gt, &standard_thresholds());
    let trajectory = trajectory_errors(tracked, gt, iou_threshold, img_w, img_h)?;
    Ok(EvalReport {
        detection,
        trajectory,
        id_switches: id_switches(tracked, gt, iou_threshold),
        association_accuracy: association_accuracy(tracked, gt, iou_threshold),
        frames_evaluated: gt.len(),
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialize report")
    }

    /// Flat CSV export: metric,value rows plus per-class AP rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("precision,{}\n", self.detection.precision));
        out.push_str(&format!("recall,{}\n", self.detection.recall));
        out.push_str(&format!("map_50,{}\n", self.detection.map_50));
        out.push_str(&format!("map_50_95,{}\n", self.detection.map_50_95));
        out.push_str(&format!("mae,{}\n", self.trajectory.mae));
        out.push_str(&format!("rmse,{}\n", self.trajectory.rmse));
        out.push_str(&format!("mape_percent,{}\n", self.trajectory.mape_percent));
        out.push_str(&format!("id_switches,{}\n", self.id_switches));
        out.push_str(&format!(
            "association_accuracy,{}\n",
            self.association_accuracy
        ));
        for (class, rows) in &self.detection.per_class {
            for row in rows {
                out.push_str(&format!("ap_class{}_iou{},{}\n", class, row.threshold, row.ap));
            }
        }
        out
    }
}
