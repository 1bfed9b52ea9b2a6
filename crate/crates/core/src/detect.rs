//! Detection records and the per-frame cleanup ops: IoU, class-wise NMS,
//! confidence gating, and ROI filtering.
//!
//! All coordinates are normalized to [0,1]; converters in `io` own every
//! pixel <-> normalized conversion.

use serde::{Deserialize, Serialize};

/// Axis-aligned box stored as normalized center + size.
/// Corners may extend past [0,1]; only the center is range-checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { cx, cy, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && (0.0..=1.0).contains(&self.cx)
            && (0.0..=1.0).contains(&self.cy)
            && [self.cx, self.cy, self.w, self.h]
                .iter()
                .all(|v| v.is_finite())
    }

    /// (left, top, right, bottom) corners.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> [f64; 2] {
        [self.cx, self.cy]
    }

    /// Shift the center by a velocity integrated over `gap` frames.
    pub fn translated(&self, velocity: [f64; 2], gap: f64) -> BBox {
        BBox {
            cx: self.cx + velocity[0] * gap,
            cy: self.cy + velocity[1] * gap,
            w: self.w,
            h: self.h,
        }
    }

    /// Clamp width/height to a maximum (the bounding-box refinement step);
    /// the default limit of 1.0 leaves normalized boxes untouched.
    pub fn clamped_size(&self, max_size: f64) -> BBox {
        BBox {
            cx: self.cx,
            cy: self.cy,
            w: self.w.min(max_size),
            h: self.h.min(max_size),
        }
    }
}

/// Intersection over union of two boxes; symmetric and in [0,1].
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (al, at, ar, ab) = a.corners();
    let (bl, bt, br, bb) = b.corners();
    let iw = (ar.min(br) - al.max(bl)).max(0.0);
    let ih = (ab.min(bb) - at.max(bt)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub box_: BBox,
    pub confidence: f64,
    pub class_id: u32,
    pub class_name: String,
    pub embedding: Option<Vec<f64>>,
}

impl Detection {
    pub fn new(box_: BBox, confidence: f64, class_id: u32, class_name: impl Into<String>) -> Self {
        Detection {
            box_,
            confidence,
            class_id,
            class_name: class_name.into(),
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }
}

/// All detections of one frame, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u64,
    pub detections: Vec<Detection>,
}

impl FrameDetections {
    pub fn new(frame_index: u64, detections: Vec<Detection>) -> Self {
        FrameDetections {
            frame_index,
            detections,
        }
    }

    pub fn empty(frame_index: u64) -> Self {
        FrameDetections {
            frame_index,
            detections: Vec::new(),
        }
    }
}

/// Region of interest: a closed rectangle in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Roi {
    pub fn full() -> Self {
        Roi {
            left: 0.0,
            top: 0.0,
            right: 1.0,
            bottom: 1.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.left < self.right
            && self.top < self.bottom
            && self.left >= 0.0
            && self.top >= 0.0
            && self.right <= 1.0
            && self.bottom <= 1.0
    }

    pub fn contains(&self, point: [f64; 2]) -> bool {
        point[0] >= self.left
            && point[0] <= self.right
            && point[1] >= self.top
            && point[1] <= self.bottom
    }
}

/// Greedy class-wise non-maximum suppression.
///
/// Sort by confidence descending (ties keep lower input index first), keep a
/// box, drop any same-class box with IoU >= `iou_threshold` against a kept
/// box. Output is in confidence-descending order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let order = nms_keep_indices(dets, iou_threshold);
    order.iter().map(|&i| dets[i].clone()).collect()
}

/// Indices (into `dets`) surviving NMS, in confidence-descending order.
pub fn nms_keep_indices(dets: &[Detection], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut kept: Vec<usize> = Vec::new();
    for &idx in &order {
        let candidate = &dets[idx];
        let suppressed = kept.iter().any(|&k| {
            dets[k].class_id == candidate.class_id
                && iou(&dets[k].box_, &candidate.box_) >= iou_threshold
        });
        if !suppressed {
            kept.push(idx);
        }
    }
    kept
}

/// Keep detections whose box center lies inside the (closed) ROI rectangle.
pub fn apply_roi(frame: &FrameDetections, roi: &Roi) -> FrameDetections {
    FrameDetections {
        frame_index: frame.frame_index,
        detections: frame
            .detections
            .iter()
            .filter(|d| roi.contains(d.box_.center()))
            .cloned()
            .collect(),
    }
}

/// Drop detections below the confidence threshold, preserving order.
pub fn confidence_gate(frame: &FrameDetections, threshold: f64) -> FrameDetections {
    FrameDetections {
        frame_index: frame.frame_index,
        detections: frame
            .detections
            .iter()
            .filter(|d| d.confidence >= threshold)
            .cloned()
            .collect(),
    }
}
