//! Persistent identity management: the per-frame loop of detection cleanup,
//! graph construction, embedding refinement, gated minimum-cost association,
//! and occlusion-tolerant track retention.
//!
//! Unmatched tracks coast along their last velocity so a reappearing object
//! meets the prediction instead of a stale box; tracks retire after t_max
//! consecutive missed frames and their ids are never reused.

use crate::assign;
use crate::config::RunConfig;
use crate::detect::{self, BBox, Detection, FrameDetections};
use crate::error::{Error, Result};
use crate::gnn::{gcn_forward, Activations, GnnParams};
use crate::graph::{adjacency, update_graph, DynamicGraph, NodeFeature};
use crate::io::{TrackedBox, TrackedFrame};
use crate::mat::{cosine, norm2, Mat};
use crate::rng::Rng;
use std::time::Instant;

/// How far back the motion-anchor observation may sit. A longer baseline
/// divides detection noise out of the per-frame motion estimate.
const MOTION_ANCHOR_SPAN: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub last_box: BBox,
    pub velocity: [f64; 2],
    pub last_embedding: Vec<f64>,
    pub class_id: u32,
    pub class_name: String,
    pub last_seen_frame: u64,
    pub created_frame: u64,
    pub misses: u64,
    /// Recent observed (frame, box) pairs, oldest first.
    pub recent: Vec<(u64, BBox)>,
}

impl Track {
    pub fn age(&self, current_frame: u64) -> u64 {
        current_frame.saturating_sub(self.created_frame)
    }

    /// Observation to anchor a motion estimate at `frame`: the oldest recent
    /// box within MOTION_ANCHOR_SPAN frames, falling back to the last box.
    fn motion_anchor(&self, frame: u64) -> (BBox, u64) {
        for &(seen, b) in &self.recent {
            if frame.saturating_sub(seen) <= MOTION_ANCHOR_SPAN {
                return (b, frame - seen);
            }
        }
        (self.last_box, frame.saturating_sub(self.last_seen_frame))
    }

    fn remember(&mut self, frame: u64, b: BBox) {
        self.recent.push((frame, b));
        if self.recent.len() > MOTION_ANCHOR_SPAN as usize + 1 {
            self.recent.remove(0);
        }
    }

    /// Last box advanced by the stored velocity over the unseen gap.
    pub fn predicted_box(&self, frame: u64) -> BBox {
        let gap = frame.saturating_sub(self.last_seen_frame) as f64;
        self.last_box.translated(self.velocity, gap)
    }
}

/// One frame's output: (track id, detection) pairs in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame_index: u64,
    pub assignments: Vec<(u64, Detection)>,
    pub processing_seconds: f64,
}

impl FrameResult {
    pub fn to_tracked_frame(&self) -> TrackedFrame {
        TrackedFrame {
            frame_index: self.frame_index,
            boxes: self
                .assignments
                .iter()
                .map(|(id, det)| TrackedBox {
                    id: *id,
                    det: det.clone(),
                })
                .collect(),
        }
    }
}

/// Internals of the most recent step, kept for attribution: the graph, its
/// adjacency, the forward activations, which node each emitted track id used,
/// and the pre-update track states that entered the cost matrix.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub graph: DynamicGraph,
    pub adjacency: Mat,
    pub activations: Activations,
    /// Track id per node (matched or newly spawned), in node order.
    pub node_track_ids: Vec<u64>,
    /// (track id, stored embedding, predicted box) for every track that was
    /// active when the cost matrix was built.
    pub candidates: Vec<(u64, Vec<f64>, BBox)>,
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    pub active: Vec<Track>,
    pub retired: Vec<Track>,
    pub config: RunConfig,
    next_id: u64,
    last_frame: Option<u64>,
    prev_graph: DynamicGraph,
    params: Option<GnnParams>,
    pub last_trace: Option<StepTrace>,
}

impl TrackerState {
    pub fn new(config: RunConfig) -> Self {
        TrackerState {
            active: Vec::new(),
            retired: Vec::new(),
            config,
            next_id: 0,
            last_frame: None,
            prev_graph: DynamicGraph::empty(0),
            params: None,
            last_trace: None,
        }
    }

    /// Use checkpointed weights instead of seeded initialization.
    pub fn with_params(config: RunConfig, params: GnnParams) -> Self {
        let mut state = TrackerState::new(config);
        state.params = Some(params);
        state
    }

    pub fn params(&self) -> Option<&GnnParams> {
        self.params.as_ref()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    fn ensure_params(&mut self, input_dim: usize) -> Result<&GnnParams> {
        if self.params.is_none() {
            let mut dims = vec![input_dim];
            dims.extend(&self.config.gnn.hidden_dims);
            let mut rng = Rng::derive(self.config.seed, "gnn-init", 0);
            self.params = Some(GnnParams::init(&dims, &mut rng));
        }
        let params = self.params.as_ref().unwrap();
        if params.layers[0].rows != input_dim {
            return Err(Error::Dimension {
                layer: 0,
                message: format!(
                    "stream features have width {input_dim} but weights expect {}",
                    params.layers[0].rows
                ),
            });
        }
        Ok(params)
    }
}

/// Cosine with defined degenerate cases: two zero vectors are identical (1),
/// a single zero vector is maximally dissimilar (0).
fn embedding_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 && nb == 0.0 {
        return 1.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    cosine(a, b)
}

/// Gated association cost between a candidate track and a node.
///
/// cost = 1 - IoU(predicted, node) + beta * (1 - cos(track_emb, node_emb));
/// infinite (gated out) when the predicted box has zero IoU with the node and
/// the centers are farther apart than tau_gate.
pub fn association_cost(
    track_embedding: &[f64],
    predicted_box: &BBox,
    node: &NodeFeature,
    node_embedding: &[f64],
    beta: f64,
    tau_gate: f64,
) -> f64 {
    let node_box = BBox::new(node.spatial[0], node.spatial[1], node.spatial[2], node.spatial[3]);
    let overlap = detect::iou(predicted_box, &node_box);
    let center_dist = norm2(&[
        predicted_box.cx - node.spatial[0],
        predicted_box.cy - node.spatial[1],
    ]);
    if overlap == 0.0 && center_dist > tau_gate {
        return f64::INFINITY;
    }
    let beta_eff = if track_embedding.is_empty() || node_embedding.is_empty() {
        0.0
    } else {
        beta
    };
    (1.0 - overlap) + beta_eff * (1.0 - embedding_similarity(track_embedding, node_embedding))
}

/// Minimum-total-cost one-to-one assignment over the finite-cost pairs.
/// Rows are tracks, columns are nodes.
pub fn associate(cost: &[Vec<f64>]) -> assign::Assignment {
    assign::solve(cost)
}

/// Provisional one-to-one match used only to estimate node motion before the
/// graph is built: a minimum-cost assignment over predicted-center distance
/// plus a velocity-consistency term, gated at tau_gate. The global optimum
/// (rather than a greedy scan) keeps a near-miss between two movers from
/// scrambling their motion features.
fn provisional_carryover(
    tracks: &[Track],
    dets: &[Detection],
    frame: u64,
    tau_gate: f64,
) -> Vec<Option<(BBox, u64)>> {
    let cost: Vec<Vec<f64>> = tracks
        .iter()
        .map(|track| {
            let predicted = track.predicted_box(frame);
            let (anchor, anchor_gap) = track.motion_anchor(frame);
            let gap = anchor_gap.max(1) as f64;
            dets.iter()
                .map(|det| {
                    let d = norm2(&[predicted.cx - det.box_.cx, predicted.cy - det.box_.cy]);
                    if d > tau_gate {
                        return f64::INFINITY;
                    }
                    // Velocity implied over the anchor baseline: the longer
                    // gap divides detection noise out of the estimate.
                    let implied = [
                        (det.box_.cx - anchor.cx) / gap,
                        (det.box_.cy - anchor.cy) / gap,
                    ];
                    let vel_mismatch = norm2(&[
                        implied[0] - track.velocity[0],
                        implied[1] - track.velocity[1],
                    ]);
                    d + vel_mismatch
                })
                .collect()
        })
        .collect();

    let mut out: Vec<Option<(BBox, u64)>> = vec![None; dets.len()];
    for &(ti, ni) in &assign::solve(&cost).pairs {
        let (anchor, gap) = tracks[ti].motion_anchor(frame);
        if gap >= 1 {
            out[ni] = Some((anchor, gap));
        }
    }
    out
}

/// Advance the tracker by one frame.
pub fn step(state: &mut TrackerState, frame: &FrameDetections) -> Result<FrameResult> {
    let started = Instant::now();
    if let Some(last) = state.last_frame {
        if frame.frame_index <= last {
            return Err(Error::Stream(format!(
                "out-of-order frame {} after {last}",
                frame.frame_index
            )));
        }
    }
    let t = frame.frame_index;
    let cfg = state.config.clone();

    // Detection cleanup: confidence gate, class-wise NMS (input order
    // restored afterwards so new-track ids follow input order), ROI, box
    // refinement clamp.
    let gated = detect::confidence_gate(frame, cfg.detect.conf_threshold);
    let mut keep = detect::nms_keep_indices(&gated.detections, cfg.detect.nms_iou);
    keep.sort_unstable();
    let mut dets: Vec<Detection> = keep.iter().map(|&i| gated.detections[i].clone()).collect();
    if let Some(roi) = &cfg.detect.roi {
        dets.retain(|d| roi.contains(d.box_.center()));
    }
    for d in dets.iter_mut() {
        d.box_ = d.box_.clamped_size(cfg.detect.max_box_size);
    }

    // Uniform embedding width for the feature matrix.
    let emb_dim = match state.params.as_ref() {
        Some(p) => p.layers[0].rows.saturating_sub(6),
        None => dets
            .iter()
            .find_map(|d| d.embedding.as_ref().map(|e| e.len()))
            .unwrap_or(0),
    };
    for d in dets.iter_mut() {
        match (&mut d.embedding, emb_dim) {
            (emb @ None, dim) if dim > 0 => *emb = Some(vec![0.0; dim]),
            (emb @ Some(_), 0) => *emb = None,
            _ => {}
        }
    }

    let carryover = provisional_carryover(&state.active, &dets, t, cfg.tracker.tau_gate);
    let clean = FrameDetections::new(t, dets);
    let graph = update_graph(&state.prev_graph, &clean, &carryover, &cfg.graph);

    let n = graph.node_count();
    let mut node_embeddings: Vec<Vec<f64>> = vec![Vec::new(); n];
    let (adj_mat, acts) = if n > 0 {
        let adj = adjacency(&graph, cfg.graph.adjacency);
        let h0 = graph.feature_matrix();
        let params = state.ensure_params(h0.cols)?;
        let acts = gcn_forward(&h0, &adj.mat, params)?;
        for (i, emb) in node_embeddings.iter_mut().enumerate() {
            *emb = acts.final_embeddings().row(i).to_vec();
        }
        (adj.mat, acts)
    } else {
        (
            Mat::zeros(0, 0),
            Activations {
                hs: vec![Mat::zeros(0, 0)],
                zs: Vec::new(),
            },
        )
    };

    // Gated cost matrix over (active track, node).
    let candidates: Vec<(u64, Vec<f64>, BBox)> = state
        .active
        .iter()
        .map(|tr| (tr.track_id, tr.last_embedding.clone(), tr.predicted_box(t)))
        .collect();
    let cost: Vec<Vec<f64>> = state
        .active
        .iter()
        .map(|track| {
            let predicted = track.predicted_box(t);
            (0..n)
                .map(|ni| {
                    association_cost(
                        &track.last_embedding,
                        &predicted,
                        &graph.nodes[ni],
                        &node_embeddings[ni],
                        cfg.tracker.beta,
                        cfg.tracker.tau_gate,
                    )
                })
                .collect()
        })
        .collect();
    let assignment = associate(&cost);

    let mut node_track_ids = vec![u64::MAX; n];
    let mut matched_track = vec![false; state.active.len()];
    for &(ti, ni) in &assignment.pairs {
        matched_track[ti] = true;
        let track = &mut state.active[ti];
        let node = &graph.nodes[ni];
        let det = &clean.detections[ni];
        let gap = (t - track.last_seen_frame) as f64;
        let measured = [
            (det.box_.cx - track.last_box.cx) / gap,
            (det.box_.cy - track.last_box.cy) / gap,
        ];
        track.velocity = if cfg.graph.use_temporal {
            // First measurement replaces the spawn-time zero outright;
            // afterwards smooth against the previous estimate.
            if track.last_seen_frame == track.created_frame {
                measured
            } else {
                let va = cfg.tracker.velocity_alpha;
                [
                    va * measured[0] + (1.0 - va) * track.velocity[0],
                    va * measured[1] + (1.0 - va) * track.velocity[1],
                ]
            }
        } else {
            [0.0, 0.0]
        };
        track.last_box = det.box_;
        track.class_id = det.class_id;
        track.class_name = det.class_name.clone();
        track.last_seen_frame = t;
        track.misses = 0;
        track.remember(t, det.box_);
        let alpha = cfg.tracker.smoothing_alpha;
        let incoming = &node_embeddings[ni];
        if track.last_embedding.len() == incoming.len() {
            for (old, new) in track.last_embedding.iter_mut().zip(incoming) {
                *old = alpha * new + (1.0 - alpha) * *old;
            }
        } else {
            track.last_embedding = incoming.clone();
        }
        node_track_ids[ni] = track.track_id;
        let _ = node;
    }

    // New tracks for unmatched nodes, in node (input) order.
    for ni in 0..n {
        if node_track_ids[ni] == u64::MAX {
            let det = &clean.detections[ni];
            let id = state.next_id;
            state.next_id += 1;
            state.active.push(Track {
                track_id: id,
                last_box: det.box_,
                velocity: [0.0, 0.0],
                last_embedding: node_embeddings[ni].clone(),
                class_id: det.class_id,
                class_name: det.class_name.clone(),
                last_seen_frame: t,
                created_frame: t,
                misses: 0,
                recent: vec![(t, det.box_)],
            });
            node_track_ids[ni] = id;
        }
    }

    // Unmatched tracks accumulate misses and retire past t_max.
    let mut still_active = Vec::with_capacity(state.active.len());
    for (idx, mut track) in state.active.drain(..).enumerate() {
        let was_matched = idx < matched_track.len() && matched_track[idx];
        let is_new = track.created_frame == t;
        if !was_matched && !is_new {
            track.misses = t - track.last_seen_frame;
        }
        if track.misses > cfg.tracker.t_max {
            state.retired.push(track);
        } else {
            still_active.push(track);
        }
    }
    state.active = still_active;

    let assignments: Vec<(u64, Detection)> = (0..n)
        .map(|ni| (node_track_ids[ni], clean.detections[ni].clone()))
        .collect();

    state.prev_graph = graph.clone();
    state.last_frame = Some(t);
    state.last_trace = Some(StepTrace {
        graph,
        adjacency: adj_mat,
        activations: acts,
        node_track_ids,
        candidates,
    });

    Ok(FrameResult {
        frame_index: t,
        assignments,
        processing_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Run the full pipeline over a stream.
pub fn track_stream(
    frames: &[FrameDetections],
    config: RunConfig,
    params: Option<GnnParams>,
) -> Result<(Vec<FrameResult>, TrackerState)> {
    let mut state = match params {
        Some(p) => TrackerState::with_params(config, p),
        None => TrackerState::new(config),
    };
    let mut results = Vec::with_capacity(frames.len());
    for frame in frames {
        results.push(step(&mut state, frame)?);
    }
    Ok((results, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_at(cx: f64, cy: f64) -> Detection {
        Detection::new(BBox::new(cx, cy, 0.06, 0.06), 1.0, 0, "obj")
    }

    fn frame(t: u64, dets: Vec<Detection>) -> FrameDetections {
        FrameDetections::new(t, dets)
    }

    #[test]
    fn first_frame_ids_follow_input_order() {
        let mut state = TrackerState::new(RunConfig::default());
        let result = step(
            &mut state,
            &frame(0, vec![det_at(0.2, 0.2), det_at(0.5, 0.5), det_at(0.8, 0.8)]),
        )
        .unwrap();
        let ids: Vec<u64> = result.assignments.iter().map(|(id, _)| *id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn out_of_order_frame_rejected() {
        let mut state = TrackerState::new(RunConfig::default());
        step(&mut state, &frame(3, vec![det_at(0.5, 0.5)])).unwrap();
        assert!(step(&mut state, &frame(3, vec![])).is_err());
        assert!(step(&mut state, &frame(2, vec![])).is_err());
    }

    #[test]
    fn stationary_track_keeps_id() {
        let mut state = TrackerState::new(RunConfig::default());
        for t in 0..5 {
            let result = step(&mut state, &frame(t, vec![det_at(0.5, 0.5)])).unwrap();
            assert_eq!(result.assignments[0].0, 0, "frame {t}");
        }
        assert_eq!(state.active.len(), 1);
        assert_eq!(state.next_id(), 1);
    }

    #[test]
    fn moving_track_is_followed_by_prediction() {
        let mut state = TrackerState::new(RunConfig::default());
        for t in 0..20 {
            let x = 0.1 + 0.02 * t as f64;
            let result = step(&mut state, &frame(t, vec![det_at(x, 0.5)])).unwrap();
            assert_eq!(result.assignments[0].0, 0, "frame {t}");
        }
        let track = &state.active[0];
        assert!((track.velocity[0] - 0.02).abs() < 1e-9);
        assert!(track.velocity[1].abs() < 1e-9);
    }

    #[test]
    fn association_cost_examples() {
        let node = crate::graph::node_feature(&det_at(0.5, 0.5), None);
        let emb = vec![1.0, 0.0];
        // Stationary track re-detected identically with identical embedding.
        let same_box = BBox::new(0.5, 0.5, 0.06, 0.06);
        let c = association_cost(&emb, &same_box, &node, &emb, 0.5, 0.2);
        assert!(c.abs() < 1e-12);
        // Perfect overlap, orthogonal embeddings, beta 0.5.
        let c2 = association_cost(&[1.0, 0.0], &same_box, &node, &[0.0, 1.0], 0.5, 0.2);
        assert!((c2 - 0.5).abs() < 1e-12);
        // Beyond the gate.
        let far = BBox::new(0.1, 0.1, 0.06, 0.06);
        assert!(association_cost(&emb, &far, &node, &emb, 0.5, 0.2).is_infinite());
    }

    #[test]
    fn occlusion_within_t_max_retains_id() {
        let cfg = RunConfig::default();
        let t_max = cfg.tracker.t_max;
        let mut state = TrackerState::new(cfg);
        let vx = 0.01;
        let mut t = 0u64;
        for _ in 0..5 {
            step(&mut state, &frame(t, vec![det_at(0.1 + vx * t as f64, 0.5)])).unwrap();
            t += 1;
        }
        for _ in 0..3 {
            step(&mut state, &frame(t, vec![])).unwrap();
            t += 1;
        }
        let result = step(&mut state, &frame(t, vec![det_at(0.1 + vx * t as f64, 0.5)])).unwrap();
        assert_eq!(result.assignments[0].0, 0, "id retained through occlusion");
        assert!(3 <= t_max);
    }

    #[test]
    fn occlusion_beyond_t_max_retires_track() {
        let cfg = RunConfig::default();
        let t_max = cfg.tracker.t_max;
        let mut state = TrackerState::new(cfg);
        let mut t = 0u64;
        for _ in 0..3 {
            step(&mut state, &frame(t, vec![det_at(0.5, 0.5)])).unwrap();
            t += 1;
        }
        for _ in 0..t_max + 1 {
            step(&mut state, &frame(t, vec![])).unwrap();
            t += 1;
        }
        assert!(state.active.is_empty());
        assert_eq!(state.retired.len(), 1);
        let result = step(&mut state, &frame(t, vec![det_at(0.5, 0.5)])).unwrap();
        assert_eq!(result.assignments[0].0, 1, "fresh id after retirement");
    }

    #[test]
    fn ids_never_reused() {
        let mut state = TrackerState::new(RunConfig::default());
        let mut seen = std::collections::HashSet::new();
        let mut t = 0;
        for round in 0..4 {
            let x = 0.2 + 0.15 * round as f64;
            for _ in 0..2 {
                let r = step(&mut state, &frame(t, vec![det_at(x, 0.2)])).unwrap();
                seen.insert(r.assignments[0].0);
                t += 1;
            }
            // long gap: track retires
            for _ in 0..state.config.tracker.t_max + 2 {
                step(&mut state, &frame(t, vec![])).unwrap();
                t += 1;
            }
        }
        assert_eq!(seen.len(), 4, "each reappearance got a fresh id");
        let active_ids: std::collections::HashSet<u64> =
            state.active.iter().map(|tr| tr.track_id).collect();
        let retired_ids: std::collections::HashSet<u64> =
            state.retired.iter().map(|tr| tr.track_id).collect();
        assert!(active_ids.is_disjoint(&retired_ids));
    }

    #[test]
    fn deterministic_results() {
        let frames: Vec<FrameDetections> = (0..10)
            .map(|t| {
                frame(
                    t,
                    vec![
                        det_at(0.1 + 0.01 * t as f64, 0.3),
                        det_at(0.8 - 0.01 * t as f64, 0.7),
                    ],
                )
            })
            .collect();
        let (a, _) = track_stream(&frames, RunConfig::default(), None).unwrap();
        let (b, _) = track_stream(&frames, RunConfig::default(), None).unwrap();
        let strip = |rs: &[FrameResult]| -> Vec<(u64, Vec<(u64, Detection)>)> {
            rs.iter()
                .map(|r| (r.frame_index, r.assignments.clone()))
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn nms_and_gate_run_before_association() {
        let mut state = TrackerState::new(RunConfig::default());
        let dets = vec![
            det_at(0.5, 0.5),
            // same box, lower confidence: suppressed by NMS
            Detection::new(BBox::new(0.5, 0.5, 0.06, 0.06), 0.8, 0, "obj"),
            // below the 0.25 confidence gate
            Detection::new(BBox::new(0.3, 0.3, 0.06, 0.06), 0.1, 0, "obj"),
        ];
        let result = step(&mut state, &frame(0, dets)).unwrap();
        assert_eq!(result.assignments.len(), 1);
    }
}
