//! Graph convolution stack, the combined detection/tracking loss, exact
//! reverse-mode gradients, and a plain gradient-descent training step.
//!
//! Forward rule per layer: H^(l+1) = ReLU(A · H^(l) · W^(l)), with the ReLU
//! subgradient at 0 taken as 0. The tracking loss couples two consecutive
//! frames through shared weights; the detection loss is computed on ingested
//! predictions and is constant with respect to the weights.

use crate::detect::BBox;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Per-layer weight matrices W^(l), dims chaining d_l x d_{l+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnParams {
    pub layers: Vec<Mat>,
}

impl GnnParams {
    /// Fan-scaled uniform init in +-sqrt(6/(d_in+d_out)) from a seeded stream.
    pub fn init(dims: &[usize], rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "need at least one layer");
        let layers = dims
            .windows(2)
            .map(|w| {
                let (d_in, d_out) = (w[0], w[1]);
                let bound = (6.0 / (d_in + d_out) as f64).sqrt();
                let mut m = Mat::zeros(d_in, d_out);
                for v in m.data.iter_mut() {
                    *v = rng.uniform(-bound, bound);
                }
                m
            })
            .collect();
        GnnParams { layers }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(|w| w.rows).collect();
        if let Some(last) = self.layers.last() {
            dims.push(last.cols);
        }
        dims
    }

    pub fn zeros_like(&self) -> Vec<Mat> {
        self.layers.iter().map(|w| Mat::zeros(w.rows, w.cols)).collect()
    }

    /// Versioned JSON checkpoint: layer dims plus row-major weights.
    pub fn to_checkpoint_json(&self) -> String {
        #[derive(Serialize)]
        struct Ckpt<'a> {
            version: u32,
            dims: Vec<usize>,
            layers: Vec<&'a [f64]>,
        }
        serde_json::to_string_pretty(&Ckpt {
            version: 1,
            dims: self.dims(),
            layers: self.layers.iter().map(|w| w.data.as_slice()).collect(),
        })
        .expect("serialize checkpoint")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Ckpt {
            version: u32,
            dims: Vec<usize>,
            layers: Vec<Vec<f64>>,
        }
        let ckpt: Ckpt =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("checkpoint: {e}")))?;
        if ckpt.version != 1 {
            return Err(Error::Config(format!(
                "checkpoint: unsupported version {}",
                ckpt.version
            )));
        }
        if ckpt.dims.len() < 2 || ckpt.layers.len() + 1 != ckpt.dims.len() {
            return Err(Error::Config("checkpoint: dims/layers mismatch".into()));
        }
        let mut layers = Vec::with_capacity(ckpt.layers.len());
        for (l, data) in ckpt.layers.into_iter().enumerate() {
            let (rows, cols) = (ckpt.dims[l], ckpt.dims[l + 1]);
            if data.len() != rows * cols {
                return Err(Error::Config(format!(
                    "checkpoint: layer {l} has {} values, expected {}",
                    data.len(),
                    rows * cols
                )));
            }
            layers.push(Mat { rows, cols, data });
        }
        Ok(GnnParams { layers })
    }
}

/// Forward activations H^(0..L) plus the pre-activations Z^(0..L-1) needed by
/// the backward pass and the kink-rejection checks.
#[derive(Debug, Clone)]
pub struct Activations {
    pub hs: Vec<Mat>,
    pub zs: Vec<Mat>,
}

impl Activations {
    pub fn final_embeddings(&self) -> &Mat {
        self.hs.last().expect("forward always yields H^(0)")
    }

    pub fn layer(&self, l: usize) -> &Mat {
        &self.hs[l]
    }
}

/// Run the stack: H^(l+1) = ReLU(A H^(l) W^(l)).
pub fn gcn_forward(h0: &Mat, a: &Mat, params: &GnnParams) -> Result<Activations> {
    if a.rows != a.cols {
        return Err(Error::Dimension {
            layer: 0,
            message: format!("adjacency is {}x{}, expected square", a.rows, a.cols),
        });
    }
    if h0.rows != a.rows {
        return Err(Error::Dimension {
            layer: 0,
            message: format!(
                "features have {} rows but adjacency has {}",
                h0.rows, a.rows
            ),
        });
    }
    let mut hs = vec![h0.clone()];
    let mut zs = Vec::with_capacity(params.layer_count());
    for (l, w) in params.layers.iter().enumerate() {
        let h = hs.last().unwrap();
        if h.cols != w.rows {
            return Err(Error::Dimension {
                layer: l,
                message: format!("H has {} columns but W expects {}", h.cols, w.rows),
            });
        }
        let z = a.matmul(h).matmul(w);
        if !z.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite activation at layer {l}"
            )));
        }
        hs.push(z.map(|v| v.max(0.0)));
        zs.push(z);
    }
    Ok(Activations { hs, zs })
}

/// Detection loss on matched prediction/ground-truth pairs.
///
/// l_bbox is the mean absolute coordinate error (averaged over the 4 box
/// coordinates and over pairs); l_cls is the mean cross-entropy of the
/// softmaxed logits against the ground-truth class. Empty match sets yield
/// (0, 0).
pub fn detection_loss(
    pred_boxes: &[BBox],
    pred_logits: &Mat,
    gt_boxes: &[BBox],
    gt_classes: &[usize],
) -> (f64, f64) {
    assert_eq!(pred_boxes.len(), gt_boxes.len());
    assert_eq!(pred_boxes.len(), gt_classes.len());
    assert_eq!(pred_logits.rows, pred_boxes.len());
    let n = pred_boxes.len();
    if n == 0 {
        return (0.0, 0.0);
    }

    let mut l_bbox = 0.0;
    for (p, g) in pred_boxes.iter().zip(gt_boxes) {
        l_bbox += ((p.cx - g.cx).abs()
            + (p.cy - g.cy).abs()
            + (p.w - g.w).abs()
            + (p.h - g.h).abs())
            / 4.0;
    }
    l_bbox /= n as f64;

    let mut l_cls = 0.0;
    for (i, &gt) in gt_classes.iter().enumerate() {
        let logits = pred_logits.row(i);
        assert!(gt < logits.len(), "gt class out of range");
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_sum: f64 = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        l_cls += log_sum - logits[gt];
    }
    l_cls /= n as f64;

    (l_bbox, l_cls)
}

/// Tracking loss over final-layer embeddings: the edge term sums squared
/// embedding distance over the frame-t edge set, the temporal term sums
/// squared drift over corresponding nodes of the next frame.
/// Returns (edge, temporal, edge + lambda_reg * temporal).
pub fn tracking_loss(
    emb_t: &Mat,
    emb_next: &Mat,
    edges: &[(usize, usize)],
    correspondence: &[(usize, usize)],
    lambda_reg: f64,
) -> (f64, f64, f64) {
    let mut edge_term = 0.0;
    for &(i, j) in edges {
        let (a, b) = (emb_t.row(i), emb_t.row(j));
        edge_term += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    let mut temporal_term = 0.0;
    for &(i, j) in correspondence {
        let (f, g) = (emb_t.row(i), emb_next.row(j));
        temporal_term += f.iter().zip(g).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
    }
    (edge_term, temporal_term, edge_term + lambda_reg * temporal_term)
}

/// Weighted sum of the two task losses.
pub fn total_loss(l_det: f64, l_track: f64, lambda_det: f64, lambda_track: f64) -> f64 {
    lambda_det * l_det + lambda_track * l_track
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_det: f64,
    pub lambda_track: f64,
    pub lambda_reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_det: 1.0,
            lambda_track: 1.0,
            lambda_reg: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_bbox: f64,
    pub l_cls: f64,
    pub l_det: f64,
    pub l_track_edge: f64,
    pub l_track_temporal: f64,
    pub l_track: f64,
    pub l_total: f64,
}

/// Two consecutive frames ready for the tracking objective: GNN inputs for
/// both, the frame-t edge list, and the node correspondence t -> t+1.
#[derive(Debug, Clone)]
pub struct GraphPair {
    pub h0_t: Mat,
    pub a_t: Mat,
    pub edges_t: Vec<(usize, usize)>,
    pub h0_next: Mat,
    pub a_next: Mat,
    pub correspondence: Vec<(usize, usize)>,
}

/// Matched detection supervision for the frame (already 1:1 paired).
#[derive(Debug, Clone)]
pub struct DetSupervision {
    pub pred_boxes: Vec<BBox>,
    pub pred_logits: Mat,
    pub gt_boxes: Vec<BBox>,
    pub gt_classes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainInstance {
    pub pair: GraphPair,
    pub det: Option<DetSupervision>,
}

fn breakdown(inst: &TrainInstance, emb_t: &Mat, emb_next: &Mat, w: &LossWeights) -> LossBreakdown {
    let (l_bbox, l_cls) = match &inst.det {
        Some(d) => detection_loss(&d.pred_boxes, &d.pred_logits, &d.gt_boxes, &d.gt_classes),
        None => (0.0, 0.0),
    };
    let l_det = l_bbox + l_cls;
    let (edge, temporal, l_track) = tracking_loss(
        emb_t,
        emb_next,
        &inst.pair.edges_t,
        &inst.pair.correspondence,
        w.lambda_reg,
    );
    LossBreakdown {
        l_bbox,
        l_cls,
        l_det,
        l_track_edge: edge,
        l_track_temporal: temporal,
        l_track,
        l_total: total_loss(l_det, l_track, w.lambda_det, w.lambda_track),
    }
}

/// Evaluate l_total for one instance (the finite-difference oracle calls this
/// with perturbed weights).
pub fn instance_loss(inst: &TrainInstance, params: &GnnParams, w: &LossWeights) -> Result<LossBreakdown> {
    let acts_t = gcn_forward(&inst.pair.h0_t, &inst.pair.a_t, params)?;
    let acts_next = gcn_forward(&inst.pair.h0_next, &inst.pair.a_next, params)?;
    Ok(breakdown(
        inst,
        acts_t.final_embeddings(),
        acts_next.final_embeddings(),
        w,
    ))
}

/// Backprop dL/dH^(L) through one forward pass, accumulating into `grads`.
fn backward_into(
    acts: &Activations,
    a: &Mat,
    params: &GnnParams,
    grad_final: Mat,
    grads: &mut [Mat],
) {
    let a_t = a.transpose();
    let mut g = grad_final;
    for l in (0..params.layer_count()).rev() {
        // ReLU subgradient: 1 where Z > 0, else 0 (0 at the kink).
        let mask = acts.zs[l].map(|z| if z > 0.0 { 1.0 } else { 0.0 });
        let dz = g.hadamard(&mask);
        let ah = a.matmul(&acts.hs[l]);
        grads[l] = grads[l].add(&ah.transpose().matmul(&dz));
        if l > 0 {
            g = a_t.matmul(&dz).matmul(&params.layers[l].transpose());
        }
    }
}

/// Exact gradients of l_total with respect to every W^(l).
///
/// The detection loss does not depend on the weights, so the gradient path
/// runs entirely through the tracking terms of both frames.
pub fn loss_gradients(
    inst: &TrainInstance,
    params: &GnnParams,
    w: &LossWeights,
) -> Result<(Vec<Mat>, LossBreakdown)> {
    let acts_t = gcn_forward(&inst.pair.h0_t, &inst.pair.a_t, params)?;
    let acts_next = gcn_forward(&inst.pair.h0_next, &inst.pair.a_next, params)?;
    let emb_t = acts_t.final_embeddings();
    let emb_next = acts_next.final_embeddings();
    let losses = breakdown(inst, emb_t, emb_next, w);
    if !losses.l_total.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite total loss {}",
            losses.l_total
        )));
    }

    let scale = w.lambda_track;
    let mut grad_t = Mat::zeros(emb_t.rows, emb_t.cols);
    let mut grad_next = Mat::zeros(emb_next.rows, emb_next.cols);
    for &(i, j) in &inst.pair.edges_t {
        for c in 0..emb_t.cols {
            let diff = emb_t.get(i, c) - emb_t.get(j, c);
            grad_t.data[i * emb_t.cols + c] += 2.0 * scale * diff;
            grad_t.data[j * emb_t.cols + c] -= 2.0 * scale * diff;
        }
    }
    let reg = scale * w.lambda_reg;
    for &(i, j) in &inst.pair.correspondence {
        for c in 0..emb_t.cols {
            let drift = emb_next.get(j, c) - emb_t.get(i, c);
            grad_next.data[j * emb_next.cols + c] += 2.0 * reg * drift;
            grad_t.data[i * emb_t.cols + c] -= 2.0 * reg * drift;
        }
    }

    let mut grads = params.zeros_like();
    backward_into(&acts_t, &inst.pair.a_t, params, grad_t, &mut grads);
    backward_into(&acts_next, &inst.pair.a_next, params, grad_next, &mut grads);
    for (l, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient at layer {l}"
            )));
        }
    }
    Ok((grads, losses))
}

/// One descent step over a batch: W <- W - lr * mean gradient, with optional
/// classical momentum. Returns the post-step loss breakdown averaged over the
/// batch. Batch gradients are computed independently per item and reduced in
/// input order, so the result is identical with or without parallelism.
pub fn train_step(
    params: &GnnParams,
    batch: &[TrainInstance],
    lr: f64,
    momentum: f64,
    velocity: &mut Option<Vec<Mat>>,
    w: &LossWeights,
) -> Result<(GnnParams, LossBreakdown)> {
    assert!(lr >= 0.0, "learning rate must be non-negative");
    assert!(!batch.is_empty(), "empty batch");

    let per_item = crate::par::try_map(batch, |inst| loss_gradients(inst, params, w))?;

    let mut mean_grads = params.zeros_like();
    for (grads, _) in &per_item {
        for (acc, g) in mean_grads.iter_mut().zip(grads) {
            *acc = acc.add(g);
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for g in mean_grads.iter_mut() {
        *g = g.scale(inv);
    }

    let vel = velocity.get_or_insert_with(|| params.zeros_like());
    let mut new_layers = Vec::with_capacity(params.layer_count());
    for ((wmat, g), v) in params.layers.iter().zip(&mean_grads).zip(vel.iter_mut()) {
        *v = v.scale(momentum).add(&g.scale(-lr));
        new_layers.push(wmat.add(v));
    }
    let new_params = GnnParams { layers: new_layers };

    let post: Vec<LossBreakdown> = crate::par::try_map(batch, |inst| {
        instance_loss(inst, &new_params, w)
    })?;
    let n = post.len() as f64;
    let mean = LossBreakdown {
        l_bbox: post.iter().map(|b| b.l_bbox).sum::<f64>() / n,
        l_cls: post.iter().map(|b| b.l_cls).sum::<f64>() / n,
        l_det: post.iter().map(|b| b.l_det).sum::<f64>() / n,
        l_track_edge: post.iter().map(|b| b.l_track_edge).sum::<f64>() / n,
        l_track_temporal: post.iter().map(|b| b.l_track_temporal).sum::<f64>() / n,
        l_track: post.iter().map(|b| b.l_track).sum::<f64>() / n,
        l_total: post.iter().map(|b| b.l_total).sum::<f64>() / n,
    };
    if !mean.l_total.is_finite() {
        return Err(Error::Divergence(format!(
            "total loss diverged to {}",
            mean.l_total
        )));
    }
    Ok((new_params, mean))
}

/// Assemble supervised training instances from a detection stream and its
/// ground truth: consecutive frame pairs with graphs built the same way the
/// tracker builds them (motion carried over via ground-truth identity),
/// node correspondence through shared ground-truth objects, and detection
/// supervision from per-frame matching. Class logits are derived from the
/// detection confidence (predicted class gets the confidence, the remainder
/// is spread uniformly).
pub fn build_training_set(
    stream: &[crate::detect::FrameDetections],
    gt: &[crate::io::TrackedFrame],
    config: &crate::config::RunConfig,
) -> Vec<TrainInstance> {
    use std::collections::BTreeMap;

    let gt_by_frame: BTreeMap<u64, &crate::io::TrackedFrame> =
        gt.iter().map(|f| (f.frame_index, f)).collect();

    let num_classes = gt
        .iter()
        .flat_map(|f| f.boxes.iter().map(|b| b.det.class_id))
        .chain(
            stream
                .iter()
                .flat_map(|f| f.detections.iter().map(|d| d.class_id)),
        )
        .max()
        .map_or(1, |c| c as usize + 1);

    // Per frame: cleaned detections, gt object per detection, and the graph.
    struct FrameData {
        dets: crate::detect::FrameDetections,
        object_of_det: Vec<Option<u64>>,
        graph: crate::graph::DynamicGraph,
        adj: Mat,
        det_sup: Option<DetSupervision>,
    }

    let mut frames: Vec<FrameData> = Vec::new();
    let mut prev_obj_box: BTreeMap<u64, (crate::detect::BBox, u64)> = BTreeMap::new();
    for frame in stream {
        let Some(gt_frame) = gt_by_frame.get(&frame.frame_index) else {
            continue;
        };
        let gated = crate::detect::confidence_gate(frame, config.detect.conf_threshold);
        let mut keep = crate::detect::nms_keep_indices(&gated.detections, config.detect.nms_iou);
        keep.sort_unstable();
        let dets: Vec<crate::detect::Detection> =
            keep.iter().map(|&i| gated.detections[i].clone()).collect();
        let clean = crate::detect::FrameDetections::new(frame.frame_index, dets);

        let gt_dets: Vec<crate::detect::Detection> =
            gt_frame.boxes.iter().map(|b| b.det.clone()).collect();
        let matches = crate::eval::match_frame(&clean.detections, &gt_dets, config.eval_iou);
        let mut object_of_det = vec![None; clean.detections.len()];
        for &(pi, gi, _) in &matches.pairs {
            object_of_det[pi] = Some(gt_frame.boxes[gi].id);
        }

        let carryover: Vec<Option<(crate::detect::BBox, u64)>> = object_of_det
            .iter()
            .map(|obj| {
                obj.and_then(|id| prev_obj_box.get(&id).copied()).and_then(
                    |(b, seen)| {
                        let gap = frame.frame_index.saturating_sub(seen);
                        if gap >= 1 {
                            Some((b, gap))
                        } else {
                            None
                        }
                    },
                )
            })
            .collect();

        let graph = crate::graph::update_graph(
            &crate::graph::DynamicGraph::empty(frame.frame_index.saturating_sub(1)),
            &clean,
            &carryover,
            &config.graph,
        );
        let adj = crate::graph::adjacency(&graph, config.graph.adjacency).mat;

        let det_sup = if matches.pairs.is_empty() {
            None
        } else {
            let mut pred_boxes = Vec::new();
            let mut gt_boxes = Vec::new();
            let mut gt_classes = Vec::new();
            let mut logits = Mat::zeros(matches.pairs.len(), num_classes);
            for (row, &(pi, gi, _)) in matches.pairs.iter().enumerate() {
                let det = &clean.detections[pi];
                pred_boxes.push(det.box_);
                gt_boxes.push(gt_frame.boxes[gi].det.box_);
                gt_classes.push(gt_frame.boxes[gi].det.class_id as usize);
                let p = det.confidence.clamp(1e-6, 1.0 - 1e-6);
                let rest = (1.0 - p) / ((num_classes.max(2) - 1) as f64);
                for c in 0..num_classes {
                    let prob = if c == det.class_id as usize { p } else { rest };
                    logits.set(row, c, prob.max(1e-12).ln());
                }
            }
            Some(DetSupervision {
                pred_boxes,
                pred_logits: logits,
                gt_boxes,
                gt_classes,
            })
        };

        for (det, obj) in clean.detections.iter().zip(&object_of_det) {
            if let Some(id) = obj {
                prev_obj_box.insert(*id, (det.box_, frame.frame_index));
            }
        }

        frames.push(FrameData {
            dets: clean,
            object_of_det,
            graph,
            adj,
            det_sup,
        });
    }

    let mut instances = Vec::new();
    for pair in frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.dets.detections.is_empty() || b.dets.detections.is_empty() {
            continue;
        }
        let next_of_obj: BTreeMap<u64, usize> = b
            .object_of_det
            .iter()
            .enumerate()
            .filter_map(|(j, obj)| obj.map(|id| (id, j)))
            .collect();
        let correspondence: Vec<(usize, usize)> = a
            .object_of_det
            .iter()
            .enumerate()
            .filter_map(|(i, obj)| {
                obj.and_then(|id| next_of_obj.get(&id).map(|&j| (i, j)))
            })
            .collect();
        instances.push(TrainInstance {
            pair: GraphPair {
                h0_t: a.graph.feature_matrix(),
                a_t: a.adj.clone(),
                edges_t: a.graph.edges.iter().map(|e| (e.i, e.j)).collect(),
                h0_next: b.graph.feature_matrix(),
                a_next: b.adj.clone(),
                correspondence,
            },
            det: b.det_sup.clone(),
        });
    }
    instances
}
