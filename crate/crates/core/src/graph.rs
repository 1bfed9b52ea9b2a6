//! Per-frame dynamic graph: node feature assembly, pairwise edge factors,
//! kernel edge weighting, and adjacency materialization.
//!
//! Edge existence and edge strength are separate concerns: a pair is gated in
//! when distance < tau_dist OR velocity difference < tau_vel (the AND form is
//! selectable), and surviving edges carry a product of exponential kernels
//! over distance and velocity times the clamped appearance cosine.

use crate::detect::{BBox, Detection, FrameDetections};
use crate::mat::{cosine, norm2, Mat};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeGate {
    /// Connect when either factor passes its threshold.
    Or,
    /// Connect only when both factors pass.
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyMode {
    /// Edge weights with a zero diagonal.
    Raw,
    /// Row-normalized weights with self-loops: RowNorm(A + I).
    Normalized,
}

/// Graph-construction knobs, including the ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Distance kernel scale (normalized units).
    pub sigma_d: f64,
    /// Velocity kernel scale (normalized units per frame).
    pub sigma_v: f64,
    /// Distance gate threshold.
    pub tau_dist: f64,
    /// Velocity-difference gate threshold.
    pub tau_vel: f64,
    /// Multiplier on the motion components inside the composite feature
    /// vector; 1.0 keeps the plain concatenation. Raising it makes velocity
    /// visible to the embedding next to the larger spatial coordinates.
    pub motion_scale: f64,
    pub edge_gate: EdgeGate,
    pub adjacency: AdjacencyMode,
    /// Velocity similarity switch: when off, the gate reduces to distance
    /// only and the velocity kernel is dropped from edge weights.
    pub use_velocity: bool,
    /// Appearance-similarity switch for edge weights.
    pub use_appearance: bool,
    /// Motion features switch: when off, node motion is frozen to zero.
    pub use_temporal: bool,
    /// Force every surviving edge weight to 1.0.
    pub constant_edge_weights: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            sigma_d: 0.1,
            sigma_v: 0.05,
            tau_dist: 0.2,
            tau_vel: 0.05,
            motion_scale: 1.0,
            edge_gate: EdgeGate::Or,
            adjacency: AdjacencyMode::Normalized,
            use_velocity: true,
            use_appearance: true,
            use_temporal: true,
            constant_edge_weights: false,
        }
    }
}

/// Node feature: spatial [cx, cy, w, h], motion [vx, vy], optional appearance
/// embedding; `composite` is their concatenation and feeds the GNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeature {
    pub spatial: [f64; 4],
    pub motion: [f64; 2],
    pub appearance: Option<Vec<f64>>,
    pub composite: Vec<f64>,
}

impl NodeFeature {
    pub fn center(&self) -> [f64; 2] {
        [self.spatial[0], self.spatial[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeFactors {
    pub distance: f64,
    pub velocity_diff: f64,
    pub appearance_sim: f64,
}

/// Undirected edge stored once with i < j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub factors: EdgeFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicGraph {
    pub frame_index: u64,
    pub nodes: Vec<NodeFeature>,
    pub edges: Vec<GraphEdge>,
}

impl DynamicGraph {
    pub fn empty(frame_index: u64) -> Self {
        DynamicGraph {
            frame_index,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Stacked composite vectors, the GNN input H^(0).
    pub fn feature_matrix(&self) -> Mat {
        let rows: Vec<Vec<f64>> = self.nodes.iter().map(|n| n.composite.clone()).collect();
        if rows.is_empty() {
            Mat::zeros(0, 0)
        } else {
            Mat::from_rows(&rows)
        }
    }

    /// Debug dump: `{"frame": t, "nodes": [...], "edges": [[i,j,w],...]}`.
    pub fn dump_line(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            frame: u64,
            nodes: Vec<&'a [f64]>,
            edges: Vec<(usize, usize, f64)>,
        }
        let dump = Dump {
            frame: self.frame_index,
            nodes: self.nodes.iter().map(|n| n.composite.as_slice()).collect(),
            edges: self.edges.iter().map(|e| (e.i, e.j, e.weight)).collect(),
        };
        serde_json::to_string(&dump).expect("serialize graph dump")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub n: usize,
    pub mode: AdjacencyMode,
    pub mat: Mat,
}

/// Assemble one node's features. Motion is the center displacement per frame
/// against the carried-over previous box, zero on first observation.
pub fn node_feature(det: &Detection, prev: Option<(&BBox, u64)>) -> NodeFeature {
    node_feature_scaled(det, prev, 1.0)
}

/// As `node_feature`, with the composite's motion block multiplied by
/// `motion_scale` (the stored motion stays in natural units).
pub fn node_feature_scaled(
    det: &Detection,
    prev: Option<(&BBox, u64)>,
    motion_scale: f64,
) -> NodeFeature {
    let spatial = [det.box_.cx, det.box_.cy, det.box_.w, det.box_.h];
    let motion = match prev {
        Some((prev_box, gap)) if gap >= 1 => {
            let g = gap as f64;
            [
                (det.box_.cx - prev_box.cx) / g,
                (det.box_.cy - prev_box.cy) / g,
            ]
        }
        _ => [0.0, 0.0],
    };
    let appearance = det.embedding.clone();
    let mut composite = Vec::with_capacity(6 + appearance.as_ref().map_or(0, |e| e.len()));
    composite.extend_from_slice(&spatial);
    composite.push(motion[0] * motion_scale);
    composite.push(motion[1] * motion_scale);
    if let Some(e) = &appearance {
        composite.extend_from_slice(e);
    }
    NodeFeature {
        spatial,
        motion,
        appearance,
        composite,
    }
}

/// Pairwise factors: Euclidean center distance, Euclidean velocity
/// difference, and appearance cosine (neutral 1.0 when either embedding is
/// missing, so geometry-only streams keep their edges).
pub fn edge_factors(a: &NodeFeature, b: &NodeFeature) -> EdgeFactors {
    let d = norm2(&[
        a.spatial[0] - b.spatial[0],
        a.spatial[1] - b.spatial[1],
    ]);
    let dv = norm2(&[a.motion[0] - b.motion[0], a.motion[1] - b.motion[1]]);
    let s = match (&a.appearance, &b.appearance) {
        (Some(ea), Some(eb)) => cosine(ea, eb),
        _ => 1.0,
    };
    EdgeFactors {
        distance: d,
        velocity_diff: dv,
        appearance_sim: s,
    }
}

/// Kernel-product edge weight in [0,1].
pub fn edge_weight(factors: &EdgeFactors, cfg: &GraphConfig) -> f64 {
    let mut w = (-factors.distance / cfg.sigma_d).exp();
    if cfg.use_velocity {
        w *= (-factors.velocity_diff / cfg.sigma_v).exp();
    }
    if cfg.use_appearance {
        w *= factors.appearance_sim.max(0.0);
    }
    w
}

fn gate(factors: &EdgeFactors, cfg: &GraphConfig) -> bool {
    let near = factors.distance < cfg.tau_dist;
    if !cfg.use_velocity {
        return near;
    }
    let similar_velocity = factors.velocity_diff < cfg.tau_vel;
    match cfg.edge_gate {
        EdgeGate::Or => near || similar_velocity,
        EdgeGate::And => near && similar_velocity,
    }
}

/// Rebuild the graph for a frame: one node per detection (departed objects
/// simply have no node), edges over all gated pairs. `carryover[k]` supplies
/// the previous box and frame gap for detection k when its object was seen
/// before. The incremental update of the previous graph and a fresh build
/// agree by construction; `prev` only carries the frame index forward for
/// ordering checks.
pub fn update_graph(
    prev: &DynamicGraph,
    frame: &FrameDetections,
    carryover: &[Option<(BBox, u64)>],
    cfg: &GraphConfig,
) -> DynamicGraph {
    debug_assert!(frame.frame_index > prev.frame_index || prev.node_count() == 0);
    debug_assert_eq!(carryover.len(), frame.detections.len());
    let nodes: Vec<NodeFeature> = frame
        .detections
        .iter()
        .zip(carryover)
        .map(|(det, prev_pos)| {
            let prev_ref = if cfg.use_temporal {
                prev_pos.as_ref().map(|(b, g)| (b, *g))
            } else {
                None
            };
            node_feature_scaled(det, prev_ref, cfg.motion_scale)
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let factors = edge_factors(&nodes[i], &nodes[j]);
            if gate(&factors, cfg) {
                let weight = if cfg.constant_edge_weights {
                    1.0
                } else {
                    edge_weight(&factors, cfg)
                };
                edges.push(GraphEdge {
                    i,
                    j,
                    weight,
                    factors,
                });
            }
        }
    }

    DynamicGraph {
        frame_index: frame.frame_index,
        nodes,
        edges,
    }
}

/// Materialize the adjacency matrix. Raw mode keeps the symmetric weights
/// with a zero diagonal; normalized mode returns RowNorm(A + I), which keeps
/// deep stacks scale-stable (rows with no edges reduce to the self-loop).
pub fn adjacency(g: &DynamicGraph, mode: AdjacencyMode) -> AdjacencyMatrix {
    let n = g.node_count();
    let mut mat = Mat::zeros(n, n);
    for e in &g.edges {
        mat.set(e.i, e.j, e.weight);
        mat.set(e.j, e.i, e.weight);
    }
    if mode == AdjacencyMode::Normalized {
        for i in 0..n {
            mat.set(i, i, 1.0);
        }
        for i in 0..n {
            let sum: f64 = g.edges
                .iter()
                .filter(|e| e.i == i || e.j == i)
                .map(|e| e.weight)
                .sum::<f64>()
                + 1.0;
            for j in 0..n {
                mat.set(i, j, mat.get(i, j) / sum);
            }
        }
    }
    AdjacencyMatrix { n, mode, mat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Detection;
    use crate::rng::Rng;

    fn det_at(cx: f64, cy: f64) -> Detection {
        Detection::new(BBox::new(cx, cy, 0.05, 0.05), 1.0, 0, "obj")
    }

    fn node_at(cx: f64, cy: f64, vx: f64, vy: f64) -> NodeFeature {
        let mut n = node_feature(&det_at(cx, cy), None);
        n.motion = [vx, vy];
        n.composite[4] = vx;
        n.composite[5] = vy;
        n
    }

    #[test]
    fn motion_defaults_to_zero() {
        let n = node_feature(&det_at(0.5, 0.5), None);
        assert_eq!(n.motion, [0.0, 0.0]);
        assert_eq!(n.composite.len(), 6);
    }

    #[test]
    fn motion_from_displacement_and_gap() {
        let prev = BBox::new(0.10, 0.10, 0.05, 0.05);
        let n1 = node_feature(&det_at(0.16, 0.18), Some((&prev, 1)));
        assert!((n1.motion[0] - 0.06).abs() < 1e-12);
        assert!((n1.motion[1] - 0.08).abs() < 1e-12);
        let n2 = node_feature(&det_at(0.16, 0.18), Some((&prev, 2)));
        assert!((n2.motion[0] - 0.03).abs() < 1e-12);
        assert!((n2.motion[1] - 0.04).abs() < 1e-12);
    }

    #[test]
    fn factors_identical_nodes() {
        let mut det = det_at(0.4, 0.4);
        det.embedding = Some(vec![0.6, 0.8]);
        let n = node_feature(&det, None);
        let f = edge_factors(&n, &n);
        assert_eq!(f.distance, 0.0);
        assert_eq!(f.velocity_diff, 0.0);
        assert!((f.appearance_sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factors_345_distance() {
        let a = node_at(0.0, 0.0, 0.0, 0.0);
        let b = node_at(0.3, 0.4, 0.0, 0.0);
        assert!((edge_factors(&a, &b).distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn factors_orthogonal_embeddings() {
        let mut da = det_at(0.4, 0.4);
        da.embedding = Some(vec![1.0, 0.0]);
        let mut db = det_at(0.4, 0.4);
        db.embedding = Some(vec![0.0, 1.0]);
        let f = edge_factors(&node_feature(&da, None), &node_feature(&db, None));
        assert_eq!(f.appearance_sim, 0.0);
    }

    #[test]
    fn factors_symmetric() {
        let mut rng = Rng::new(2);
        for _ in 0..20 {
            let a = node_at(rng.next_f64(), rng.next_f64(), rng.gaussian(), rng.gaussian());
            let b = node_at(rng.next_f64(), rng.next_f64(), rng.gaussian(), rng.gaussian());
            let fab = edge_factors(&a, &b);
            let fba = edge_factors(&b, &a);
            assert_eq!(fab, fba);
        }
    }

    #[test]
    fn weight_neutral_factors() {
        let cfg = GraphConfig::default();
        let f = EdgeFactors {
            distance: 0.0,
            velocity_diff: 0.0,
            appearance_sim: 1.0,
        };
        assert_eq!(edge_weight(&f, &cfg), 1.0);
    }

    #[test]
    fn weight_at_distance_scale() {
        let cfg = GraphConfig::default();
        let f = EdgeFactors {
            distance: cfg.sigma_d,
            velocity_diff: 0.0,
            appearance_sim: 1.0,
        };
        assert!((edge_weight(&f, &cfg) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn weight_clamps_negative_similarity() {
        let cfg = GraphConfig::default();
        let f = EdgeFactors {
            distance: 0.1,
            velocity_diff: 0.0,
            appearance_sim: -0.5,
        };
        assert_eq!(edge_weight(&f, &cfg), 0.0);
    }

    #[test]
    fn weight_monotone_in_distance_and_velocity() {
        let cfg = GraphConfig::default();
        let mut rng = Rng::new(4);
        for _ in 0..50 {
            let base = EdgeFactors {
                distance: rng.uniform(0.0, 0.5),
                velocity_diff: rng.uniform(0.0, 0.2),
                appearance_sim: rng.uniform(0.0, 1.0),
            };
            let mut farther = base;
            farther.distance += 0.01;
            assert!(edge_weight(&farther, &cfg) < edge_weight(&base, &cfg));
            let mut faster = base;
            faster.velocity_diff += 0.01;
            assert!(edge_weight(&faster, &cfg) < edge_weight(&base, &cfg));
            let mut more_similar = base;
            more_similar.appearance_sim = (base.appearance_sim + 0.1).min(1.0);
            assert!(edge_weight(&more_similar, &cfg) >= edge_weight(&base, &cfg));
        }
    }

    #[test]
    fn empty_frame_empty_graph() {
        let g = update_graph(
            &DynamicGraph::empty(0),
            &FrameDetections::empty(1),
            &[],
            &GraphConfig::default(),
        );
        assert_eq!(g.node_count(), 0);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn disjunctive_gate_connects_far_nodes_with_equal_velocity() {
        // d > tau_dist but dv = 0 < tau_vel: the OR gate keeps the edge.
        let cfg = GraphConfig::default();
        let frame = FrameDetections::new(
            1,
            vec![det_at(0.1, 0.5), det_at(0.9, 0.5)],
        );
        let prev_a = BBox::new(0.08, 0.5, 0.05, 0.05);
        let prev_b = BBox::new(0.88, 0.5, 0.05, 0.05);
        let carry = vec![Some((prev_a, 1)), Some((prev_b, 1))];
        let g = update_graph(&DynamicGraph::empty(0), &frame, &carry, &cfg);
        assert!(g.edges[0].factors.distance > cfg.tau_dist);
        assert_eq!(g.edges.len(), 1);

        let mut and_cfg = cfg.clone();
        and_cfg.edge_gate = EdgeGate::And;
        let g_and = update_graph(&DynamicGraph::empty(0), &frame, &carry, &and_cfg);
        assert!(g_and.edges.is_empty());
    }

    #[test]
    fn edge_set_matches_brute_force_gate() {
        let cfg = GraphConfig::default();
        let mut rng = Rng::new(7);
        for _ in 0..30 {
            let n = rng.below(8) + 2;
            let dets: Vec<Detection> = (0..n)
                .map(|_| det_at(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)))
                .collect();
            let carry: Vec<Option<(BBox, u64)>> = dets
                .iter()
                .map(|d| {
                    Some((
                        BBox::new(
                            (d.box_.cx - rng.uniform(-0.05, 0.05)).clamp(0.0, 1.0),
                            (d.box_.cy - rng.uniform(-0.05, 0.05)).clamp(0.0, 1.0),
                            d.box_.w,
                            d.box_.h,
                        ),
                        1,
                    ))
                })
                .collect();
            let frame = FrameDetections::new(1, dets);
            let g = update_graph(&DynamicGraph::empty(0), &frame, &carry, &cfg);
            let got: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.i, e.j)).collect();

            // Brute force: recompute features and evaluate the gate directly.
            let mut want = Vec::new();
            for i in 0..g.nodes.len() {
                for j in i + 1..g.nodes.len() {
                    let (ci, cj) = (g.nodes[i].center(), g.nodes[j].center());
                    let d = ((ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2)).sqrt();
                    let (vi, vj) = (g.nodes[i].motion, g.nodes[j].motion);
                    let dv = ((vi[0] - vj[0]).powi(2) + (vi[1] - vj[1]).powi(2)).sqrt();
                    if d < cfg.tau_dist || dv < cfg.tau_vel {
                        want.push((i, j));
                    }
                }
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn translation_invariance() {
        let cfg = GraphConfig::default();
        let mut rng = Rng::new(13);
        let dets: Vec<Detection> = (0..6)
            .map(|_| det_at(rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)))
            .collect();
        let carry: Vec<Option<(BBox, u64)>> = vec![None; 6];
        let frame = FrameDetections::new(1, dets.clone());
        let g = update_graph(&DynamicGraph::empty(0), &frame, &carry, &cfg);

        let shifted: Vec<Detection> = dets
            .iter()
            .map(|d| {
                let mut s = d.clone();
                s.box_.cx += 0.3;
                s.box_.cy += 0.4;
                s
            })
            .collect();
        let g2 = update_graph(
            &DynamicGraph::empty(0),
            &FrameDetections::new(1, shifted),
            &carry,
            &cfg,
        );
        assert_eq!(g.edges.len(), g2.edges.len());
        for (e1, e2) in g.edges.iter().zip(&g2.edges) {
            assert_eq!((e1.i, e1.j), (e2.i, e2.j));
            assert!((e1.weight - e2.weight).abs() < 1e-12);
            assert!((e1.factors.distance - e2.factors.distance).abs() < 1e-12);
        }
    }

    #[test]
    fn adjacency_single_node_raw_is_zero() {
        let frame = FrameDetections::new(0, vec![det_at(0.5, 0.5)]);
        let g = update_graph(
            &DynamicGraph::empty(0),
            &frame,
            &[None],
            &GraphConfig::default(),
        );
        let a = adjacency(&g, AdjacencyMode::Raw);
        assert_eq!(a.mat, Mat::zeros(1, 1));
    }

    #[test]
    fn adjacency_normalized_two_nodes() {
        // One edge of weight 0.5: rows of RowNorm(A + I) are [2/3, 1/3].
        let mut g = DynamicGraph::empty(0);
        g.nodes = vec![node_at(0.1, 0.1, 0.0, 0.0), node_at(0.2, 0.1, 0.0, 0.0)];
        g.edges = vec![GraphEdge {
            i: 0,
            j: 1,
            weight: 0.5,
            factors: EdgeFactors {
                distance: 0.1,
                velocity_diff: 0.0,
                appearance_sim: 1.0,
            },
        }];
        let a = adjacency(&g, AdjacencyMode::Normalized);
        assert!((a.mat.get(0, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.mat.get(0, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((a.mat.get(1, 0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((a.mat.get(1, 1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn adjacency_rows_sum_to_one() {
        let cfg = GraphConfig::default();
        let mut rng = Rng::new(17);
        for _ in 0..20 {
            let n = rng.below(10) + 1;
            let dets: Vec<Detection> = (0..n)
                .map(|_| det_at(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)))
                .collect();
            let carry = vec![None; n];
            let g = update_graph(
                &DynamicGraph::empty(0),
                &FrameDetections::new(1, dets),
                &carry,
                &cfg,
            );
            let a = adjacency(&g, AdjacencyMode::Normalized);
            for i in 0..n {
                let sum: f64 = a.mat.row(i).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
            }
            let raw = adjacency(&g, AdjacencyMode::Raw);
            for i in 0..n {
                assert_eq!(raw.mat.get(i, i), 0.0);
                for j in 0..n {
                    assert_eq!(raw.mat.get(i, j), raw.mat.get(j, i));
                }
            }
        }
    }

    #[test]
    fn dump_line_shape() {
        let frame = FrameDetections::new(2, vec![det_at(0.2, 0.2), det_at(0.25, 0.2)]);
        let g = update_graph(
            &DynamicGraph::empty(0),
            &frame,
            &[None, None],
            &GraphConfig::default(),
        );
        let line = g.dump_line();
        assert!(line.starts_with("{\"frame\":2,\"nodes\":"));
        assert!(line.contains("\"edges\":"));
    }
}
