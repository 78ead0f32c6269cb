//! Evaluation metrics for 3D boxes: 2D/3D IoU, center and closest-point
//! errors, orientation similarity (AOS/AP/OS) and distance-binned curves.
//!
//! 3D IoU is footprint-based: both boxes are projected along their shared
//! vertical onto a common plane, the convex footprints are clipped against
//! each other, and the intersection volume is footprint overlap times
//! vertical overlap. This is exact when both boxes stand on the same
//! gravity normal, which the 5-degree precondition enforces.

use nalgebra::{Point3, Vector2, Vector3};
use thiserror::Error;

use crate::encoding::wrap_angle;
use crate::solver::Cuboid3D;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no ground truth boxes; AP is undefined")]
    EmptyGroundTruth,
    #[error("cuboid footprint is not convex")]
    NonConvexFootprint,
    #[error("cuboid verticals differ by {angle_deg:.2} deg (limit 5 deg)")]
    MisalignedVerticals { angle_deg: f64 },
}

/// Axis-aligned 2D IoU; 0 for disjoint boxes.
pub fn iou_2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let area_a = (a[2] - a[0]).max(0.0) * (a[3] - a[1]).max(0.0);
    let area_b = (b[2] - b[0]).max(0.0) * (b[3] - b[1]).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn shoelace(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += poly[i].x * poly[j].y - poly[j].x * poly[i].y;
    }
    0.5 * acc
}

/// Clip `subject` against one directed edge (inside = left of a->b).
fn clip_edge(subject: &[Vector2<f64>], a: Vector2<f64>, b: Vector2<f64>) -> Vec<Vector2<f64>> {
    let side = |p: Vector2<f64>| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let mut out = Vec::with_capacity(subject.len() + 1);
    let n = subject.len();
    for i in 0..n {
        let cur = subject[i];
        let next = subject[(i + 1) % n];
        let sc = side(cur);
        let sn = side(next);
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0) {
            let t = sc / (sc - sn);
            out.push(cur + (next - cur) * t);
        }
    }
    out
}

/// Intersection area of two convex CCW polygons (Sutherland-Hodgman).
fn convex_intersection_area(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> f64 {
    let mut poly = subject.to_vec();
    for i in 0..clip.len() {
        if poly.len() < 3 {
            return 0.0;
        }
        poly = clip_edge(&poly, clip[i], clip[(i + 1) % clip.len()]);
    }
    if poly.len() < 3 {
        0.0
    } else {
        shoelace(&poly).abs()
    }
}

/// Footprint of a cuboid in the (e1, e2) frame, forced counter-clockwise.
fn footprint(
    cuboid: &Cuboid3D,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
) -> Result<Vec<Vector2<f64>>, MetricsError> {
    let mut poly: Vec<Vector2<f64>> = cuboid
        .bottom_corners()
        .iter()
        .map(|c| Vector2::new(c.coords.dot(e1), c.coords.dot(e2)))
        .collect();
    if shoelace(&poly) < 0.0 {
        poly.reverse();
    }
    // convexity guard for corrupted input
    let n = poly.len();
    for i in 0..n {
        let p0 = poly[i];
        let p1 = poly[(i + 1) % n];
        let p2 = poly[(i + 2) % n];
        let cross = (p1.x - p0.x) * (p2.y - p1.y) - (p1.y - p0.y) * (p2.x - p1.x);
        if cross < -1e-9 {
            return Err(MetricsError::NonConvexFootprint);
        }
    }
    Ok(poly)
}

/// Oriented 3D IoU of two cuboids sharing their vertical within 5 degrees.
pub fn iou_3d(a: &Cuboid3D, b: &Cuboid3D) -> Result<f64, MetricsError> {
    let up_a = a.up();
    let up_b = b.up();
    let cos = up_a.dot(&up_b).clamp(-1.0, 1.0);
    let angle_deg = cos.acos().to_degrees();
    if angle_deg > 5.0 {
        return Err(MetricsError::MisalignedVerticals { angle_deg });
    }
    let up = (up_a + up_b).normalize();
    // orthonormal in-plane basis from the most orthogonal world axis
    let seed = if up.x.abs() <= up.y.abs() && up.x.abs() <= up.z.abs() {
        Vector3::x()
    } else if up.y.abs() <= up.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = up.cross(&seed).normalize();
    let e2 = up.cross(&e1);

    let foot_a = footprint(a, &e1, &e2)?;
    let foot_b = footprint(b, &e1, &e2)?;
    let inter_area = convex_intersection_area(&foot_a, &foot_b);

    let extent = |c: &Cuboid3D| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for corner in c.corners() {
            let h = corner.coords.dot(&up);
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi)
    };
    let (lo_a, hi_a) = extent(a);
    let (lo_b, hi_b) = extent(b);
    let v_overlap = (hi_a.min(hi_b) - lo_a.max(lo_b)).max(0.0);

    let vol_a = shoelace(&foot_a).abs() * (hi_a - lo_a);
    let vol_b = shoelace(&foot_b).abs() * (hi_b - lo_b);
    let inter = inter_area * v_overlap;
    let union = vol_a + vol_b - inter;
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// A predicted or ground-truth box with its image-space 2D box.
#[derive(Debug, Clone)]
pub struct EvalBox {
    pub cuboid: Cuboid3D,
    pub box2d: [f64; 4],
}

/// A matched prediction/truth pair; `distance` is the truth center's
/// distance from the camera and drives the distance-binned curves.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub pred: EvalBox,
    pub truth: EvalBox,
    pub distance: f64,
}

impl EvalPair {
    pub fn new(pred: EvalBox, truth: EvalBox) -> Self {
        let distance = truth.cuboid.center().coords.norm();
        Self {
            pred,
            truth,
            distance,
        }
    }
}

/// Euclidean distance between predicted and true box centers.
pub fn center_error(pair: &EvalPair) -> f64 {
    (pair.pred.cuboid.center() - pair.truth.cuboid.center()).norm()
}

/// Difference in camera distance to the nearest point of each solid box.
/// The camera sits at the origin of the metric frame.
pub fn closest_point_error(pair: &EvalPair) -> f64 {
    let origin = Point3::origin();
    (pair.pred.cuboid.distance_to_point(&origin) - pair.truth.cuboid.distance_to_point(&origin))
        .abs()
}

/// Absolute yaw difference in degrees, wrapped to [0, 180].
pub fn orientation_error_deg(pair: &EvalPair) -> f64 {
    wrap_angle(pair.pred.cuboid.yaw() - pair.truth.cuboid.yaw())
        .abs()
        .to_degrees()
}

/// 3D IoU of the pair (0 when the verticals are out of tolerance).
pub fn pair_iou_3d(pair: &EvalPair) -> f64 {
    iou_3d(&pair.pred.cuboid, &pair.truth.cuboid).unwrap_or(0.0)
}

/// Standard difficulty buckets for ground-truth filtering. Thresholds are
/// (min 2D box height in pixels, max occlusion level, max truncation);
/// leaderboard parity is not claimed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub fn admits(&self, box_height_px: f64, occlusion: i32, truncation: f64) -> bool {
        let (min_height, max_occlusion, max_truncation) = match self {
            Difficulty::Easy => (40.0, 0, 0.15),
            Difficulty::Moderate => (25.0, 1, 0.30),
            Difficulty::Hard => (25.0, 2, 0.50),
        };
        box_height_px >= min_height && occlusion <= max_occlusion && truncation <= max_truncation
    }
}

/// A scored 2D detection with its azimuth, grouped by frame.
#[derive(Debug, Clone)]
pub struct RankedDetection {
    pub frame: usize,
    pub box2d: [f64; 4],
    pub score: f64,
    pub azimuth: f64,
}

/// A ground-truth 2D box with its azimuth, grouped by frame.
#[derive(Debug, Clone)]
pub struct GroundTruth2D {
    pub frame: usize,
    pub box2d: [f64; 4],
    pub azimuth: f64,
}

/// Recall sampling grid for AP/AOS: modern 40-point or legacy 11-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallSampling {
    FortyPoint,
    ElevenPoint,
}

impl RecallSampling {
    fn points(&self) -> Vec<f64> {
        match self {
            RecallSampling::FortyPoint => (1..=40).map(|i| i as f64 / 40.0).collect(),
            RecallSampling::ElevenPoint => (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AosReport {
    pub ap: f64,
    pub aos: f64,
    pub os: f64,
}

/// Greedy score-ordered matching of detections to ground truth within one
/// frame set: each detection claims the unmatched truth of highest 2D IoU,
/// and counts as a true positive when that IoU reaches the threshold.
/// Returns `(det_index, gt_index)` pairs.
pub fn match_by_iou(
    dets: &[(usize, [f64; 4], f64)],
    gts: &[(usize, [f64; 4])],
    iou_threshold: f64,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].2.total_cmp(&dets[a].2).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    let mut matches = Vec::new();
    for det_idx in order {
        let (frame, ref dbox, _) = dets[det_idx];
        let mut best: Option<(usize, f64)> = None;
        for (gt_idx, (gt_frame, gbox)) in gts.iter().enumerate() {
            if *gt_frame != frame || taken[gt_idx] {
                continue;
            }
            let iou = iou_2d(dbox, gbox);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gt_idx, iou));
            }
        }
        if let Some((gt_idx, _)) = best {
            taken[gt_idx] = true;
            matches.push((det_idx, gt_idx));
        }
    }
    matches
}

/// AP, AOS and their ratio OS over a detection set.
///
/// Matching is greedy by score per frame at the given 2D IoU threshold; each
/// true positive contributes the azimuth similarity `(1 + cos(delta)) / 2`.
/// Precision and orientation-precision are swept over the ranked list and
/// sampled at the interpolated recall grid. AP bounds AOS from above by
/// construction.
pub fn orientation_similarity(
    dets: &[RankedDetection],
    gts: &[GroundTruth2D],
    iou_threshold: f64,
    sampling: RecallSampling,
) -> Result<AosReport, MetricsError> {
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let det_tuples: Vec<(usize, [f64; 4], f64)> =
        dets.iter().map(|d| (d.frame, d.box2d, d.score)).collect();
    let gt_tuples: Vec<(usize, [f64; 4])> = gts.iter().map(|g| (g.frame, g.box2d)).collect();
    let matches = match_by_iou(&det_tuples, &gt_tuples, iou_threshold);
    let mut similarity = vec![None::<f64>; dets.len()];
    for (det_idx, gt_idx) in matches {
        let delta = dets[det_idx].azimuth - gts[gt_idx].azimuth;
        similarity[det_idx] = Some((1.0 + delta.cos()) / 2.0);
    }

    // sweep the ranked list accumulating precision / orientation precision
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut tp = 0usize;
    let mut sim_sum = 0.0;
    let mut curve = Vec::with_capacity(dets.len());
    for (rank, &det_idx) in order.iter().enumerate() {
        if let Some(s) = similarity[det_idx] {
            tp += 1;
            sim_sum += s;
        }
        let denom = (rank + 1) as f64;
        curve.push((
            tp as f64 / gts.len() as f64, // recall
            tp as f64 / denom,            // precision
            sim_sum / denom,              // orientation precision
        ));
    }

    let sample = |metric: &dyn Fn(&(f64, f64, f64)) -> f64| -> f64 {
        let points = sampling.points();
        let total: f64 = points
            .iter()
            .map(|&r| {
                curve
                    .iter()
                    .filter(|c| c.0 >= r - 1e-12)
                    .map(metric)
                    .fold(0.0, f64::max)
            })
            .sum();
        total / sampling.points().len() as f64
    };
    let ap = sample(&|c| c.1);
    let aos = sample(&|c| c.2);
    let os = if ap > 0.0 { aos / ap } else { 0.0 };
    Ok(AosReport { ap, aos, os })
}

/// Per-bin means of a metric over distance-binned pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    /// Contiguous ascending bin edges; bin `i` covers `[edges[i], edges[i+1])`.
    pub edges: Vec<f64>,
    /// Mean per bin, NaN for empty bins.
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

impl CurveSeries {
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, usize)> + '_ {
        (0..self.counts.len())
            .map(move |i| (self.edges[i], self.edges[i + 1], self.means[i], self.counts[i]))
    }
}

/// Bin pairs by distance and average `metric` per bin; pairs outside the
/// edge range are ignored.
pub fn bin_by_distance<F: Fn(&EvalPair) -> f64>(
    pairs: &[EvalPair],
    metric: F,
    edges: &[f64],
) -> CurveSeries {
    assert!(edges.len() >= 2, "need at least one bin");
    assert!(
        edges.windows(2).all(|w| w[0] < w[1]),
        "bin edges must be strictly ascending"
    );
    let bins = edges.len() - 1;
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for pair in pairs {
        let d = pair.distance;
        if d < edges[0] || d >= edges[bins] {
            continue;
        }
        let mut bin = bins - 1;
        for i in 0..bins {
            if d < edges[i + 1] {
                bin = i;
                break;
            }
        }
        sums[bin] += metric(pair);
        counts[bin] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect();
    CurveSeries {
        edges: edges.to_vec(),
        means,
        counts,
    }
}
