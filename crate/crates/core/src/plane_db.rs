//! Candidate ground-plane database: semantic filtering of labeled point
//! clouds, iterative RANSAC plane extraction, and inlier-ranked storage.
//!
//! Per frame, ground-like points are kept by projecting every cloud point
//! into the semantic raster and testing its class; planes are then peeled off
//! repeatedly — fit, record, drop inliers — until too few points remain. All
//! surviving planes across frames are pooled and ranked by inlier count, and
//! smaller working databases are cut from the top of that ranking.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Plane, ProjectionMatrix};

/// Camera-frame "up": the y axis points down, so up is its negation.
pub const CAMERA_UP: Vector3<f64> = Vector3::new(0.0, -1.0, 0.0);

#[derive(Debug, Error, PartialEq)]
pub enum PlaneDbError {
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("no non-collinear sample found in {attempts} attempts")]
    NoConsensus { attempts: usize },
    #[error("point cloud has a non-finite coordinate at index {index}")]
    NonFinitePoint { index: usize },
    #[error("points/labels length mismatch: {points} vs {labels}")]
    LabelMismatch { points: usize, labels: usize },
    #[error("frame list is empty")]
    EmptyFrameSet,
}

/// A point cloud in the camera metric frame with one semantic class id per
/// point.
#[derive(Debug, Clone, Default)]
pub struct LabeledCloud {
    pub points: Vec<Point3<f64>>,
    pub labels: Vec<u8>,
}

impl LabeledCloud {
    pub fn new(points: Vec<Point3<f64>>, labels: Vec<u8>) -> Result<Self, PlaneDbError> {
        if points.len() != labels.len() {
            return Err(PlaneDbError::LabelMismatch {
                points: points.len(),
                labels: labels.len(),
            });
        }
        if let Some(index) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(PlaneDbError::NonFinitePoint { index });
        }
        Ok(Self { points, labels })
    }

    /// Cloud with every label set to 0 (unknown), e.g. fresh off a sensor dump.
    pub fn unlabeled(points: Vec<Point3<f64>>) -> Result<Self, PlaneDbError> {
        let labels = vec![0; points.len()];
        Self::new(points, labels)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Single-channel class-id raster matching the camera image.
#[derive(Debug, Clone)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        if data.len() != width * height {
            return None;
        }
        Some(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, class: u8) -> Self {
        Self {
            width,
            height,
            data: vec![class; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Class at a (sub)pixel position, `None` outside the raster.
    pub fn class_at(&self, x: f64, y: f64) -> Option<u8> {
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return None;
        }
        let (col, row) = (x.floor() as usize, y.floor() as usize);
        if col >= self.width || row >= self.height {
            return None;
        }
        Some(self.data[row * self.width + col])
    }
}

/// RANSAC parameters. Defaults: 2 cm inlier threshold, 0.999 success
/// probability, minimal sample of 3, 10k iteration cap.
#[derive(Debug, Clone)]
pub struct RansacConfig {
    pub inlier_threshold: f64,
    pub success_probability: f64,
    pub min_points: usize,
    pub max_iterations: usize,
    /// Least-squares refit on the consensus set after the sample search.
    pub refit: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.02,
            success_probability: 0.999,
            min_points: 3,
            max_iterations: 10_000,
            refit: true,
        }
    }
}

/// Keep exactly the points whose projection lands inside the raster with a
/// class in `classes`; points behind the camera are dropped. Labels in the
/// output come from the raster lookup.
pub fn filter_by_semantics(
    cloud: &LabeledCloud,
    projection: &ProjectionMatrix,
    semantics: &SemanticMap,
    classes: &BTreeSet<u8>,
) -> LabeledCloud {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for point in &cloud.points {
        let Some(pixel) = projection.project(point) else {
            continue;
        };
        let Some(class) = semantics.class_at(pixel.x, pixel.y) else {
            continue;
        };
        if classes.contains(&class) {
            points.push(*point);
            labels.push(class);
        }
    }
    LabeledCloud { points, labels }
}

/// Plane through three points; `None` when they are (near-)collinear.
fn plane_from_sample(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Plane> {
    let cross = (b - a).cross(&(c - a));
    if cross.norm() < 1e-12 {
        return None;
    }
    Plane::from_point_normal(a, cross).ok()
}

/// Least-squares plane through a point set: centroid plus the scatter-matrix
/// eigenvector of smallest eigenvalue.
fn least_squares_plane(points: &[Point3<f64>]) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut min_idx = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let normal = eig.eigenvectors.column(min_idx).into_owned();
    Plane::from_point_normal(&Point3::from(centroid), normal).ok()
}

fn inlier_indices(points: &[Point3<f64>], plane: &Plane, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Adaptive RANSAC plane fit.
///
/// Draws non-collinear 3-point samples, keeps the plane with the largest
/// consensus set, and shrinks the iteration budget to
/// `ceil(ln(1 - p) / ln(1 - w^3))` as the best inlier ratio `w` improves,
/// never exceeding `max_iterations`. With `refit` on, the winner is replaced
/// by a least-squares fit over its consensus set and the inliers are
/// recounted against that refined plane, so the returned pair is always
/// self-consistent. The plane is oriented toward the origin.
pub fn ransac_plane(
    points: &[Point3<f64>],
    cfg: &RansacConfig,
    rng_seed: u64,
) -> Result<(Plane, Vec<usize>), PlaneDbError> {
    let needed = cfg.min_points.max(3);
    if points.len() < needed {
        return Err(PlaneDbError::InsufficientPoints {
            needed,
            got: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = points.len();

    let mut best_plane: Option<Plane> = None;
    let mut best_count = 0usize;
    let mut budget = cfg.max_iterations.max(1);
    let mut iteration = 0usize;
    while iteration < budget {
        iteration += 1;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        while j == i {
            j = rng.random_range(0..n);
        }
        let mut k = rng.random_range(0..n);
        while k == i || k == j {
            k = rng.random_range(0..n);
        }
        let Some(plane) = plane_from_sample(&points[i], &points[j], &points[k]) else {
            continue;
        };
        let count = points
            .iter()
            .filter(|p| plane.signed_distance(p).abs() <= cfg.inlier_threshold)
            .count();
        if count > best_count {
            best_count = count;
            best_plane = Some(plane);
            let w = count as f64 / n as f64;
            let denom = (1.0 - w.powi(3)).ln();
            if denom < 0.0 {
                let required = ((1.0 - cfg.success_probability).ln() / denom).ceil();
                if required.is_finite() && required >= 0.0 {
                    budget = (required as usize).clamp(1, cfg.max_iterations.max(1));
                }
            } else {
                // w^3 rounded to 1: consensus is total, stop searching
                budget = iteration;
            }
        }
    }

    let Some(mut plane) = best_plane else {
        return Err(PlaneDbError::NoConsensus {
            attempts: iteration,
        });
    };
    let mut inliers = inlier_indices(points, &plane, cfg.inlier_threshold);
    if cfg.refit && inliers.len() >= 3 {
        let consensus: Vec<Point3<f64>> = inliers.iter().map(|&i| points[i]).collect();
        if let Some(refined) = least_squares_plane(&consensus) {
            plane = refined;
            inliers = inlier_indices(points, &plane, cfg.inlier_threshold);
        }
    }
    Ok((plane.oriented_toward(&Point3::origin()), inliers))
}

/// One ranked database row.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseEntry {
    pub plane: Plane,
    pub inlier_count: usize,
    pub source_frame: String,
}

/// Immutable, inlier-ranked collection of candidate ground planes.
#[derive(Debug, Clone, Default)]
pub struct PlaneDatabase {
    entries: Vec<DatabaseEntry>,
}

impl PlaneDatabase {
    /// Sorts on construction: inlier count descending, then source frame,
    /// then coefficients, so a database is a pure function of its entry set.
    pub fn new(mut entries: Vec<DatabaseEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.inlier_count
                .cmp(&a.inlier_count)
                .then_with(|| a.source_frame.cmp(&b.source_frame))
                .then_with(|| {
                    let ca = a.plane.coeffs();
                    let cb = b.plane.coeffs();
                    ca.iter()
                        .zip(cb.iter())
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });
        Self { entries }
    }

    pub fn entries(&self) -> &[DatabaseEntry] {
        &self.entries
    }

    pub fn planes(&self) -> impl Iterator<Item = &Plane> {
        self.entries.iter().map(|e| &e.plane)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First `min(k, len)` entries, order preserved.
    pub fn top_k(&self, k: usize) -> PlaneDatabase {
        let take = k.min(self.entries.len());
        PlaneDatabase {
            entries: self.entries[..take].to_vec(),
        }
    }

    /// Re-orient every plane so `reference` has positive signed distance.
    pub fn oriented_toward(&self, reference: &Point3<f64>) -> PlaneDatabase {
        PlaneDatabase {
            entries: self
                .entries
                .iter()
                .map(|e| DatabaseEntry {
                    plane: e.plane.oriented_toward(reference),
                    inlier_count: e.inlier_count,
                    source_frame: e.source_frame.clone(),
                })
                .collect(),
        }
    }
}

/// One input frame for database construction.
#[derive(Debug, Clone)]
pub struct Frame {
    pub id: String,
    pub cloud: LabeledCloud,
    pub projection: ProjectionMatrix,
    pub semantics: SemanticMap,
}

/// FNV-1a, used to derive a stable per-frame RANSAC seed from the frame id
/// (std hashers are randomized per process, which would break determinism).
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Build the full database: per frame, semantic filtering then repeated
/// plane extraction with inlier removal until fewer than `min_points`
/// remain. Planes are kept only when their camera-facing normal points
/// within 90 degrees of up (they are ground candidates); rejected planes
/// still give up their inliers so extraction always terminates. Frames are
/// processed in parallel with seeds derived from the frame id, so the result
/// is independent of frame order.
pub fn build_database(
    frames: &[Frame],
    cfg: &RansacConfig,
    classes: &BTreeSet<u8>,
    seed: u64,
) -> Result<PlaneDatabase, PlaneDbError> {
    if frames.is_empty() {
        return Err(PlaneDbError::EmptyFrameSet);
    }
    let per_frame: Vec<Vec<DatabaseEntry>> = frames
        .par_iter()
        .map(|frame| {
            let filtered = filter_by_semantics(&frame.cloud, &frame.projection, &frame.semantics, classes);
            let mut points = filtered.points;
            let mut entries = Vec::new();
            let mut round = 0u64;
            let frame_seed = seed ^ fnv1a(frame.id.as_bytes());
            let min_points = cfg.min_points.max(3);
            while points.len() >= min_points {
                let Ok((plane, inliers)) = ransac_plane(&points, cfg, frame_seed.wrapping_add(round))
                else {
                    break;
                };
                round += 1;
                if inliers.len() < min_points {
                    break;
                }
                let oriented = plane.oriented_toward(&frame.projection.center());
                if oriented.normal().dot(&CAMERA_UP) > 0.0 {
                    entries.push(DatabaseEntry {
                        plane: oriented,
                        inlier_count: inliers.len(),
                        source_frame: frame.id.clone(),
                    });
                }
                let drop: BTreeSet<usize> = inliers.into_iter().collect();
                points = points
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| !drop.contains(i))
                    .map(|(_, p)| p)
                    .collect();
            }
            entries
        })
        .collect();
    Ok(PlaneDatabase::new(per_frame.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::standard_normal;

    fn grid_on_plane(plane_y: f64, n: usize, z_range: (f64, f64)) -> Vec<Point3<f64>> {
        let side = (n as f64).sqrt().ceil() as usize;
        let mut pts = Vec::with_capacity(n);
        'outer: for i in 0..side {
            for j in 0..side {
                if pts.len() >= n {
                    break 'outer;
                }
                let x = -2.0 + 4.0 * (i as f64) / (side.max(2) - 1) as f64;
                let z = z_range.0 + (z_range.1 - z_range.0) * (j as f64) / (side.max(2) - 1) as f64;
                pts.push(Point3::new(x, plane_y, z));
            }
        }
        pts
    }

    #[test]
    fn exact_coplanar_points_recover_plane() {
        let pts = grid_on_plane(1.5, 1000, (10.0, 30.0));
        let (plane, inliers) = ransac_plane(&pts, &RansacConfig::default(), 7).unwrap();
        assert_eq!(inliers.len(), 1000);
        let angle = plane
            .normal()
            .dot(&Vector3::new(0.0, -1.0, 0.0))
            .abs()
            .clamp(-1.0, 1.0)
            .acos();
        assert!(angle < 1e-6, "normal angular error {angle}");
        assert!(plane.signed_distance(&Point3::new(0.0, 1.5, 20.0)).abs() < 1e-9);
    }

    #[test]
    fn noisy_plane_with_outliers_matches_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut pts: Vec<Point3<f64>> = grid_on_plane(1.5, 800, (5.0, 40.0))
            .into_iter()
            .map(|p| Point3::new(p.x, p.y + 0.005 * standard_normal(&mut rng), p.z))
            .collect();
        let true_inliers = pts.clone();
        for _ in 0..200 {
            pts.push(Point3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-3.0..1.0),
                rng.random_range(5.0..40.0),
            ));
        }
        let (plane, inliers) = ransac_plane(&pts, &RansacConfig::default(), 3).unwrap();
        assert!(inliers.len() >= 700, "found {} inliers", inliers.len());

        // oracle: SVD fit on the 800 known inliers
        let centroid = true_inliers
            .iter()
            .fold(Vector3::zeros(), |a, p| a + p.coords)
            / true_inliers.len() as f64;
        let mut data = nalgebra::DMatrix::<f64>::zeros(true_inliers.len(), 3);
        for (r, p) in true_inliers.iter().enumerate() {
            let d = p.coords - centroid;
            data[(r, 0)] = d.x;
            data[(r, 1)] = d.y;
            data[(r, 2)] = d.z;
        }
        let svd = nalgebra::SVD::new(data, false, true);
        let vt = svd.v_t.unwrap();
        let oracle_normal = Vector3::new(vt[(2, 0)], vt[(2, 1)], vt[(2, 2)]);

        let cosine = plane.normal().dot(&oracle_normal).abs().clamp(-1.0, 1.0);
        let angle = cosine.acos().to_degrees();
        assert!(angle < 1.0, "normal angular error {angle} deg");
    }

    #[test]
    fn too_few_points_is_an_error() {
        let pts = vec![Point3::new(0.0, 1.0, 2.0), Point3::new(1.0, 1.0, 2.0)];
        assert_eq!(
            ransac_plane(&pts, &RansacConfig::default(), 1),
            Err(PlaneDbError::InsufficientPoints { needed: 3, got: 2 })
        );
    }

    #[test]
    fn refit_can_be_disabled() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3<f64>> = grid_on_plane(1.5, 300, (5.0, 30.0))
            .into_iter()
            .map(|p| Point3::new(p.x, p.y + 0.004 * standard_normal(&mut rng), p.z))
            .collect();
        let raw_cfg = RansacConfig {
            refit: false,
            ..RansacConfig::default()
        };
        let (raw_plane, raw_inliers) = ransac_plane(&pts, &raw_cfg, 11).unwrap();
        let (fit_plane, fit_inliers) = ransac_plane(&pts, &RansacConfig::default(), 11).unwrap();
        // same seed, so the refit run starts from the same winning sample
        assert!(fit_inliers.len() >= raw_inliers.len());
        // raw plane passes exactly through its 3-point sample; refit generally not
        let raw_count = inlier_indices(&pts, &raw_plane, raw_cfg.inlier_threshold).len();
        assert_eq!(raw_count, raw_inliers.len());
        let fit_count = inlier_indices(&pts, &fit_plane, raw_cfg.inlier_threshold).len();
        assert_eq!(fit_count, fit_inliers.len());
    }

    fn test_camera() -> ProjectionMatrix {
        ProjectionMatrix::pinhole(100.0, 200.0, 150.0)
    }

    fn frame_with_points(id: &str, points: Vec<Point3<f64>>) -> Frame {
        let cloud = LabeledCloud::unlabeled(points).unwrap();
        Frame {
            id: id.to_string(),
            cloud,
            projection: test_camera(),
            semantics: SemanticMap::filled(400, 300, 1),
        }
    }

    fn road_classes() -> BTreeSet<u8> {
        [1u8].into_iter().collect()
    }

    #[test]
    fn semantic_filter_full_pass() {
        let frame = frame_with_points("f", grid_on_plane(1.5, 50, (10.0, 20.0)));
        let out = filter_by_semantics(
            &frame.cloud,
            &frame.projection,
            &frame.semantics,
            &road_classes(),
        );
        assert_eq!(out.len(), 50);
        assert!(out.labels.iter().all(|&c| c == 1));
    }

    #[test]
    fn semantic_filter_drops_out_of_image_points() {
        // points behind the camera and points projecting far outside
        let pts = vec![
            Point3::new(0.0, 1.5, -10.0),
            Point3::new(500.0, 1.5, 1.0),
            Point3::new(-500.0, 1.5, 1.0),
        ];
        let frame = frame_with_points("f", pts);
        let out = filter_by_semantics(
            &frame.cloud,
            &frame.projection,
            &frame.semantics,
            &road_classes(),
        );
        assert!(out.is_empty());
    }

    #[test]
    fn semantic_filter_keeps_exactly_planted_classes() {
        // left half road (class 1), right half building (class 7)
        let mut data = vec![7u8; 400 * 300];
        for row in 0..300 {
            for col in 0..200 {
                data[row * 400 + col] = 1;
            }
        }
        let semantics = SemanticMap::new(400, 300, data).unwrap();
        let camera = test_camera();
        // road points project left of x=200 (negative metric x), building right
        let road: Vec<Point3<f64>> = (0..40)
            .map(|i| Point3::new(-1.0 - (i as f64) * 0.02, 1.5, 15.0))
            .collect();
        let building: Vec<Point3<f64>> = (0..40)
            .map(|i| Point3::new(1.0 + (i as f64) * 0.02, -1.0, 15.0))
            .collect();
        let mut all = road.clone();
        all.extend(building);
        let cloud = LabeledCloud::unlabeled(all).unwrap();
        let out = filter_by_semantics(&cloud, &camera, &semantics, &road_classes());
        assert_eq!(out.len(), road.len());
        for (got, want) in out.points.iter().zip(&road) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn database_from_two_planted_planes() {
        let mut points = grid_on_plane(1.5, 600, (10.0, 30.0));
        points.extend(grid_on_plane(3.0, 400, (10.0, 30.0)));
        let frame = frame_with_points("frame0", points);
        let db = build_database(&[frame], &RansacConfig::default(), &road_classes(), 42).unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(db.entries()[0].inlier_count, 600);
        assert_eq!(db.entries()[1].inlier_count, 400);
        // ranked planes recover the planted heights
        let d0 = db.entries()[0].plane.signed_distance(&Point3::new(0.0, 1.5, 20.0));
        let d1 = db.entries()[1].plane.signed_distance(&Point3::new(0.0, 3.0, 20.0));
        assert!(d0.abs() < 1e-9 && d1.abs() < 1e-9);
        // stored planes re-pass their own inlier test against the frame cloud
        let all = {
            let mut v = grid_on_plane(1.5, 600, (10.0, 30.0));
            v.extend(grid_on_plane(3.0, 400, (10.0, 30.0)));
            v
        };
        for entry in db.entries() {
            let count = inlier_indices(&all, &entry.plane, 0.02).len();
            assert_eq!(count, entry.inlier_count);
        }
    }

    #[test]
    fn empty_frame_list_rejected() {
        assert_eq!(
            build_database(&[], &RansacConfig::default(), &road_classes(), 0).unwrap_err(),
            PlaneDbError::EmptyFrameSet
        );
    }

    #[test]
    fn frame_with_two_points_yields_empty_database() {
        let frame = frame_with_points(
            "tiny",
            vec![Point3::new(0.0, 1.5, 10.0), Point3::new(0.1, 1.5, 10.0)],
        );
        let db = build_database(&[frame], &RansacConfig::default(), &road_classes(), 0).unwrap();
        assert!(db.is_empty());
    }

    #[test]
    fn database_is_invariant_to_frame_order() {
        let frame_a = frame_with_points("a", grid_on_plane(1.4, 300, (8.0, 25.0)));
        let frame_b = frame_with_points("b", grid_on_plane(1.9, 500, (8.0, 25.0)));
        let cfg = RansacConfig::default();
        let db_ab = build_database(&[frame_a.clone(), frame_b.clone()], &cfg, &road_classes(), 9)
            .unwrap();
        let db_ba = build_database(&[frame_b, frame_a], &cfg, &road_classes(), 9).unwrap();
        assert_eq!(db_ab.len(), db_ba.len());
        for (x, y) in db_ab.entries().iter().zip(db_ba.entries()) {
            assert_eq!(x.inlier_count, y.inlier_count);
            assert_eq!(x.source_frame, y.source_frame);
            assert_eq!(x.plane.coeffs(), y.plane.coeffs());
        }
    }

    #[test]
    fn top_k_selection() {
        let entries: Vec<DatabaseEntry> = (0..10)
            .map(|i| DatabaseEntry {
                plane: Plane::from_coeffs(0.0, -1.0, 0.0, 1.0 + i as f64 * 0.1).unwrap(),
                inlier_count: 100 - i,
                source_frame: format!("f{i}"),
            })
            .collect();
        let db = PlaneDatabase::new(entries);
        assert_eq!(db.top_k(db.len()).len(), 10);
        let top1 = db.top_k(1);
        assert_eq!(top1.len(), 1);
        assert_eq!(top1.entries()[0].inlier_count, 100);
        assert_eq!(db.top_k(50).len(), 10);
    }

    #[test]
    fn ranking_ties_break_on_frame_then_coeffs() {
        let mk = |d: f64, frame: &str| DatabaseEntry {
            plane: Plane::from_coeffs(0.0, -1.0, 0.0, d).unwrap(),
            inlier_count: 5,
            source_frame: frame.to_string(),
        };
        let db = PlaneDatabase::new(vec![mk(2.0, "b"), mk(1.0, "a"), mk(0.5, "a")]);
        assert_eq!(db.entries()[0].source_frame, "a");
        assert!(db.entries()[0].plane.coeffs()[3] < db.entries()[1].plane.coeffs()[3]);
        assert_eq!(db.entries()[2].source_frame, "b");
    }
}
