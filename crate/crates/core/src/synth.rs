//! Synthetic scene generation: ground-truth planes, boxes resting on them,
//! and the detections a perfect 2D front-end would produce for them.
//!
//! Scenes double as the test oracle for the whole pipeline — with zero noise
//! the polling solver must reproduce the planted boxes exactly — and as the
//! data source for the database-size ablation. Keypoints follow the
//! depth-ordering rule: the middle keypoint is the bottom corner nearest the
//! camera, its two neighbors become left/right by projected x, and the top
//! keypoint is the corner above the middle one. Samples whose geometry
//! violates the class conventions (degenerate edge-on views) are rejected
//! and redrawn.

use nalgebra::{Point2, Point3, Vector3};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::{yaw_to_class, Dimensions3D, Keypoints};
use crate::geometry::{Plane, ProjectionMatrix};
use crate::plane_db::{DatabaseEntry, PlaneDatabase};
use crate::solver::{Cuboid3D, Detection};

/// Standard normal deviate via Box-Muller.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Perturbation magnitudes applied to noiseless detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub keypoint_sigma_px: f64,
    pub dim_sigma_m: f64,
    pub flip_probability: f64,
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        keypoint_sigma_px: 0.0,
        dim_sigma_m: 0.0,
        flip_probability: 0.0,
    };
}

/// Defaults chosen to stress the plane consensus without overwhelming it.
impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            keypoint_sigma_px: 2.0,
            dim_sigma_m: 0.05,
            flip_probability: 0.01,
        }
    }
}

/// Scene sampling ranges.
#[derive(Debug, Clone)]
pub struct SceneParams {
    pub image_width: f64,
    pub image_height: f64,
    pub focal: f64,
    pub max_objects: usize,
    pub depth_range: (f64, f64),
    /// Lateral offset bound as a fraction of depth.
    pub lateral_fraction: f64,
    pub camera_height_range: (f64, f64),
    /// Bound on the x/z components of the plane normal (ground tilt).
    pub plane_tilt: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            image_width: 1242.0,
            image_height: 375.0,
            focal: 721.5,
            max_objects: 3,
            depth_range: (8.0, 40.0),
            lateral_fraction: 0.3,
            camera_height_range: (1.4, 1.9),
            plane_tilt: 0.04,
        }
    }
}

impl SceneParams {
    pub fn camera(&self) -> ProjectionMatrix {
        ProjectionMatrix::pinhole(self.focal, self.image_width / 2.0, self.image_height / 2.0)
    }
}

/// A planted box with its image-space bounding box.
#[derive(Debug, Clone)]
pub struct TruthBox {
    pub cuboid: Cuboid3D,
    pub box2d: [f64; 4],
}

/// One synthetic scene: a ground plane, boxes resting on it, and the exact
/// detections derived from them.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub plane: Plane,
    pub camera: ProjectionMatrix,
    pub truths: Vec<TruthBox>,
    pub detections: Vec<Detection>,
}

impl SynthScene {
    /// Sample one scene; always contains at least one object.
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, params: &SceneParams) -> SynthScene {
        let camera = params.camera();
        loop {
            let plane = sample_plane(rng, params, &camera);
            let target = rng.random_range(1..=params.max_objects.max(1));
            let mut truths = Vec::new();
            let mut detections = Vec::new();
            let mut attempts = 0;
            while truths.len() < target && attempts < 400 {
                attempts += 1;
                if let Some((truth, detection)) = sample_object(rng, params, &camera, &plane) {
                    truths.push(truth);
                    detections.push(detection);
                }
            }
            if !truths.is_empty() {
                return SynthScene {
                    plane,
                    camera,
                    truths,
                    detections,
                };
            }
        }
    }

    /// Apply the noise model to the noiseless detections. Keypoints get
    /// Gaussian pixel jitter (clamped to stay within the detection's dilated
    /// box), dimensions get Gaussian metric jitter, and with the flip
    /// probability the class's sign split is corrupted.
    pub fn noisy_detections<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        noise: &NoiseParams,
    ) -> Vec<Detection> {
        self.detections
            .iter()
            .map(|det| {
                let jitter = |p: Point2<f64>, rng: &mut R| {
                    Point2::new(
                        p.x + noise.keypoint_sigma_px * standard_normal(rng),
                        p.y + noise.keypoint_sigma_px * standard_normal(rng),
                    )
                };
                let b = det.box2d;
                let (cx, cy) = (0.5 * (b[0] + b[2]), 0.5 * (b[1] + b[3]));
                let (hw, hh) = (0.745 * (b[2] - b[0]), 0.745 * (b[3] - b[1]));
                let clamp = |p: Point2<f64>| {
                    Point2::new(
                        p.x.clamp(cx - hw, cx + hw),
                        p.y.clamp(cy - hh, cy + hh),
                    )
                };
                let keypoints = Keypoints {
                    left: clamp(jitter(det.keypoints.left, rng)),
                    middle: clamp(jitter(det.keypoints.middle, rng)),
                    right: clamp(jitter(det.keypoints.right, rng)),
                    top: clamp(jitter(det.keypoints.top, rng)),
                };
                let dims = Dimensions3D::new(
                    (det.dims.h() + noise.dim_sigma_m * standard_normal(rng)).clamp(0.5, 5.9),
                    (det.dims.w() + noise.dim_sigma_m * standard_normal(rng)).clamp(0.5, 3.9),
                    (det.dims.l() + noise.dim_sigma_m * standard_normal(rng)).clamp(0.5, 24.9),
                )
                .expect("clamped dims are valid");
                let orientation = if rng.random::<f64>() < noise.flip_probability {
                    det.orientation.mirrored()
                } else {
                    det.orientation
                };
                Detection::new(det.box2d, keypoints, orientation, dims, det.score, det.class_id)
                    .expect("jittered keypoints stay inside the dilated box")
            })
            .collect()
    }
}

/// Generate a deterministic batch of scenes from a seed.
pub fn generate_scenes(seed: u64, count: usize, params: &SceneParams) -> Vec<SynthScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SynthScene::generate(&mut rng, params))
        .collect()
}

/// Apply the noise model across a scene batch from a dedicated seed; one RNG
/// stream covers the whole batch, so the output is a pure function of
/// `(scenes, seed, noise)`.
pub fn noisy_detection_batch(
    scenes: &[SynthScene],
    seed: u64,
    noise: &NoiseParams,
) -> Vec<Vec<Detection>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scenes
        .iter()
        .map(|s| s.noisy_detections(&mut rng, noise))
        .collect()
}

/// Database assembled from the true planes of a scene batch, ranked by a
/// synthetic inlier count so every scene's plane is present.
pub fn database_of_true_planes(scenes: &[SynthScene]) -> PlaneDatabase {
    PlaneDatabase::new(
        scenes
            .iter()
            .enumerate()
            .map(|(i, scene)| DatabaseEntry {
                plane: scene.plane,
                inlier_count: 10_000 + scenes.len() - i,
                source_frame: format!("{i:06}"),
            })
            .collect(),
    )
}

/// Pool of candidate planes drawn from the scene distribution, with random
/// ranks; `top_k` cuts of this pool cover the distribution progressively
/// better as `k` grows.
pub fn plane_pool(seed: u64, count: usize, params: &SceneParams) -> PlaneDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let camera = params.camera();
    let entries = (0..count)
        .map(|i| DatabaseEntry {
            plane: sample_plane(&mut rng, params, &camera),
            inlier_count: rng.random_range(1..100_000),
            source_frame: format!("pool{i:06}"),
        })
        .collect();
    PlaneDatabase::new(entries)
}

fn sample_plane<R: Rng + ?Sized>(
    rng: &mut R,
    params: &SceneParams,
    camera: &ProjectionMatrix,
) -> Plane {
    let height = rng.random_range(params.camera_height_range.0..params.camera_height_range.1);
    let tilt = params.plane_tilt;
    let sample_tilt = |rng: &mut R| {
        if tilt > 0.0 {
            rng.random_range(-tilt..tilt)
        } else {
            0.0
        }
    };
    let normal = Vector3::new(sample_tilt(rng), -1.0, sample_tilt(rng));
    Plane::from_point_normal(&Point3::new(0.0, height, 15.0), normal)
        .expect("normal is non-zero")
        .oriented_toward(&camera.center())
}

/// Point on the plane with the given lateral offset and depth.
fn plane_point_at(plane: &Plane, x: f64, z: f64) -> Option<Point3<f64>> {
    let [a, b, c, d] = plane.coeffs();
    if b.abs() < 1e-9 {
        return None;
    }
    Some(Point3::new(x, (-d - a * x - c * z) / b, z))
}

fn sample_object<R: Rng + ?Sized>(
    rng: &mut R,
    params: &SceneParams,
    camera: &ProjectionMatrix,
    plane: &Plane,
) -> Option<(TruthBox, Detection)> {
    let z = rng.random_range(params.depth_range.0..params.depth_range.1);
    let x = rng.random_range(-params.lateral_fraction * z..params.lateral_fraction * z);
    let bottom_center = plane_point_at(plane, x, z)?;
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let dims = Dimensions3D::new(
        rng.random_range(1.3..1.8),
        rng.random_range(1.5..1.9),
        rng.random_range(3.2..4.6),
    )
    .expect("sampled dims are in range");
    let cuboid = Cuboid3D::from_bottom_pose(&bottom_center, &plane.normal(), yaw, dims);

    // every corner must project inside the image, in front of the camera
    let mut pixels = [Point2::origin(); 8];
    for (i, corner) in cuboid.corners().iter().enumerate() {
        let px = camera.project(corner)?;
        if px.x < 1.0
            || px.y < 1.0
            || px.x > params.image_width - 1.0
            || px.y > params.image_height - 1.0
        {
            return None;
        }
        pixels[i] = px;
    }

    // middle keypoint: strictly nearest bottom corner by depth
    let depths: Vec<f64> = cuboid
        .bottom_corners()
        .iter()
        .map(|c| camera.depth(c))
        .collect();
    let m_idx = (0..4).min_by(|&a, &b| depths[a].total_cmp(&depths[b]))?;
    let mut others: Vec<usize> = (0..4).filter(|&i| i != m_idx).collect();
    others.sort_by(|&a, &b| depths[a].total_cmp(&depths[b]));
    if depths[others[0]] - depths[m_idx] < 1e-9 {
        return None;
    }

    let prev = (m_idx + 3) % 4;
    let next = (m_idx + 1) % 4;
    if (pixels[prev].x - pixels[next].x).abs() < 1e-9 {
        return None;
    }
    let (l_idx, r_idx) = if pixels[prev].x < pixels[next].x {
        (prev, next)
    } else {
        (next, prev)
    };

    // the class conventions require the left edge to span the length exactly
    // when the yaw quadrant is even; edge-on views that break this are culled
    let corners = cuboid.bottom_corners();
    let left_edge = (corners[l_idx] - corners[m_idx]).norm();
    let left_is_length = (left_edge - dims.l()).abs() < (left_edge - dims.w()).abs();
    let class = {
        let box2d = bounding_box(&pixels);
        let center_x = 0.5 * (box2d[0] + box2d[2]);
        yaw_to_class(yaw, pixels[m_idx].x, center_x)
    };
    if left_is_length != (class.yaw_bin() % 2 == 0) {
        return None;
    }

    let box2d = bounding_box(&pixels);
    let keypoints = Keypoints {
        left: pixels[l_idx],
        middle: pixels[m_idx],
        right: pixels[r_idx],
        top: pixels[m_idx + 4],
    };
    let score = rng.random_range(0.5..1.0);
    let detection = Detection::new(box2d, keypoints, class, dims, score, 0).ok()?;
    Some((TruthBox { cuboid, box2d }, detection))
}

fn bounding_box(pixels: &[Point2<f64>; 8]) -> [f64; 4] {
    let mut out = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in pixels {
        out[0] = out[0].min(p.x);
        out[1] = out[1].min(p.y);
        out[2] = out[2].max(p.x);
        out[3] = out[3].max(p.y);
    }
    out
}
