//! Per-detection plane polling and 3D cuboid construction.
//!
//! For one detection, every candidate plane is scored by lifting the four 2D
//! keypoints into 3D against that plane and summing, over the six keypoint
//! pairs, the absolute mismatch between the measured 3D separation and the
//! length predicted from the box dimensions. Planes that cannot host the
//! keypoints (parallel rays, intersections behind the camera) score infinity
//! and lose the argmin naturally. The winning plane then supports the cuboid:
//! one bottom edge comes from the retained keypoint pair, the rest follows
//! from orthogonality in the plane plus the predicted dimensions, so the
//! realized box always has exactly the predicted shape.

use nalgebra::{Point2, Point3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::encoding::{wrap_angle, Dimensions3D, Keypoints, OrientationClass};
use crate::geometry::{
    closest_point_on_normal_line, intersect_ray_plane, Plane, ProjectionMatrix, Ray,
};
use crate::plane_db::PlaneDatabase;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    /// Every database plane scored an infinite residual.
    #[error("no feasible plane in the database for this detection")]
    NoFeasiblePlane,
    /// Retained and middle keypoints coincide in 3D; yaw is unrecoverable.
    #[error("degenerate bottom edge (separation {separation:.3e} m)")]
    DegenerateEdge { separation: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("2D box requires x1 < x2 and y1 < y2")]
    InvalidBox,
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("keypoint has a non-finite coordinate")]
    NonFiniteKeypoint,
    #[error("keypoint ({x}, {y}) outside the 1.5x dilated 2D box")]
    KeypointOutsideBox { x: f64, y: f64 },
}

/// Which of the four keypoints a triplet endpoint refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeypointId {
    Left,
    Middle,
    Right,
    Top,
}

impl KeypointId {
    pub fn index(self) -> usize {
        match self {
            KeypointId::Left => 0,
            KeypointId::Middle => 1,
            KeypointId::Right => 2,
            KeypointId::Top => 3,
        }
    }
}

/// A keypoint pair plus the expected metric length of the segment joining
/// them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub a: KeypointId,
    pub b: KeypointId,
    pub length: f64,
}

/// The six unique keypoint pairs: two bottom edges, the vertical edge, and
/// the three face/footprint diagonals implied by them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletSet {
    triplets: [Triplet; 6],
}

impl TripletSet {
    pub fn triplets(&self) -> &[Triplet; 6] {
        &self.triplets
    }

    pub fn lengths(&self) -> [f64; 6] {
        [
            self.triplets[0].length,
            self.triplets[1].length,
            self.triplets[2].length,
            self.triplets[3].length,
            self.triplets[4].length,
            self.triplets[5].length,
        ]
    }
}

/// One object as predicted by the 2D stages: box, keypoints, coarse
/// orientation class, class-specific 3D dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub box2d: [f64; 4],
    pub keypoints: Keypoints,
    pub orientation: OrientationClass,
    pub dims: Dimensions3D,
    pub score: f64,
    pub class_id: u32,
}

impl Detection {
    /// Validates the box, the score range, and that all keypoints fall
    /// inside the box dilated 1.5x about its center. No left-to-right
    /// ordering of the keypoints is assumed.
    pub fn new(
        box2d: [f64; 4],
        keypoints: Keypoints,
        orientation: OrientationClass,
        dims: Dimensions3D,
        score: f64,
        class_id: u32,
    ) -> Result<Self, DetectionError> {
        if !(box2d[0] < box2d[2] && box2d[1] < box2d[3]) {
            return Err(DetectionError::InvalidBox);
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(DetectionError::InvalidScore(score));
        }
        let cx = 0.5 * (box2d[0] + box2d[2]);
        let cy = 0.5 * (box2d[1] + box2d[3]);
        let hw = 0.75 * (box2d[2] - box2d[0]);
        let hh = 0.75 * (box2d[3] - box2d[1]);
        for p in [keypoints.left, keypoints.middle, keypoints.right, keypoints.top] {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(DetectionError::NonFiniteKeypoint);
            }
            if (p.x - cx).abs() > hw || (p.y - cy).abs() > hh {
                return Err(DetectionError::KeypointOutsideBox { x: p.x, y: p.y });
            }
        }
        Ok(Self {
            box2d,
            keypoints,
            orientation,
            dims,
            score,
            class_id,
        })
    }

    fn keypoint_pixels(&self) -> [Point2<f64>; 4] {
        [
            self.keypoints.left,
            self.keypoints.middle,
            self.keypoints.right,
            self.keypoints.top,
        ]
    }
}

/// True when the edge from the middle to the *left* keypoint spans the box
/// length for this class; the parity of the yaw quadrant decides, because
/// rotating by a quarter turn exchanges which bottom edge faces the camera.
fn left_edge_is_length(class: OrientationClass) -> bool {
    class.yaw_bin().is_multiple_of(2)
}

/// Assign expected lengths to the six keypoint pairs.
///
/// The two bottom edges (left-middle, middle-right) receive width/length as
/// decided by the orientation class, the vertical (middle-top) receives the
/// height, and each diagonal the hypotenuse of its two adjacent sides.
pub fn build_triplets(detection: &Detection) -> TripletSet {
    let dims = detection.dims;
    let (lm, mr) = if left_edge_is_length(detection.orientation) {
        (dims.l(), dims.w())
    } else {
        (dims.w(), dims.l())
    };
    let h = dims.h();
    TripletSet {
        triplets: [
            Triplet { a: KeypointId::Left, b: KeypointId::Middle, length: lm },
            Triplet { a: KeypointId::Middle, b: KeypointId::Right, length: mr },
            Triplet { a: KeypointId::Middle, b: KeypointId::Top, length: h },
            Triplet { a: KeypointId::Left, b: KeypointId::Right, length: lm.hypot(mr) },
            Triplet { a: KeypointId::Left, b: KeypointId::Top, length: lm.hypot(h) },
            Triplet { a: KeypointId::Right, b: KeypointId::Top, length: mr.hypot(h) },
        ],
    }
}

/// Backprojected keypoint rays, ordered left/middle/right/top.
pub fn keypoint_rays(detection: &Detection, camera: &ProjectionMatrix) -> [Ray; 4] {
    let px = detection.keypoint_pixels();
    [
        camera.backproject(&px[0]),
        camera.backproject(&px[1]),
        camera.backproject(&px[2]),
        camera.backproject(&px[3]),
    ]
}

/// Residual of one plane against precomputed rays and triplets.
///
/// Returns the lifted 3D keypoints alongside the summed residual; any
/// geometric failure folds into `(f64::INFINITY, None)`.
pub fn residual_with_rays(
    rays: &[Ray; 4],
    triplets: &TripletSet,
    plane: &Plane,
) -> (f64, Option<[Point3<f64>; 4]>) {
    let Ok(x_l) = intersect_ray_plane(&rays[0], plane) else {
        return (f64::INFINITY, None);
    };
    let Ok(x_m) = intersect_ray_plane(&rays[1], plane) else {
        return (f64::INFINITY, None);
    };
    let Ok(x_r) = intersect_ray_plane(&rays[2], plane) else {
        return (f64::INFINITY, None);
    };
    let Ok(x_t) = closest_point_on_normal_line(&rays[3], plane, &x_m) else {
        return (f64::INFINITY, None);
    };
    let points = [x_l, x_m, x_r, x_t];
    let mut residual = 0.0;
    for t in triplets.triplets() {
        let measured = (points[t.a.index()] - points[t.b.index()]).norm();
        residual += (measured - t.length).abs();
    }
    (residual, Some(points))
}

/// Total triplet residual of `detection` against a single plane, plus the 3D
/// keypoints when the plane is feasible.
pub fn plane_residual(
    detection: &Detection,
    plane: &Plane,
    camera: &ProjectionMatrix,
) -> (f64, Option<[Point3<f64>; 4]>) {
    let rays = keypoint_rays(detection, camera);
    let triplets = build_triplets(detection);
    residual_with_rays(&rays, &triplets, plane)
}

/// Outcome of polling the database for one detection.
#[derive(Debug, Clone)]
pub struct PollResult {
    pub plane: Plane,
    /// Rank of the selected plane in the database.
    pub plane_index: usize,
    pub residual: f64,
    /// Lifted keypoints on the selected plane, ordered left/middle/right/top.
    pub keypoints3d: [Point3<f64>; 4],
    pub cuboid: Cuboid3D,
}

/// Select the minimum-residual plane and construct the cuboid on it.
///
/// Ties keep the earlier (higher-ranked) database entry. Planes must already
/// be oriented with their normal toward the camera so the cuboid grows
/// upward from its bottom face.
pub fn poll(
    detection: &Detection,
    db: &PlaneDatabase,
    camera: &ProjectionMatrix,
) -> Result<PollResult, SolveError> {
    let rays = keypoint_rays(detection, camera);
    let triplets = build_triplets(detection);
    let mut best_index = usize::MAX;
    let mut best_residual = f64::INFINITY;
    for (index, entry) in db.entries().iter().enumerate() {
        let (residual, _) = residual_with_rays(&rays, &triplets, &entry.plane);
        if residual < best_residual {
            best_residual = residual;
            best_index = index;
        }
    }
    if !best_residual.is_finite() {
        return Err(SolveError::NoFeasiblePlane);
    }
    let plane = db.entries()[best_index].plane;
    let (residual, points) = residual_with_rays(&rays, &triplets, &plane);
    let keypoints3d = points.expect("finite residual implies feasible lift");
    let cuboid = construct_cuboid(&keypoints3d, &plane, detection)?;
    Ok(PollResult {
        plane,
        plane_index: best_index,
        residual,
        keypoints3d,
        cuboid,
    })
}

/// Poll a batch of detections; element `i` of the output corresponds to
/// detection `i`. Detections are processed in parallel, each with the same
/// sequential argmin as [`poll`], so results are deterministic.
pub fn poll_batch(
    detections: &[Detection],
    db: &PlaneDatabase,
    camera: &ProjectionMatrix,
) -> Vec<Result<PollResult, SolveError>> {
    detections
        .par_iter()
        .map(|d| poll(d, db, camera))
        .collect()
}

/// An oriented 3D box.
///
/// Corner order is fixed: indices 0..4 are the bottom face counter-clockwise
/// when seen from above (from the normal side), index 0 being the middle
/// keypoint for solver-constructed boxes; indices 4..8 are the matching top
/// corners.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuboid3D {
    corners: [Point3<f64>; 8],
    center: Point3<f64>,
    yaw: f64,
    dims: Dimensions3D,
}

impl Cuboid3D {
    /// Build from a bottom-face center, an upward unit normal, a yaw about
    /// that normal and the box dimensions. Yaw follows the camera-frame
    /// convention `yaw = atan2(-u_z, u_x)` for the length axis `u`.
    pub fn from_bottom_pose(
        bottom_center: &Point3<f64>,
        up: &Vector3<f64>,
        yaw: f64,
        dims: Dimensions3D,
    ) -> Self {
        let up = up.normalize();
        // in-plane length axis realizing the yaw convention
        let (s, c) = yaw.sin_cos();
        let u = if up.y.abs() > 1e-9 {
            Vector3::new(c, (s * up.z - c * up.x) / up.y, -s).normalize()
        } else {
            Vector3::new(c, 0.0, -s).normalize()
        };
        let v = up.cross(&u);
        let half_l = u * (dims.l() / 2.0);
        let half_w = v * (dims.w() / 2.0);
        let a = bottom_center - half_l - half_w;
        let bottom = [a, a + u * dims.l(), a + u * dims.l() + v * dims.w(), a + v * dims.w()];
        Self::from_bottom_face(bottom, up, dims, yaw)
    }

    fn from_bottom_face(
        bottom: [Point3<f64>; 4],
        up: Vector3<f64>,
        dims: Dimensions3D,
        yaw: f64,
    ) -> Self {
        let lift = up * dims.h();
        let corners = [
            bottom[0],
            bottom[1],
            bottom[2],
            bottom[3],
            bottom[0] + lift,
            bottom[1] + lift,
            bottom[2] + lift,
            bottom[3] + lift,
        ];
        let bottom_center = Point3::from(
            (bottom[0].coords + bottom[1].coords + bottom[2].coords + bottom[3].coords) / 4.0,
        );
        Self {
            corners,
            center: bottom_center + up * (dims.h() / 2.0),
            yaw: wrap_angle(yaw),
            dims,
        }
    }

    /// Reassemble a cuboid from serialized fields without re-deriving them.
    pub(crate) fn from_parts(
        corners: [Point3<f64>; 8],
        center: Point3<f64>,
        yaw: f64,
        dims: Dimensions3D,
    ) -> Self {
        Self {
            corners,
            center,
            yaw,
            dims,
        }
    }

    pub fn corners(&self) -> &[Point3<f64>; 8] {
        &self.corners
    }

    pub fn bottom_corners(&self) -> [Point3<f64>; 4] {
        [self.corners[0], self.corners[1], self.corners[2], self.corners[3]]
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// Realized dimensions; identical to the predicted ones by construction.
    pub fn dims(&self) -> Dimensions3D {
        self.dims
    }

    /// Unit normal of the bottom face, pointing toward the top face.
    pub fn up(&self) -> Vector3<f64> {
        (self.corners[4] - self.corners[0]).normalize()
    }

    /// Distance from a point to this solid box (0 inside).
    pub fn distance_to_point(&self, point: &Point3<f64>) -> f64 {
        let e1 = self.corners[1] - self.corners[0];
        let e2 = self.corners[3] - self.corners[0];
        let e3 = self.corners[4] - self.corners[0];
        let half = Vector3::new(e1.norm() / 2.0, e2.norm() / 2.0, e3.norm() / 2.0);
        let axes = [e1.normalize(), e2.normalize(), e3.normalize()];
        let rel = point - self.center;
        let mut sq = 0.0;
        for (axis, h) in axes.iter().zip(half.iter()) {
            let excess = rel.dot(axis).abs() - h;
            if excess > 0.0 {
                sq += excess * excess;
            }
        }
        sq.sqrt()
    }
}

/// Construct the cuboid on the selected plane.
///
/// The width-spanning keypoint (left or right, per the orientation class) is
/// discarded; the retained keypoint together with the middle keypoint fixes
/// the length edge and hence the yaw. The width edge is taken orthogonal in
/// the plane, signed toward the discarded keypoint, and the top face sits a
/// box height along the plane normal. Of the two yaw readings of the length
/// edge (apart by pi), the one matching the predicted yaw quadrant wins.
pub fn construct_cuboid(
    keypoints3d: &[Point3<f64>; 4],
    plane: &Plane,
    detection: &Detection,
) -> Result<Cuboid3D, SolveError> {
    let x_m = keypoints3d[KeypointId::Middle.index()];
    let (retained, discarded) = if left_edge_is_length(detection.orientation) {
        (keypoints3d[KeypointId::Left.index()], keypoints3d[KeypointId::Right.index()])
    } else {
        (keypoints3d[KeypointId::Right.index()], keypoints3d[KeypointId::Left.index()])
    };
    let raw = retained - x_m;
    let separation = raw.norm();
    if separation < 1e-6 {
        return Err(SolveError::DegenerateEdge { separation });
    }
    let dims = detection.dims;
    let up = plane.normal();
    let u = raw / separation;
    let v = up.cross(&u).normalize();
    let side = if (discarded - x_m).dot(&v) >= 0.0 { 1.0 } else { -1.0 };
    let e1 = u * dims.l();
    let e2 = v * (side * dims.w());

    let a = x_m;
    let bottom_raw = [a, a + e1, a + e1 + e2, a + e2];
    // fixed ordering: counter-clockwise seen from above, starting at x_m
    let bottom = if side >= 0.0 {
        bottom_raw
    } else {
        [bottom_raw[0], bottom_raw[3], bottom_raw[2], bottom_raw[1]]
    };

    // two candidate yaws for the length axis; the class quadrant picks one
    let c1 = wrap_angle((-u.z).atan2(u.x));
    let c2 = wrap_angle(c1 + std::f64::consts::PI);
    let bin = detection.orientation.yaw_bin();
    let yaw = if OrientationClass::yaw_bin_of(c1) == bin {
        c1
    } else if OrientationClass::yaw_bin_of(c2) == bin {
        c2
    } else {
        let center = OrientationClass::yaw_bin_center(bin);
        if wrap_angle(c1 - center).abs() <= wrap_angle(c2 - center).abs() {
            c1
        } else {
            c2
        }
    };
    Ok(Cuboid3D::from_bottom_face(bottom, up, dims, yaw))
}
