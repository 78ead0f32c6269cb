//! Camera and plane geometry primitives.
//!
//! Everything downstream reduces to three operations: backprojecting a pixel
//! into a ray, intersecting that ray with a ground plane, and — for the top
//! keypoint, whose backprojected ray and the vertical through the middle
//! keypoint are skew in general — picking the point on the vertical line
//! closest to the ray.
//!
//! Conventions:
//! - camera frame is right/down/forward (x, y, z), metric units are meters;
//! - rays carry a unit direction and only their `t > 0` half is considered
//!   "in front of the camera";
//! - planes store unit-normal coefficients `(a, b, c, d)` with
//!   `a·x + b·y + c·z + d = 0`; orienting a plane toward a reference point
//!   flips the sign so that point gets positive signed distance.

use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, Vector3};
use thiserror::Error;

/// Relative threshold on `|det M|` below which the camera is unusable.
const SINGULARITY_REL_TOL: f64 = 1e-9;

/// Threshold on |cos| between a unit ray direction and a unit plane normal.
pub const PARALLEL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// The left 3x3 block of the projection matrix is not invertible.
    #[error("projection matrix has a singular 3x3 block (|det| = {det:.3e})")]
    SingularCamera { det: f64 },
    /// Ray direction is perpendicular to the plane normal.
    #[error("ray is parallel to the plane")]
    RayParallelToPlane,
    /// The ray meets the plane at a non-positive ray parameter.
    #[error("ray/plane intersection lies behind the camera (t = {t:.3e})")]
    IntersectionBehindCamera { t: f64 },
    /// Ray direction is parallel to the plane normal; the closest-point
    /// construction for the top keypoint is undefined.
    #[error("ray direction is parallel to the plane normal")]
    DegenerateConfiguration,
    /// Plane coefficients with a (near-)zero normal.
    #[error("plane normal has near-zero length ({norm:.3e})")]
    DegeneratePlane { norm: f64 },
}

/// A 3x4 perspective projection matrix `P = [M | p4]`, in pixels-from-meters,
/// with its camera center and the inverse of the left block cached.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    matrix: Matrix3x4<f64>,
    center: Point3<f64>,
    m_inverse: Matrix3<f64>,
}

impl ProjectionMatrix {
    /// Build from 12 row-major entries. Fails if the left 3x3 block `M` is
    /// singular relative to its own scale (`|det M| <= 1e-9 * ||M||^3`).
    pub fn from_rows(entries: [f64; 12]) -> Result<Self, GeometryError> {
        Self::new(Matrix3x4::from_row_slice(&entries))
    }

    pub fn new(matrix: Matrix3x4<f64>) -> Result<Self, GeometryError> {
        let m: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let det = m.determinant();
        let scale = m.norm();
        if det.abs() <= SINGULARITY_REL_TOL * scale.powi(3) {
            return Err(GeometryError::SingularCamera { det });
        }
        // try_inverse cannot fail once the determinant check passed
        let m_inverse = m
            .try_inverse()
            .ok_or(GeometryError::SingularCamera { det })?;
        let p4 = matrix.column(3).into_owned();
        let center = Point3::from(-(m_inverse * p4));
        Ok(Self {
            matrix,
            center,
            m_inverse,
        })
    }

    /// Canonical camera `[I | 0]`: center at the origin, pixels are
    /// z-normalized metric coordinates. Used heavily by tests.
    pub fn canonical() -> Self {
        let mut m = Matrix3x4::zeros();
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        m[(2, 2)] = 1.0;
        Self::new(m).expect("canonical camera is invertible")
    }

    /// A pinhole `K [I | 0]` camera with focal `f` and principal point `(cx, cy)`.
    pub fn pinhole(f: f64, cx: f64, cy: f64) -> Self {
        let m = Matrix3x4::from_row_slice(&[
            f, 0.0, cx, 0.0, //
            0.0, f, cy, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ]);
        Self::new(m).expect("pinhole camera is invertible")
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.matrix
    }

    /// Camera center `C = -M^{-1} p4` in the world/camera metric frame.
    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn m_inverse(&self) -> &Matrix3<f64> {
        &self.m_inverse
    }

    /// Project a metric point to pixel coordinates. Returns `None` for points
    /// with non-positive homogeneous depth (at or behind the camera plane).
    pub fn project(&self, point: &Point3<f64>) -> Option<Point2<f64>> {
        let h = self.matrix * point.to_homogeneous();
        if h.z <= 0.0 {
            return None;
        }
        Some(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// Signed homogeneous depth of a point (positive in front of the camera).
    pub fn depth(&self, point: &Point3<f64>) -> f64 {
        (self.matrix * point.to_homogeneous()).z
    }

    /// Backproject a pixel into the ray of 3D points imaging to it.
    ///
    /// The ray starts at the camera center with direction `M^{-1} [x, y, 1]`,
    /// so `P (origin + t * dir) = t * [x, y, 1]` and every `t > 0` point
    /// reprojects exactly onto the pixel with positive depth. This is the
    /// center/direction form of the pseudo-inverse backprojection used by
    /// homogeneous formulations; the two agree up to the scale that the
    /// plane-intersection step absorbs anyway.
    pub fn backproject(&self, pixel: &Point2<f64>) -> Ray {
        let dir = self.m_inverse * Vector3::new(pixel.x, pixel.y, 1.0);
        Ray::new(self.center, dir)
    }
}

/// A half-line from `origin` along a unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes the direction. Zero-length directions are rejected by a
    /// debug assertion; callers construct rays from invertible cameras.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Self {
        let norm = direction.norm();
        debug_assert!(norm > 0.0, "ray direction must be non-zero");
        Self {
            origin,
            direction: direction / norm,
        }
    }

    pub fn point_at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction * t
    }

    /// Distance from a point to the infinite line carrying this ray.
    pub fn distance_to_point(&self, point: &Point3<f64>) -> f64 {
        (point - self.origin).cross(&self.direction).norm()
    }
}

/// An oriented plane `a·x + b·y + c·z + d = 0` with `(a, b, c)` unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Vector3<f64>,
    offset: f64,
}

impl Plane {
    /// Build from raw coefficients, rescaling so the normal is unit length.
    /// Already-normalized coefficients pass through bit-exactly, which makes
    /// normalization idempotent.
    pub fn from_coeffs(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        let normal = Vector3::new(a, b, c);
        let norm = normal.norm();
        if norm <= 1e-12 || !norm.is_finite() {
            return Err(GeometryError::DegeneratePlane { norm });
        }
        if (norm - 1.0).abs() < 1e-12 {
            return Ok(Self { normal, offset: d });
        }
        Ok(Self {
            normal: normal / norm,
            offset: d / norm,
        })
    }

    /// Plane through `point` with the given (not necessarily unit) normal.
    pub fn from_point_normal(
        point: &Point3<f64>,
        normal: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if n <= 1e-12 || !n.is_finite() {
            return Err(GeometryError::DegeneratePlane { norm: n });
        }
        let unit = normal / n;
        Ok(Self {
            normal: unit,
            offset: -unit.dot(&point.coords),
        })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    /// Coefficients `(a, b, c, d)`.
    pub fn coeffs(&self) -> [f64; 4] {
        [self.normal.x, self.normal.y, self.normal.z, self.offset]
    }

    /// Signed distance; positive on the side the normal points into.
    pub fn signed_distance(&self, point: &Point3<f64>) -> f64 {
        self.normal.dot(&point.coords) + self.offset
    }

    /// Flip the orientation so `reference` ends up at positive signed
    /// distance. Points exactly on the plane leave the orientation as is.
    /// The zero set is unchanged either way.
    pub fn oriented_toward(&self, reference: &Point3<f64>) -> Self {
        if self.signed_distance(reference) < 0.0 {
            Self {
                normal: -self.normal,
                offset: -self.offset,
            }
        } else {
            *self
        }
    }
}

/// Intersect a ray with a plane.
///
/// Errors are how the polling solver learns that a plane is infeasible for a
/// keypoint: a parallel ray never meets the plane, and a non-positive ray
/// parameter means the meeting point is behind the camera.
pub fn intersect_ray_plane(ray: &Ray, plane: &Plane) -> Result<Point3<f64>, GeometryError> {
    let denom = plane.normal().dot(&ray.direction);
    if denom.abs() <= PARALLEL_TOL {
        return Err(GeometryError::RayParallelToPlane);
    }
    let t = -plane.signed_distance(&ray.origin) / denom;
    if t <= 0.0 {
        return Err(GeometryError::IntersectionBehindCamera { t });
    }
    Ok(ray.point_at(t))
}

/// Point on the plane-normal line through `foot` that is closest to `ray`.
///
/// For two lines `foot + t n_p` and `origin + s n_r` the squared distance is
/// quadratic in `(t, s)`; eliminating `s` gives
/// `t = (c (w·n_r) - w·n_p) / (1 - c^2)` with `w = foot - origin` and
/// `c = n_p·n_r`. Undefined when the lines are parallel.
pub fn closest_point_on_normal_line(
    ray: &Ray,
    plane: &Plane,
    foot: &Point3<f64>,
) -> Result<Point3<f64>, GeometryError> {
    let n_p = plane.normal();
    let n_r = ray.direction;
    if n_r.cross(&n_p).norm() <= PARALLEL_TOL {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let w = foot - ray.origin;
    let c = n_p.dot(&n_r);
    let t = (c * w.dot(&n_r) - w.dot(&n_p)) / (1.0 - c * c);
    Ok(foot + n_p * t)
}
