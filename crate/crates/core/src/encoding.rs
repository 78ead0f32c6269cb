//! Orientation classes, anchor-relative regression targets and the scalar
//! loss functions of the detection head.
//!
//! A coarse orientation class is a pair (yaw quadrant, keypoint sign split):
//! four quarter-turn yaw bins anchored at -pi, doubled by whether the middle
//! keypoint falls left or right of the reference center. The x-offsets of the
//! middle and top keypoints are encoded as magnitudes; the sign split is what
//! restores their sign at decode time.

use nalgebra::Point2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("probability {value} outside (0, 1]")]
    DomainError { value: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid anchor: requires x1 < x2 and y1 < y2")]
    InvalidAnchor,
    #[error("orientation class id {0} outside [0, 8)")]
    InvalidClassId(u8),
    #[error("dimensions (h={h}, w={w}, l={l}) outside sane road-object bounds")]
    InvalidDimensions { h: f64, w: f64, l: f64 },
}

/// One of 8 coarse orientation classes: `id = 2 * yaw_bin + sign_split`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrientationClass {
    yaw_bin: u8,
    sign_split: u8,
}

impl OrientationClass {
    pub fn new(yaw_bin: u8, sign_split: u8) -> Result<Self, EncodingError> {
        if yaw_bin > 3 || sign_split > 1 {
            return Err(EncodingError::InvalidClassId(2 * yaw_bin + sign_split));
        }
        Ok(Self { yaw_bin, sign_split })
    }

    pub fn from_id(id: u8) -> Result<Self, EncodingError> {
        if id >= 8 {
            return Err(EncodingError::InvalidClassId(id));
        }
        Ok(Self {
            yaw_bin: id / 2,
            sign_split: id % 2,
        })
    }

    pub fn id(&self) -> u8 {
        2 * self.yaw_bin + self.sign_split
    }

    pub fn yaw_bin(&self) -> u8 {
        self.yaw_bin
    }

    pub fn sign_split(&self) -> u8 {
        self.sign_split
    }

    /// Quadrant index of a yaw angle: bin `k` covers
    /// `[-pi + k*pi/2, -pi + (k+1)*pi/2)`, half-open, with `+pi` wrapping
    /// to `-pi`.
    pub fn yaw_bin_of(yaw: f64) -> u8 {
        let wrapped = wrap_angle(yaw);
        let shifted = if wrapped >= std::f64::consts::PI {
            0.0
        } else {
            wrapped + std::f64::consts::PI
        };
        let bin = (shifted / std::f64::consts::FRAC_PI_2).floor() as i64;
        bin.clamp(0, 3) as u8
    }

    /// Center angle of a yaw bin, used to disambiguate reconstructed yaw.
    pub fn yaw_bin_center(bin: u8) -> f64 {
        -std::f64::consts::PI + (bin as f64 + 0.5) * std::f64::consts::FRAC_PI_2
    }

    /// Flip only the sign split (the left/right mirror of the class).
    pub fn mirrored(&self) -> Self {
        Self {
            yaw_bin: self.yaw_bin,
            sign_split: 1 - self.sign_split,
        }
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut a = angle % tau;
    if a <= -std::f64::consts::PI {
        a += tau;
    } else if a > std::f64::consts::PI {
        a -= tau;
    }
    a
}

/// Assign the orientation class for a ground-truth yaw and the horizontal
/// position of the middle keypoint relative to the anchor (or box) center:
/// split 0 when the middle keypoint lies left of or on the center line.
pub fn yaw_to_class(yaw: f64, middle_x: f64, center_x: f64) -> OrientationClass {
    let yaw_bin = OrientationClass::yaw_bin_of(yaw);
    let sign_split = if middle_x <= center_x { 0 } else { 1 };
    OrientationClass {
        yaw_bin,
        sign_split,
    }
}

/// Axis-aligned anchor box in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Anchor {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, EncodingError> {
        if !(x1 < x2 && y1 < y2) {
            return Err(EncodingError::InvalidAnchor);
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }
}

/// The four keypoints of interest: image projections of the left, middle and
/// right visible bottom corners and the top corner above the middle one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoints {
    pub left: Point2<f64>,
    pub middle: Point2<f64>,
    pub right: Point2<f64>,
    pub top: Point2<f64>,
}

/// Class-specific box dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions3D {
    h: f64,
    w: f64,
    l: f64,
}

impl Dimensions3D {
    /// Sanity bounds for road objects: 0 < h < 6, 0 < w < 4, 0 < l < 25.
    pub fn new(h: f64, w: f64, l: f64) -> Result<Self, EncodingError> {
        let ok = h > 0.0 && w > 0.0 && l > 0.0 && h < 6.0 && w < 4.0 && l < 25.0;
        if !ok {
            return Err(EncodingError::InvalidDimensions { h, w, l });
        }
        Ok(Self { h, w, l })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

/// Anchor-normalized regression targets for the 2D box and the keypoints.
///
/// `xm` and `xt` store a non-negative x magnitude; the sign is carried by the
/// orientation class at decode time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionTargets {
    pub box2d: [f64; 4],
    pub xl: [f64; 2],
    pub xm: [f64; 2],
    pub xr: [f64; 2],
    pub xt: [f64; 2],
}

/// Encode a ground-truth box and keypoints against a positive anchor.
///
/// References: box corners against the matching anchor corners; the left and
/// right keypoints against the bottom-left and bottom-right anchor corners;
/// the middle and top keypoints against the anchor's central vertical at the
/// bottom and top edge. All x-offsets are normalized by anchor width, all
/// y-offsets by anchor height.
pub fn encode_targets(
    anchor: &Anchor,
    box2d: &[f64; 4],
    keypoints: &Keypoints,
    class: OrientationClass,
) -> RegressionTargets {
    let w = anchor.width();
    let h = anchor.height();
    let cx = anchor.center_x();
    let _ = class; // sign handling is fixed by convention: magnitudes stored
    RegressionTargets {
        box2d: [
            (box2d[0] - anchor.x1) / w,
            (box2d[1] - anchor.y1) / h,
            (box2d[2] - anchor.x2) / w,
            (box2d[3] - anchor.y2) / h,
        ],
        xl: [
            (keypoints.left.x - anchor.x1) / w,
            (keypoints.left.y - anchor.y2) / h,
        ],
        xm: [
            (keypoints.middle.x - cx).abs() / w,
            (keypoints.middle.y - anchor.y2) / h,
        ],
        xr: [
            (keypoints.right.x - anchor.x2) / w,
            (keypoints.right.y - anchor.y2) / h,
        ],
        xt: [
            (keypoints.top.x - cx).abs() / w,
            (keypoints.top.y - anchor.y1) / h,
        ],
    }
}

/// Invert [`encode_targets`]; the class's sign split restores which side of
/// the anchor center the middle/top keypoints decode to.
pub fn decode_targets(
    anchor: &Anchor,
    targets: &RegressionTargets,
    class: OrientationClass,
) -> ([f64; 4], Keypoints) {
    let w = anchor.width();
    let h = anchor.height();
    let cx = anchor.center_x();
    let sign = if class.sign_split() == 0 { -1.0 } else { 1.0 };
    let box2d = [
        anchor.x1 + targets.box2d[0] * w,
        anchor.y1 + targets.box2d[1] * h,
        anchor.x2 + targets.box2d[2] * w,
        anchor.y2 + targets.box2d[3] * h,
    ];
    let keypoints = Keypoints {
        left: Point2::new(anchor.x1 + targets.xl[0] * w, anchor.y2 + targets.xl[1] * h),
        middle: Point2::new(cx + sign * targets.xm[0] * w, anchor.y2 + targets.xm[1] * h),
        right: Point2::new(anchor.x2 + targets.xr[0] * w, anchor.y2 + targets.xr[1] * h),
        top: Point2::new(cx + sign * targets.xt[0] * w, anchor.y1 + targets.xt[1] * h),
    };
    (box2d, keypoints)
}

/// Focal classification loss for one anchor over `K * 8` entries.
///
/// `y` must be one-hot (positive anchor) or all-zero (negative anchor). For a
/// positive anchor the loss is `-alpha (1 - p_t)^gamma ln(p_t)` at the true
/// entry; a negative anchor contributes `-(1 - alpha) p^gamma ln(1 - p)`
/// summed over every entry.
pub fn focal_loss(p: &[f64], y: &[f64], alpha: f64, gamma: f64) -> Result<f64, EncodingError> {
    if p.len() != y.len() {
        return Err(EncodingError::LengthMismatch {
            left: p.len(),
            right: y.len(),
        });
    }
    for &v in p {
        if !(v > 0.0 && v <= 1.0) {
            return Err(EncodingError::DomainError { value: v });
        }
    }
    let positive = y.iter().any(|&t| t != 0.0);
    let mut loss = 0.0;
    if positive {
        for (&pi, &yi) in p.iter().zip(y) {
            if yi != 0.0 {
                loss -= alpha * (1.0 - pi).powf(gamma) * pi.ln();
            }
        }
    } else {
        for &pi in p {
            loss -= (1.0 - alpha) * pi.powf(gamma) * (1.0 - pi).ln();
        }
    }
    Ok(loss)
}

/// Sum of per-anchor focal losses normalized by the number of positive
/// anchors (all-zero target vectors count as negatives).
pub fn focal_loss_batch(
    anchors: &[(&[f64], &[f64])],
    alpha: f64,
    gamma: f64,
) -> Result<f64, EncodingError> {
    let mut total = 0.0;
    let mut positives = 0usize;
    for (p, y) in anchors {
        total += focal_loss(p, y, alpha, gamma)?;
        if y.iter().any(|&t| t != 0.0) {
            positives += 1;
        }
    }
    Ok(total / positives.max(1) as f64)
}

/// Smooth-L1 (Huber with unit knee) summed over elements:
/// `0.5 x^2` for `|x| < 1`, `|x| - 0.5` otherwise.
pub fn smooth_l1(pred: &[f64], target: &[f64]) -> Result<f64, EncodingError> {
    if pred.len() != target.len() {
        return Err(EncodingError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&a, &b)| {
            let x = (a - b).abs();
            if x < 1.0 {
                0.5 * x * x
            } else {
                x - 0.5
            }
        })
        .sum())
}

/// Total training loss: classification + weighted regression and dimension
/// terms.
pub fn total_loss(class: f64, reg: f64, dim: f64, lambda_reg: f64, lambda_dim: f64) -> f64 {
    class + lambda_reg * reg + lambda_dim * dim
}
