//! Parsers and writers for the on-disk formats: calibration files, object
//! labels, binary point clouds, semantic rasters, plane databases, and the
//! toolkit's own detection/result files.
//!
//! Parsers are total: every input yields either a value or an error carrying
//! the file position; nothing is silently skipped. All text formats use `.`
//! as the decimal separator regardless of locale, and floats in the
//! artifact-owned formats are written in shortest round-trippable form, so
//! `parse(write(x)) == x` bit for bit.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{Point2, Point3};
use thiserror::Error;

use crate::encoding::{Dimensions3D, Keypoints, OrientationClass};
use crate::geometry::{Plane, ProjectionMatrix};
use crate::plane_db::{DatabaseEntry, LabeledCloud, PlaneDatabase, SemanticMap};
use crate::solver::{Cuboid3D, Detection, PollResult};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: byte {offset}: {message}")]
    Binary {
        path: String,
        offset: usize,
        message: String,
    },
}

impl IoError {
    fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::file(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| IoError::file(path, e))
}

fn parse_f64(path: &Path, line_no: usize, token: &str) -> Result<f64, IoError> {
    token
        .parse::<f64>()
        .map_err(|_| IoError::parse(path, line_no, format!("invalid number `{token}`")))
}

// ---------------------------------------------------------------------------
// calibration files
// ---------------------------------------------------------------------------

/// Named whitespace-separated numeric entries, e.g. `P2: <12 floats>`.
/// Entries of any arity are retained; projection lookup requires 12.
#[derive(Debug, Clone, Default)]
pub struct CalibFile {
    pub entries: std::collections::BTreeMap<String, Vec<f64>>,
}

impl CalibFile {
    pub fn projection(&self, name: &str) -> Result<ProjectionMatrix, IoError> {
        let values = self.entries.get(name).ok_or_else(|| IoError::Parse {
            path: String::new(),
            line: 0,
            message: format!("calibration entry `{name}` not found"),
        })?;
        if values.len() != 12 {
            return Err(IoError::Parse {
                path: String::new(),
                line: 0,
                message: format!("entry `{name}` has {} values, expected 12", values.len()),
            });
        }
        let mut rows = [0.0; 12];
        rows.copy_from_slice(values);
        ProjectionMatrix::from_rows(rows).map_err(|e| IoError::Parse {
            path: String::new(),
            line: 0,
            message: format!("entry `{name}`: {e}"),
        })
    }
}

pub fn parse_calib(path: impl AsRef<Path>) -> Result<CalibFile, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut calib = CalibFile::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((name, rest)) = trimmed.split_once(':') else {
            return Err(IoError::parse(path, line_no, "expected `name: values`"));
        };
        let values = rest
            .split_whitespace()
            .map(|tok| parse_f64(path, line_no, tok))
            .collect::<Result<Vec<f64>, _>>()?;
        calib.entries.insert(name.trim().to_string(), values);
    }
    Ok(calib)
}

pub fn write_calib(path: impl AsRef<Path>, calib: &CalibFile) -> Result<(), IoError> {
    let mut out = String::new();
    for (name, values) in &calib.entries {
        out.push_str(name);
        out.push(':');
        for v in values {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

// ---------------------------------------------------------------------------
// object labels
// ---------------------------------------------------------------------------

/// One object annotation row: class, truncation, occlusion, observation
/// angle, 2D box, dimensions (h, w, l), bottom-center location, yaw about
/// the camera y axis, optional score.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabel {
    pub class_name: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    pub box2d: [f64; 4],
    pub dims_hwl: [f64; 3],
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl ObjectLabel {
    /// Ground-truth cuboid under the dataset convention: `location` is the
    /// bottom-face center and `rotation_y` the yaw about the camera y axis.
    /// `None` for `DontCare` rows.
    pub fn to_cuboid(&self) -> Option<Cuboid3D> {
        if self.class_name == "DontCare" {
            return None;
        }
        let dims = Dimensions3D::new(self.dims_hwl[0], self.dims_hwl[1], self.dims_hwl[2]).ok()?;
        Some(Cuboid3D::from_bottom_pose(
            &Point3::new(self.location[0], self.location[1], self.location[2]),
            &crate::plane_db::CAMERA_UP,
            self.rotation_y,
            dims,
        ))
    }

    /// Label row for a ground-truth cuboid, with the observation angle
    /// derived from yaw and bearing.
    pub fn from_cuboid(class_name: &str, cuboid: &Cuboid3D, box2d: [f64; 4]) -> Self {
        let corners = cuboid.bottom_corners();
        let bc = (corners[0].coords + corners[1].coords + corners[2].coords + corners[3].coords)
            / 4.0;
        let alpha = crate::encoding::wrap_angle(cuboid.yaw() - bc.x.atan2(bc.z));
        let dims = cuboid.dims();
        ObjectLabel {
            class_name: class_name.to_string(),
            truncation: 0.0,
            occlusion: 0,
            alpha,
            box2d,
            dims_hwl: [dims.h(), dims.w(), dims.l()],
            location: [bc.x, bc.y, bc.z],
            rotation_y: cuboid.yaw(),
            score: None,
        }
    }
}

pub fn parse_labels(path: impl AsRef<Path>) -> Result<Vec<ObjectLabel>, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 15 && tokens.len() != 16 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 15 or 16 fields, got {}", tokens.len()),
            ));
        }
        let num = |i: usize| parse_f64(path, line_no, tokens[i]);
        let label = ObjectLabel {
            class_name: tokens[0].to_string(),
            truncation: num(1)?,
            occlusion: num(2)? as i32,
            alpha: num(3)?,
            box2d: [num(4)?, num(5)?, num(6)?, num(7)?],
            dims_hwl: [num(8)?, num(9)?, num(10)?],
            location: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
            score: if tokens.len() == 16 {
                Some(num(15)?)
            } else {
                None
            },
        };
        if label.class_name != "DontCare" && label.dims_hwl.iter().any(|&d| d <= 0.0) {
            return Err(IoError::parse(
                path,
                line_no,
                format!("non-positive dimensions {:?}", label.dims_hwl),
            ));
        }
        labels.push(label);
    }
    Ok(labels)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[ObjectLabel]) -> Result<(), IoError> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            l.class_name,
            l.truncation,
            l.occlusion,
            l.alpha,
            l.box2d[0],
            l.box2d[1],
            l.box2d[2],
            l.box2d[3],
            l.dims_hwl[0],
            l.dims_hwl[1],
            l.dims_hwl[2],
            l.location[0],
            l.location[1],
            l.location[2],
            l.rotation_y,
        ));
        if let Some(score) = l.score {
            out.push_str(&format!(" {score}"));
        }
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

// ---------------------------------------------------------------------------
// binary point clouds
// ---------------------------------------------------------------------------

/// Little-endian float32 records of (x, y, z, reflectance); reflectance is
/// read and discarded. The cloud comes back unlabeled.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<LabeledCloud, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(IoError::Binary {
            path: path.display().to_string(),
            offset: bytes.len() - bytes.len() % 16,
            message: format!("trailing {} bytes, records are 16 bytes", bytes.len() % 16),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for record in bytes.chunks_exact(16) {
        let f = |i: usize| {
            f32::from_le_bytes([record[i], record[i + 1], record[i + 2], record[i + 3]]) as f64
        };
        points.push(Point3::new(f(0), f(4), f(8)));
    }
    LabeledCloud::unlabeled(points).map_err(|e| IoError::Binary {
        path: path.display().to_string(),
        offset: 0,
        message: e.to_string(),
    })
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &LabeledCloud) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(cloud.len() * 16);
    for p in &cloud.points {
        for v in [p.x as f32, p.y as f32, p.z as f32, 0.0f32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| IoError::file(path, e))
}

// ---------------------------------------------------------------------------
// semantic rasters (binary PGM) and the class-name side-car
// ---------------------------------------------------------------------------

pub fn read_semantic_map(path: impl AsRef<Path>) -> Result<SemanticMap, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    let bad = |offset: usize, message: &str| IoError::Binary {
        path: path.display().to_string(),
        offset,
        message: message.to_string(),
    };
    if !bytes.starts_with(b"P5") {
        return Err(bad(0, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad(pos, "expected a decimal header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text.parse().map_err(|_| bad(start, "header field overflow"))?;
    }
    if fields[2] > 255 {
        return Err(bad(pos, "maxval above 255 is unsupported"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad(pos, "expected single whitespace before raster data"));
    }
    pos += 1;
    let (width, height) = (fields[0], fields[1]);
    let expect = width * height;
    if bytes.len() - pos != expect {
        return Err(bad(
            pos,
            &format!("raster has {} bytes, expected {expect}", bytes.len() - pos),
        ));
    }
    SemanticMap::new(width, height, bytes[pos..].to_vec())
        .ok_or_else(|| bad(pos, "inconsistent raster dimensions"))
}

pub fn write_semantic_map(path: impl AsRef<Path>, map: &SemanticMap) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(map.data().len() + 32);
    write!(bytes, "P5\n{} {}\n255\n", map.width(), map.height()).unwrap();
    bytes.extend_from_slice(map.data());
    fs::write(path, bytes).map_err(|e| IoError::file(path, e))
}

/// Side-car mapping `class_id name`, one per line.
pub fn parse_class_map(
    path: impl AsRef<Path>,
) -> Result<std::collections::BTreeMap<u8, String>, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut map = std::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((id_text, name)) = trimmed.split_once(char::is_whitespace) else {
            return Err(IoError::parse(path, line_no, "expected `class_id name`"));
        };
        let id: u8 = id_text
            .parse()
            .map_err(|_| IoError::parse(path, line_no, format!("invalid class id `{id_text}`")))?;
        map.insert(id, name.trim().to_string());
    }
    Ok(map)
}

pub fn write_class_map(
    path: impl AsRef<Path>,
    map: &std::collections::BTreeMap<u8, String>,
) -> Result<(), IoError> {
    let mut out = String::new();
    for (id, name) in map {
        out.push_str(&format!("{id} {name}\n"));
    }
    write_text(path.as_ref(), &out)
}

// ---------------------------------------------------------------------------
// plane database files
// ---------------------------------------------------------------------------

const DB_VERSION: &str = "gppdb v1";

/// Text database: header `gppdb v1 count=<K>`, then one plane per line as
/// `a b c d inlier_count source_frame` with 17 significant digits.
pub fn write_plane_db(path: impl AsRef<Path>, db: &PlaneDatabase) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("{DB_VERSION} count={}\n", db.len()));
    for entry in db.entries() {
        let [a, b, c, d] = entry.plane.coeffs();
        out.push_str(&format!(
            "{a:.16e} {b:.16e} {c:.16e} {d:.16e} {} {}\n",
            entry.inlier_count, entry.source_frame
        ));
    }
    write_text(path.as_ref(), &out)
}

pub fn parse_plane_db(path: impl AsRef<Path>) -> Result<PlaneDatabase, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(IoError::parse(path, 1, "empty database file"));
    };
    let Some(count_text) = header
        .strip_prefix(DB_VERSION)
        .map(str::trim)
        .and_then(|rest| rest.strip_prefix("count="))
    else {
        return Err(IoError::parse(
            path,
            1,
            format!("bad header, expected `{DB_VERSION} count=<K>`"),
        ));
    };
    let count: usize = count_text
        .trim()
        .parse()
        .map_err(|_| IoError::parse(path, 1, "invalid count in header"))?;
    let mut entries = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 6 fields, got {}", tokens.len()),
            ));
        }
        let plane = Plane::from_coeffs(
            parse_f64(path, line_no, tokens[0])?,
            parse_f64(path, line_no, tokens[1])?,
            parse_f64(path, line_no, tokens[2])?,
            parse_f64(path, line_no, tokens[3])?,
        )
        .map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        let inlier_count: usize = tokens[4]
            .parse()
            .map_err(|_| IoError::parse(path, line_no, "invalid inlier count"))?;
        entries.push(DatabaseEntry {
            plane,
            inlier_count,
            source_frame: tokens[5].to_string(),
        });
    }
    if entries.len() != count {
        return Err(IoError::parse(
            path,
            1,
            format!("header count {count} but {} entries", entries.len()),
        ));
    }
    Ok(PlaneDatabase::new(entries))
}

// ---------------------------------------------------------------------------
// detection files
// ---------------------------------------------------------------------------

/// One detection per line:
/// `class_id score x1 y1 x2 y2 xl yl xm ym xr yr xt yt orient_id h w l`.
pub fn write_detections(path: impl AsRef<Path>, detections: &[Detection]) -> Result<(), IoError> {
    let mut out = String::new();
    for d in detections {
        let k = &d.keypoints;
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}\n",
            d.class_id,
            d.score,
            d.box2d[0],
            d.box2d[1],
            d.box2d[2],
            d.box2d[3],
            k.left.x,
            k.left.y,
            k.middle.x,
            k.middle.y,
            k.right.x,
            k.right.y,
            k.top.x,
            k.top.y,
            d.orientation.id(),
            d.dims.h(),
            d.dims.w(),
            d.dims.l(),
        ));
    }
    write_text(path.as_ref(), &out)
}

pub fn parse_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut detections = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 18 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 18 fields, got {}", tokens.len()),
            ));
        }
        let class_id: u32 = tokens[0]
            .parse()
            .map_err(|_| IoError::parse(path, line_no, "invalid class id"))?;
        let num = |i: usize| parse_f64(path, line_no, tokens[i]);
        let orient_id: u8 = tokens[14]
            .parse()
            .map_err(|_| IoError::parse(path, line_no, "invalid orientation id"))?;
        let orientation = OrientationClass::from_id(orient_id)
            .map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        let dims = Dimensions3D::new(num(15)?, num(16)?, num(17)?)
            .map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        let keypoints = Keypoints {
            left: Point2::new(num(6)?, num(7)?),
            middle: Point2::new(num(8)?, num(9)?),
            right: Point2::new(num(10)?, num(11)?),
            top: Point2::new(num(12)?, num(13)?),
        };
        let detection = Detection::new(
            [num(2)?, num(3)?, num(4)?, num(5)?],
            keypoints,
            orientation,
            dims,
            num(1)?,
            class_id,
        )
        .map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        detections.push(detection);
    }
    Ok(detections)
}

// ---------------------------------------------------------------------------
// result files
// ---------------------------------------------------------------------------

/// Parsed counterpart of one result line.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub plane: Plane,
    pub residual: f64,
    pub cuboid: Cuboid3D,
}

/// One line per detection, order preserved:
/// `a b c d residual yaw cx cy cz h w l` followed by the 24 corner
/// coordinates. Detections with no feasible plane produce a line of 36
/// `NaN`s so the row grid stays rectangular.
pub fn write_results<E>(
    path: impl AsRef<Path>,
    results: &[Result<PollResult, E>],
) -> Result<(), IoError> {
    let mut out = String::new();
    for result in results {
        match result {
            Ok(r) => {
                let [a, b, c, d] = r.plane.coeffs();
                let center = r.cuboid.center();
                let dims = r.cuboid.dims();
                out.push_str(&format!(
                    "{a} {b} {c} {d} {} {} {} {} {} {} {} {}",
                    r.residual,
                    r.cuboid.yaw(),
                    center.x,
                    center.y,
                    center.z,
                    dims.h(),
                    dims.w(),
                    dims.l(),
                ));
                for corner in r.cuboid.corners() {
                    out.push_str(&format!(" {} {} {}", corner.x, corner.y, corner.z));
                }
                out.push('\n');
            }
            Err(_) => {
                out.push_str(&"NaN ".repeat(35));
                out.push_str("NaN\n");
            }
        }
    }
    write_text(path.as_ref(), &out)
}

/// Parse a results file; infeasible rows come back as `None`.
pub fn parse_results(path: impl AsRef<Path>) -> Result<Vec<Option<ResultRecord>>, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 36 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 36 fields, got {}", tokens.len()),
            ));
        }
        let values = tokens
            .iter()
            .map(|t| parse_f64(path, line_no, t))
            .collect::<Result<Vec<f64>, _>>()?;
        if values[4].is_nan() {
            records.push(None);
            continue;
        }
        let plane = Plane::from_coeffs(values[0], values[1], values[2], values[3])
            .map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        let dims = Dimensions3D::new(values[9], values[10], values[11])
            .map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        let mut corners = [Point3::origin(); 8];
        for (i, corner) in corners.iter_mut().enumerate() {
            *corner = Point3::new(values[12 + 3 * i], values[13 + 3 * i], values[14 + 3 * i]);
        }
        let cuboid = Cuboid3D::from_parts(
            corners,
            Point3::new(values[6], values[7], values[8]),
            values[5],
            dims,
        );
        records.push(Some(ResultRecord {
            plane,
            residual: values[4],
            cuboid,
        }));
    }
    Ok(records)
}
