//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gpp_core::io::{
    parse_calib, parse_class_map, parse_detections, parse_labels, parse_plane_db, parse_results,
    read_cloud, read_semantic_map, write_calib, write_detections, write_labels, write_plane_db,
    write_results, CalibFile, ObjectLabel, ResultRecord,
};
use gpp_core::metrics::{
    bin_by_distance, center_error, closest_point_error, match_by_iou, orientation_error_deg,
    orientation_similarity, pair_iou_3d, CurveSeries, Difficulty, EvalBox, EvalPair,
    GroundTruth2D, RankedDetection, RecallSampling,
};
use gpp_core::plane_db::{build_database, Frame, PlaneDatabase, RansacConfig};
use gpp_core::solver::poll_batch;
use gpp_core::synth::{
    database_of_true_planes, generate_scenes, noisy_detection_batch, plane_pool, NoiseParams,
    SceneParams,
};
use gpp_core::Detection;

use crate::CliError;

// ---------------------------------------------------------------------------
// build-db
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn build_db(
    frames_dir: &Path,
    out: &Path,
    classes: &str,
    calib_entry: &str,
    threshold: f64,
    success_prob: f64,
    min_points: usize,
    max_iterations: usize,
    refit: bool,
    seed: u64,
) -> Result<(), CliError> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(CliError::validation("--threshold must be positive"));
    }
    if !(success_prob > 0.0 && success_prob < 1.0) {
        return Err(CliError::validation("--success-prob must be in (0, 1)"));
    }
    if min_points < 3 {
        return Err(CliError::validation("--min-points must be at least 3"));
    }

    // resolve class tokens: numeric ids directly, names via classes.txt
    let side_car = frames_dir.join("classes.txt");
    let name_map: BTreeMap<String, u8> = if side_car.is_file() {
        parse_class_map(&side_car)?
            .into_iter()
            .map(|(id, name)| (name, id))
            .collect()
    } else {
        BTreeMap::new()
    };
    let mut class_ids = std::collections::BTreeSet::new();
    for token in classes.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Ok(id) = token.parse::<u8>() {
            class_ids.insert(id);
        } else if let Some(&id) = name_map.get(token) {
            class_ids.insert(id);
        } else {
            return Err(CliError::validation(format!(
                "unknown semantic class `{token}` (no numeric id and not in classes.txt)"
            )));
        }
    }
    if class_ids.is_empty() {
        return Err(CliError::validation("--classes resolved to an empty set"));
    }

    let mut stems: Vec<String> = fs::read_dir(frames_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", frames_dir.display())))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            if path.extension().is_some_and(|e| e == "bin") {
                Some(path.file_stem()?.to_string_lossy().into_owned())
            } else {
                None
            }
        })
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(CliError::validation(format!(
            "no .bin clouds under {}",
            frames_dir.display()
        )));
    }

    let mut frames = Vec::with_capacity(stems.len());
    for stem in &stems {
        let cloud = read_cloud(frames_dir.join(format!("{stem}.bin")))?;
        let semantics = read_semantic_map(frames_dir.join(format!("{stem}.pgm")))?;
        let calib = parse_calib(frames_dir.join(format!("{stem}.txt")))?;
        let projection = calib.projection(calib_entry)?;
        frames.push(Frame {
            id: stem.clone(),
            cloud,
            projection,
            semantics,
        });
    }

    let cfg = RansacConfig {
        inlier_threshold: threshold,
        success_probability: success_prob,
        min_points,
        max_iterations,
        refit,
    };
    let db = build_database(&frames, &cfg, &class_ids, seed)
        .map_err(|e| CliError::validation(e.to_string()))?;
    write_plane_db(out, &db)?;
    println!(
        "built {} planes from {} frames -> {}",
        db.len(),
        frames.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn synth(
    out: &Path,
    seed: u64,
    scenes: usize,
    noise_kp: f64,
    noise_dim: f64,
    flip_prob: f64,
    extra_planes: usize,
    max_objects: usize,
    plane_tilt: f64,
) -> Result<(), CliError> {
    if scenes == 0 {
        return Err(CliError::validation("--scenes must be at least 1"));
    }
    if noise_kp < 0.0 || noise_dim < 0.0 || !(0.0..=1.0).contains(&flip_prob) {
        return Err(CliError::validation(
            "noise sigmas must be non-negative and --flip-prob within [0, 1]",
        ));
    }
    if max_objects == 0 {
        return Err(CliError::validation("--max-objects must be at least 1"));
    }
    if !(0.0..0.5).contains(&plane_tilt) {
        return Err(CliError::validation("--plane-tilt must be within [0, 0.5)"));
    }

    let params = SceneParams {
        max_objects,
        plane_tilt,
        ..SceneParams::default()
    };
    let batch = generate_scenes(seed, scenes, &params);

    let dets_dir = out.join("dets");
    let truth_dir = out.join("truth");
    fs::create_dir_all(&dets_dir)?;
    fs::create_dir_all(&truth_dir)?;

    let mut calib = CalibFile::default();
    let matrix = params.camera();
    let mut entries = Vec::with_capacity(12);
    for r in 0..3 {
        for c in 0..4 {
            entries.push(matrix.matrix()[(r, c)]);
        }
    }
    calib.entries.insert("P2".to_string(), entries);
    write_calib(out.join("calib.txt"), &calib)?;

    let mut db_entries = database_of_true_planes(&batch).entries().to_vec();
    if extra_planes > 0 {
        db_entries.extend(
            plane_pool(seed.wrapping_add(7919), extra_planes, &params)
                .entries()
                .to_vec(),
        );
    }
    let db = PlaneDatabase::new(db_entries);
    write_plane_db(out.join("planes.txt"), &db)?;

    let noise = NoiseParams {
        keypoint_sigma_px: noise_kp,
        dim_sigma_m: noise_dim,
        flip_probability: flip_prob,
    };
    let noisy = noisy_detection_batch(&batch, seed.wrapping_add(1), &noise);
    let mut objects = 0usize;
    for (i, (scene, dets)) in batch.iter().zip(&noisy).enumerate() {
        write_detections(dets_dir.join(format!("{i:06}.txt")), dets)?;
        let labels: Vec<ObjectLabel> = scene
            .truths
            .iter()
            .map(|t| ObjectLabel::from_cuboid("Car", &t.cuboid, t.box2d))
            .collect();
        write_labels(truth_dir.join(format!("{i:06}.txt")), &labels)?;
        objects += dets.len();
    }
    println!(
        "wrote {scenes} scenes ({objects} objects), {} planes -> {}",
        db.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// poll
// ---------------------------------------------------------------------------

/// A detections input: one file, or every `.txt` in a directory by stem.
fn collect_inputs(path: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    if path.is_dir() {
        let mut files: Vec<(String, PathBuf)> = fs::read_dir(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
            .filter_map(|entry| {
                let p = entry.ok()?.path();
                if p.extension().is_some_and(|e| e == "txt") {
                    Some((p.file_stem()?.to_string_lossy().into_owned(), p))
                } else {
                    None
                }
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::validation(format!(
                "no .txt files under {}",
                path.display()
            )));
        }
        Ok(files)
    } else if path.is_file() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(vec![(stem, path.to_path_buf())])
    } else {
        Err(CliError::Io(format!("{}: not found", path.display())))
    }
}

pub fn poll(
    dets: &Path,
    db_path: &Path,
    calib_path: &Path,
    calib_entry: &str,
    top_k: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    if top_k == Some(0) {
        return Err(CliError::validation("--top-k must be at least 1"));
    }
    let camera = parse_calib(calib_path)?.projection(calib_entry)?;
    // flip stored normals to face this camera before polling
    let mut db = parse_plane_db(db_path)?.oriented_toward(&camera.center());
    if let Some(k) = top_k {
        db = db.top_k(k);
    }
    if db.is_empty() {
        return Err(CliError::validation("plane database is empty"));
    }

    let inputs = collect_inputs(dets)?;
    let many = dets.is_dir();
    if many {
        fs::create_dir_all(out)?;
    } else if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }

    let mut total = 0usize;
    let mut infeasible = 0usize;
    for (stem, file) in &inputs {
        let detections = parse_detections(file)?;
        let results = poll_batch(&detections, &db, &camera);
        total += results.len();
        infeasible += results.iter().filter(|r| r.is_err()).count();
        let target = if many {
            out.join(format!("{stem}.txt"))
        } else {
            out.to_path_buf()
        };
        write_results(target, &results)?;
    }
    println!(
        "polled {total} detections against {} planes ({infeasible} infeasible) -> {}",
        db.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / ablate
// ---------------------------------------------------------------------------

fn parse_edge_list(bins: &str) -> Result<Vec<f64>, CliError> {
    let edges: Result<Vec<f64>, _> = bins
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse::<f64>)
        .collect();
    let edges = edges.map_err(|e| CliError::validation(format!("--bins: {e}")))?;
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::validation(
            "--bins needs at least two strictly ascending edges",
        ));
    }
    Ok(edges)
}

struct EvalFrame {
    detections: Vec<Detection>,
    results: Vec<Option<ResultRecord>>,
    truths: Vec<ObjectLabel>,
}

fn load_eval_frames(
    results: &Path,
    dets: &Path,
    truth: &Path,
) -> Result<Vec<EvalFrame>, CliError> {
    let result_files = collect_inputs(results)?;
    let det_files = collect_inputs(dets)?;
    let truth_files = collect_inputs(truth)?;
    if result_files.len() != det_files.len() || det_files.len() != truth_files.len() {
        return Err(CliError::validation(format!(
            "frame count mismatch: {} results, {} detections, {} truth",
            result_files.len(),
            det_files.len(),
            truth_files.len()
        )));
    }
    let mut frames = Vec::with_capacity(det_files.len());
    for ((r_stem, r_path), ((d_stem, d_path), (t_stem, t_path))) in result_files
        .iter()
        .zip(det_files.iter().zip(truth_files.iter()))
    {
        if results.is_dir() && (r_stem != d_stem || d_stem != t_stem) {
            return Err(CliError::validation(format!(
                "frame stems diverge: {r_stem} vs {d_stem} vs {t_stem}"
            )));
        }
        let detections = parse_detections(d_path)?;
        let records = parse_results(r_path)?;
        if detections.len() != records.len() {
            return Err(CliError::validation(format!(
                "{d_stem}: {} detections but {} result rows",
                detections.len(),
                records.len()
            )));
        }
        frames.push(EvalFrame {
            detections,
            results: records,
            truths: parse_labels(t_path)?,
        });
    }
    Ok(frames)
}

struct Report {
    detections: usize,
    truths: usize,
    matched: usize,
    infeasible: usize,
    ap: f64,
    aos: f64,
    os: f64,
    means: Vec<(&'static str, f64)>,
    curves: Vec<(&'static str, CurveSeries)>,
}

impl Report {
    fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("detections {}\n", self.detections));
        out.push_str(&format!("truths {}\n", self.truths));
        out.push_str(&format!("matched {}\n", self.matched));
        out.push_str(&format!("infeasible {}\n", self.infeasible));
        out.push_str(&format!("ap {}\n", self.ap));
        out.push_str(&format!("aos {}\n", self.aos));
        out.push_str(&format!("os {}\n", self.os));
        for (name, value) in &self.means {
            out.push_str(&format!("{name} {value}\n"));
        }
        for (name, series) in &self.curves {
            out.push_str(&format!("curve {name}\n"));
            for (lo, hi, mean, count) in series.rows() {
                out.push_str(&format!("{lo} {hi} {mean} {count}\n"));
            }
        }
        out
    }
}

/// Match detections to truths per frame at the 2D IoU gate and aggregate the
/// 3D metrics and AOS over the matched set.
fn evaluate(
    frames: &[EvalFrame],
    iou_threshold: f64,
    sampling: RecallSampling,
    edges: &[f64],
    difficulty: Option<Difficulty>,
) -> Report {
    let mut ranked = Vec::new();
    let mut gts = Vec::new();
    let mut pairs = Vec::new();
    let mut detections = 0usize;
    let mut infeasible = 0usize;

    for (frame_idx, frame) in frames.iter().enumerate() {
        detections += frame.detections.len();
        infeasible += frame.results.iter().filter(|r| r.is_none()).count();

        let truth_boxes: Vec<(ObjectLabel, gpp_core::Cuboid3D)> = frame
            .truths
            .iter()
            .filter(|l| {
                difficulty.is_none_or(|d| {
                    d.admits(l.box2d[3] - l.box2d[1], l.occlusion, l.truncation)
                })
            })
            .filter_map(|l| l.to_cuboid().map(|c| (l.clone(), c)))
            .collect();

        for (det, result) in frame.detections.iter().zip(&frame.results) {
            ranked.push(RankedDetection {
                frame: frame_idx,
                box2d: det.box2d,
                score: det.score,
                azimuth: result.as_ref().map_or(0.0, |r| r.cuboid.yaw()),
            });
        }
        for (label, cuboid) in &truth_boxes {
            gts.push(GroundTruth2D {
                frame: frame_idx,
                box2d: label.box2d,
                azimuth: cuboid.yaw(),
            });
        }

        let det_tuples: Vec<(usize, [f64; 4], f64)> = frame
            .detections
            .iter()
            .map(|d| (frame_idx, d.box2d, d.score))
            .collect();
        let gt_tuples: Vec<(usize, [f64; 4])> = truth_boxes
            .iter()
            .map(|(l, _)| (frame_idx, l.box2d))
            .collect();
        for (det_idx, gt_idx) in match_by_iou(&det_tuples, &gt_tuples, iou_threshold) {
            if let Some(record) = &frame.results[det_idx] {
                pairs.push(EvalPair::new(
                    EvalBox {
                        cuboid: record.cuboid.clone(),
                        box2d: frame.detections[det_idx].box2d,
                    },
                    EvalBox {
                        cuboid: truth_boxes[gt_idx].1.clone(),
                        box2d: truth_boxes[gt_idx].0.box2d,
                    },
                ));
            }
        }
    }

    let (ap, aos, os) = match orientation_similarity(&ranked, &gts, iou_threshold, sampling) {
        Ok(r) => (r.ap, r.aos, r.os),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };

    let mean = |f: &dyn Fn(&EvalPair) -> f64| {
        if pairs.is_empty() {
            f64::NAN
        } else {
            pairs.iter().map(f).sum::<f64>() / pairs.len() as f64
        }
    };
    let means = vec![
        ("mean_center_error_m", mean(&center_error)),
        ("mean_closest_point_error_m", mean(&closest_point_error)),
        ("mean_iou_3d", mean(&pair_iou_3d)),
        ("mean_orientation_error_deg", mean(&orientation_error_deg)),
    ];
    let curves = vec![
        ("center_error_m", bin_by_distance(&pairs, center_error, edges)),
        (
            "closest_point_error_m",
            bin_by_distance(&pairs, closest_point_error, edges),
        ),
        ("iou_3d", bin_by_distance(&pairs, pair_iou_3d, edges)),
        (
            "orientation_error_deg",
            bin_by_distance(&pairs, orientation_error_deg, edges),
        ),
    ];
    Report {
        detections,
        truths: gts.len(),
        matched: pairs.len(),
        infeasible,
        ap,
        aos,
        os,
        means,
        curves,
    }
}

fn sampling_from(points: usize) -> Result<RecallSampling, CliError> {
    match points {
        40 => Ok(RecallSampling::FortyPoint),
        11 => Ok(RecallSampling::ElevenPoint),
        other => Err(CliError::validation(format!(
            "--recall-points must be 40 or 11, got {other}"
        ))),
    }
}

fn difficulty_from(token: &str) -> Result<Option<Difficulty>, CliError> {
    match token {
        "all" => Ok(None),
        "easy" => Ok(Some(Difficulty::Easy)),
        "moderate" => Ok(Some(Difficulty::Moderate)),
        "hard" => Ok(Some(Difficulty::Hard)),
        other => Err(CliError::validation(format!(
            "--difficulty must be easy, moderate, hard or all, got `{other}`"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    results: &Path,
    dets: &Path,
    truth: &Path,
    iou: f64,
    recall_points: usize,
    bins: &str,
    difficulty: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&iou) {
        return Err(CliError::validation("--iou must be within [0, 1]"));
    }
    let sampling = sampling_from(recall_points)?;
    let edges = parse_edge_list(bins)?;
    let difficulty = difficulty_from(difficulty)?;
    let frames = load_eval_frames(results, dets, truth)?;
    let report = evaluate(&frames, iou, sampling, &edges, difficulty);
    let text = report.render();
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn ablate(
    dets: &Path,
    truth: &Path,
    db_path: &Path,
    calib_path: &Path,
    calib_entry: &str,
    sizes: &str,
    iou: f64,
    bins: &str,
    out: &Path,
) -> Result<(), CliError> {
    let edges = parse_edge_list(bins)?;
    let sizes_list: Result<Vec<usize>, _> = sizes
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse::<usize>)
        .collect();
    let mut sizes_list = sizes_list.map_err(|e| CliError::validation(format!("--sizes: {e}")))?;
    if sizes_list.is_empty() || sizes_list.contains(&0) {
        return Err(CliError::validation("--sizes must be positive integers"));
    }

    let camera = parse_calib(calib_path)?.projection(calib_entry)?;
    let db = parse_plane_db(db_path)?.oriented_toward(&camera.center());
    if db.is_empty() {
        return Err(CliError::validation("plane database is empty"));
    }
    // cap at the database size and drop duplicate capped entries
    for size in &mut sizes_list {
        *size = (*size).min(db.len());
    }
    sizes_list.dedup();

    let det_files = collect_inputs(dets)?;
    let truth_files = collect_inputs(truth)?;
    if det_files.len() != truth_files.len() {
        return Err(CliError::validation(format!(
            "frame count mismatch: {} detections, {} truth",
            det_files.len(),
            truth_files.len()
        )));
    }
    let mut base_frames = Vec::new();
    for ((_, d_path), (_, t_path)) in det_files.iter().zip(&truth_files) {
        base_frames.push((parse_detections(d_path)?, parse_labels(t_path)?));
    }

    fs::create_dir_all(out)?;
    for &size in &sizes_list {
        let cut = db.top_k(size);
        let frames: Vec<EvalFrame> = base_frames
            .iter()
            .map(|(detections, truths)| {
                let results = poll_batch(detections, &cut, &camera)
                    .into_iter()
                    .map(|r| {
                        r.ok().map(|p| ResultRecord {
                            plane: p.plane,
                            residual: p.residual,
                            cuboid: p.cuboid,
                        })
                    })
                    .collect();
                EvalFrame {
                    detections: detections.clone(),
                    results,
                    truths: truths.clone(),
                }
            })
            .collect();
        let report = evaluate(&frames, iou, RecallSampling::FortyPoint, &edges, None);
        for (name, series) in &report.curves {
            let mut text = String::new();
            for (lo, hi, mean, count) in series.rows() {
                text.push_str(&format!("{lo} {hi} {mean} {count}\n"));
            }
            let path = out.join(format!("{name}_{size}.txt"));
            fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        let summary: Vec<String> = report
            .means
            .iter()
            .map(|(name, value)| format!("{name} {value}"))
            .collect();
        println!("size {size} matched {} {}", report.matched, summary.join(" "));
    }
    println!("curves -> {}", out.display());
    Ok(())
}
