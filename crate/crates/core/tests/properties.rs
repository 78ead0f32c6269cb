//! Property suites over the library invariants.

use gpp_core::encoding::{
    decode_targets, encode_targets, focal_loss, yaw_to_class, Anchor, Keypoints, OrientationClass,
};
use gpp_core::geometry::{intersect_ray_plane, Plane, ProjectionMatrix};
use gpp_core::metrics::{orientation_similarity, GroundTruth2D, RankedDetection, RecallSampling};
use gpp_core::plane_db::{DatabaseEntry, PlaneDatabase};
use gpp_core::solver::{plane_residual, poll, poll_batch};
use gpp_core::synth::{database_of_true_planes, generate_scenes, plane_pool, SceneParams};
use nalgebra::{Point2, Point3, Vector3};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    // decode(encode(x)) is the identity whenever the class is consistent
    // with the keypoint layout
    #[test]
    fn encode_decode_round_trip(
        ax in -500.0..500.0f64,
        ay in -300.0..300.0f64,
        w in 10.0..400.0f64,
        h in 10.0..300.0f64,
        bx in proptest::array::uniform4(-0.4..0.4f64),
        kx in proptest::array::uniform4(-0.7..0.7f64),
        ky in proptest::array::uniform4(-0.7..0.7f64),
        yaw in -3.0..3.0f64,
    ) {
        let anchor = Anchor::new(ax, ay, ax + w, ay + h).unwrap();
        let box2d = [
            ax + bx[0] * w,
            ay + bx[1] * h,
            ax + w + bx[2] * w,
            ay + h + bx[3] * h,
        ];
        let keypoints = Keypoints {
            left: Point2::new(ax + kx[0] * w, ay + h + ky[0] * h),
            middle: Point2::new(ax + w / 2.0 + kx[1] * w, ay + h + ky[1] * h),
            right: Point2::new(ax + w + kx[2] * w, ay + h + ky[2] * h),
            top: Point2::new(ax + w / 2.0 + kx[3] * w, ay + ky[3] * h),
        };
        // sign split must agree with the actual middle keypoint side; the
        // top keypoint shares the split, so give it the same side
        let class = yaw_to_class(yaw, keypoints.middle.x, anchor.center_x());
        let keypoints = Keypoints {
            top: Point2::new(
                anchor.center_x()
                    + (keypoints.middle.x - anchor.center_x()).signum()
                        * (keypoints.top.x - anchor.center_x()).abs(),
                keypoints.top.y,
            ),
            ..keypoints
        };
        let targets = encode_targets(&anchor, &box2d, &keypoints, class);
        let (box_back, kp_back) = decode_targets(&anchor, &targets, class);
        for i in 0..4 {
            prop_assert!((box_back[i] - box2d[i]).abs() < 1e-9);
        }
        for (a, b) in [
            (kp_back.left, keypoints.left),
            (kp_back.middle, keypoints.middle),
            (kp_back.right, keypoints.right),
            (kp_back.top, keypoints.top),
        ] {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    // yaw binning is total and assigns every angle exactly one bin
    #[test]
    fn yaw_bins_partition_the_circle(yaw in -10.0..10.0f64) {
        let bin = OrientationClass::yaw_bin_of(yaw);
        prop_assert!(bin <= 3);
        // a bin boundary belongs to the bin on its right (half-open rule)
        let eps = 1e-9;
        let boundary = -std::f64::consts::PI
            + f64::from(bin) * std::f64::consts::FRAC_PI_2;
        let wrapped = gpp_core::encoding::wrap_angle(yaw);
        let inside = if wrapped >= std::f64::consts::PI { -std::f64::consts::PI } else { wrapped };
        prop_assert!(inside + eps >= boundary);
        prop_assert!(inside < boundary + std::f64::consts::FRAC_PI_2 + eps);
    }

    // focal loss is non-negative and decreasing in the true-class probability
    #[test]
    fn focal_loss_monotone(p1 in 0.01..0.99f64, dp in 0.001..0.01f64) {
        let lo = focal_loss(&[p1], &[1.0], 0.25, 2.0).unwrap();
        let hi = focal_loss(&[p1 + dp], &[1.0], 0.25, 2.0).unwrap();
        prop_assert!(lo >= 0.0);
        prop_assert!(hi < lo);
    }

    // backproject-then-intersect returns any in-front point on a plane
    #[test]
    fn geometry_round_trip(
        x in -8.0..8.0f64,
        y in 0.5..2.0f64,
        z in 6.0..40.0f64,
        nx in -0.2..0.2f64,
        nz in -0.2..0.2f64,
    ) {
        let camera = ProjectionMatrix::pinhole(720.0, 620.0, 187.0);
        let point = Point3::new(x, y, z);
        let plane = Plane::from_point_normal(&point, Vector3::new(nx, -1.0, nz))
            .unwrap()
            .oriented_toward(&camera.center());
        let pixel = camera.project(&point).unwrap();
        let back = intersect_ray_plane(&camera.backproject(&pixel), &plane).unwrap();
        prop_assert!((back - point).norm() < 1e-7);
    }

    // AP bounds AOS and both live in [0, 1] for arbitrary detection sets
    #[test]
    fn aos_bounded_by_ap(
        n_det in 1usize..12,
        n_gt in 1usize..8,
        seed in 0u64..5000,
    ) {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut dets = Vec::new();
        for _ in 0..n_det {
            let x = rng.random_range(0.0..100.0);
            let y = rng.random_range(0.0..100.0);
            dets.push(RankedDetection {
                frame: rng.random_range(0..3),
                box2d: [x, y, x + rng.random_range(5.0..30.0), y + rng.random_range(5.0..30.0)],
                score: rng.random::<f64>(),
                azimuth: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            });
        }
        let mut gts = Vec::new();
        for _ in 0..n_gt {
            let x = rng.random_range(0.0..100.0);
            let y = rng.random_range(0.0..100.0);
            gts.push(GroundTruth2D {
                frame: rng.random_range(0..3),
                box2d: [x, y, x + rng.random_range(5.0..30.0), y + rng.random_range(5.0..30.0)],
                azimuth: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            });
        }
        for sampling in [RecallSampling::FortyPoint, RecallSampling::ElevenPoint] {
            let r = orientation_similarity(&dets, &gts, 0.5, sampling).unwrap();
            prop_assert!(r.aos >= -1e-12);
            prop_assert!(r.aos <= r.ap + 1e-12, "AOS {} > AP {}", r.aos, r.ap);
            prop_assert!(r.ap <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn argmin_is_invariant_to_uniform_residual_scaling() {
    let scenes = generate_scenes(301, 10, &SceneParams::default());
    let pool = plane_pool(302, 50, &SceneParams::default());
    for scene in &scenes {
        let det = &scene.detections[0];
        let residuals: Vec<f64> = pool
            .entries()
            .iter()
            .map(|e| plane_residual(det, &e.plane, &scene.camera).0)
            .collect();
        let argmin = |rs: &[f64]| {
            let mut best = 0;
            for (i, r) in rs.iter().enumerate() {
                if *r < rs[best] {
                    best = i;
                }
            }
            best
        };
        let base = argmin(&residuals);
        for c in [0.1, 3.0, 1e6] {
            let scaled: Vec<f64> = residuals.iter().map(|r| r * c).collect();
            assert_eq!(argmin(&scaled), base);
        }
        // and the solver's own selection agrees with the scalar argmin
        let result = poll(det, &pool, &scene.camera).unwrap();
        assert_eq!(result.plane_index, base);
    }
}

#[test]
fn min_residual_is_non_increasing_in_database_size() {
    let scenes = generate_scenes(401, 20, &SceneParams::default());
    let pool = plane_pool(402, 200, &SceneParams::default());
    for scene in &scenes {
        let det = &scene.detections[0];
        let mut last = f64::INFINITY;
        for k in [1, 5, 20, 50, 200] {
            let db = pool.top_k(k);
            let best = db
                .entries()
                .iter()
                .map(|e| plane_residual(det, &e.plane, &scene.camera).0)
                .fold(f64::INFINITY, f64::min);
            assert!(best <= last + 1e-15, "k={k}: {best} > {last}");
            last = best;
        }
    }
}

#[test]
fn poll_batch_equals_sequential_poll() {
    // 32 random detections against a 10k-plane database
    let scenes = generate_scenes(501, 40, &SceneParams::default());
    let db = {
        let mut merged: Vec<DatabaseEntry> = database_of_true_planes(&scenes)
            .entries()
            .to_vec();
        merged.extend(plane_pool(502, 10_000 - merged.len(), &SceneParams::default()).entries().to_vec());
        PlaneDatabase::new(merged)
    };
    assert_eq!(db.len(), 10_000);
    let camera = SceneParams::default().camera();
    let detections: Vec<_> = scenes
        .iter()
        .flat_map(|s| s.detections.iter().cloned())
        .take(32)
        .collect();
    assert_eq!(detections.len(), 32);
    let batch = poll_batch(&detections, &db, &camera);
    assert_eq!(batch.len(), detections.len());
    for (one, det) in batch.iter().zip(&detections) {
        let single = poll(det, &db, &camera);
        match (one, single) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a.plane_index, b.plane_index);
                assert_eq!(a.residual, b.residual);
                assert_eq!(a.cuboid.corners(), b.cuboid.corners());
            }
            (Err(a), Err(b)) => assert_eq!(*a, b),
            other => panic!("batch/sequential disagreement: {other:?}"),
        }
    }
}

#[test]
fn selected_plane_matches_point_set_of_truth() {
    // noiseless detections with the true plane present: the winner's plane
    // coincides with the truth as a point set
    let scenes = generate_scenes(601, 30, &SceneParams::default());
    let db = database_of_true_planes(&scenes);
    for scene in &scenes {
        for det in &scene.detections {
            let result = poll(det, &db, &scene.camera).unwrap();
            assert!(result.residual < 1e-6);
            let [a, b, c, d] = result.plane.coeffs();
            let [ta, tb, tc, td] = scene.plane.coeffs();
            let same = (a - ta).abs() + (b - tb).abs() + (c - tc).abs() + (d - td).abs() < 1e-9;
            let flipped = (a + ta).abs() + (b + tb).abs() + (c + tc).abs() + (d + td).abs() < 1e-9;
            assert!(same || flipped);
        }
    }
}

#[test]
fn parsers_are_total_on_arbitrary_bytes() {
    // every input yields Ok or a positioned error; none of the parsers panic
    use rand::{RngExt, SeedableRng};
    let dir = std::env::temp_dir().join(format!("gpp-fuzz-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    for case in 0..200 {
        let len = rng.random_range(0..400);
        let mut bytes = Vec::with_capacity(len);
        for _ in 0..len {
            // bias toward printable text with digits and separators
            let b: u8 = if rng.random::<f64>() < 0.7 {
                b" 0123456789.eE+-\n"[rng.random_range(0..17)]
            } else {
                rng.random_range(0..=255)
            };
            bytes.push(b);
        }
        let path = dir.join(format!("fuzz-{case}"));
        std::fs::write(&path, &bytes).unwrap();
        let _ = gpp_core::io::parse_calib(&path);
        let _ = gpp_core::io::parse_labels(&path);
        let _ = gpp_core::io::parse_detections(&path);
        let _ = gpp_core::io::parse_results(&path);
        let _ = gpp_core::io::parse_plane_db(&path);
        let _ = gpp_core::io::parse_class_map(&path);
        let _ = gpp_core::io::read_cloud(&path);
        let _ = gpp_core::io::read_semantic_map(&path);
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn center_error_triangle_inequality_under_translation() {
    use gpp_core::encoding::Dimensions3D;
    use gpp_core::metrics::{center_error, EvalBox, EvalPair};
    use gpp_core::solver::Cuboid3D;
    let up = Vector3::new(0.0, -1.0, 0.0);
    let dims = Dimensions3D::new(1.5, 1.6, 3.9).unwrap();
    let truth = Cuboid3D::from_bottom_pose(&Point3::new(0.0, 1.5, 12.0), &up, 0.4, dims);
    let step1 = Cuboid3D::from_bottom_pose(&Point3::new(1.0, 1.5, 12.5), &up, 0.4, dims);
    let step2 = Cuboid3D::from_bottom_pose(&Point3::new(2.5, 1.5, 13.0), &up, 0.4, dims);
    let eb = |c: &Cuboid3D| EvalBox {
        cuboid: c.clone(),
        box2d: [0.0, 0.0, 1.0, 1.0],
    };
    let direct = center_error(&EvalPair::new(eb(&step2), eb(&truth)));
    let via = center_error(&EvalPair::new(eb(&step1), eb(&truth)))
        + center_error(&EvalPair::new(eb(&step2), eb(&step1)));
    assert!(direct <= via + 1e-12);
}
