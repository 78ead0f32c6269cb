//! Ground-plane polling for monocular 3D box estimation.
//!
//! Given per-object 2D keypoints, a coarse orientation class, 3D dimensions
//! and a camera projection matrix, the solver picks — from a precomputed
//! database of candidate ground planes — the plane whose lifted keypoints
//! best match the predicted box shape, then constructs the oriented 3D box
//! on it. The crate also ships the database builder (semantic filtering +
//! iterative RANSAC over labeled clouds), the anchor target encoding and
//! loss functions of the 2D front-end, the 3D evaluation metric suite, a
//! synthetic-scene oracle, and parsers for all on-disk formats.
//!
//! The usual flow:
//!
//! 1. [`plane_db::build_database`] turns labeled clouds into a ranked
//!    [`plane_db::PlaneDatabase`]; [`plane_db::PlaneDatabase::top_k`] cuts
//!    working subsets.
//! 2. [`solver::poll`] / [`solver::poll_batch`] select the best-fit plane
//!    per detection and return the reconstructed [`solver::Cuboid3D`].
//! 3. [`metrics`] scores predictions against ground truth.

pub mod encoding;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod plane_db;
pub mod solver;
pub mod synth;

pub use encoding::{Dimensions3D, Keypoints, OrientationClass};
pub use geometry::{Plane, ProjectionMatrix, Ray};
pub use plane_db::{PlaneDatabase, RansacConfig};
pub use solver::{poll, poll_batch, Cuboid3D, Detection, PollResult};
