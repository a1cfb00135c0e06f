//! Turns forest point clouds, trajectories, GNSS streams, and image-space
//! detections into georeferenced invasive-species map layers.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`pgo`] — fuse LiDAR-inertial odometry with covariance-aware GNSS
//!    priors under robust kernels to produce a globally consistent
//!    trajectory.
//! 2. [`fields`] — collapse aerial and terrestrial point clouds into 2D
//!    tree-likelihood rasters (canopy LoG response, trunk KDE).
//! 3. [`align`] — recover the planar transform between the two rasters by
//!    maximizing normalized mutual information with multi-start
//!    derivative-free optimization, plus vertical alignment from shared
//!    ground.
//! 4. [`geotag`] — project image-space detections into the map, build
//!    semantic overlays, and export GeoTIFF rasters and KML placemarks.
//!
//! [`synth`] generates deterministic synthetic scenes with ground truth for
//! every stage, and [`eval`] computes the standard error metrics (ATE,
//! SE(2) alignment error, DBH mean relative error).

pub mod align;
pub mod cluster;
pub mod eval;
pub mod fields;
pub mod geom;
pub mod geotag;
pub mod grid;
pub mod io;
pub mod pgo;
pub mod synth;

pub use geom::{GeoAnchor, Point3, PointCloud, Se2Transform, Se3Pose};
pub use grid::GridField;
