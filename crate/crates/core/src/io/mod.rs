//! File I/O shared by the pipeline: PLY clouds and record streams
//! (trajectories, GNSS, detections, DBH records).

mod ply;
mod records;

pub use ply::{read_ply, write_ply, PlyError};
pub use records::{
    read_dbh_records, read_detections, read_gnss, read_trajectory, write_detections, write_gnss,
    write_trajectory, RecordError,
};
