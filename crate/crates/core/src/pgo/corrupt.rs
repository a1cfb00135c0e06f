//! Synthetic GNSS degradation: noise spikes, dropout windows, and
//! constant-offset segments, the canonical under-canopy failure modes.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::GnssFix;

/// Whether corrupted fixes confess their injected error in the reported
/// covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    /// Covariance inflated to account for the injected error.
    HonestCovariance,
    /// Covariance left untouched (the receiver lies).
    Deceptive,
}

/// Corruption parameters. All zero rates leave the stream untouched.
#[derive(Debug, Clone, Copy)]
pub struct CorruptionSpec {
    /// Per-fix probability of a noise spike.
    pub spike_probability: f64,
    /// Expected dropout windows per minute of stream.
    pub dropout_rate_per_minute: f64,
    /// Number of constant-offset segments.
    pub offset_segments: usize,
    pub covariance_mode: CovarianceMode,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self {
            spike_probability: 0.0,
            dropout_rate_per_minute: 0.0,
            offset_segments: 0,
            covariance_mode: CovarianceMode::Deceptive,
        }
    }
}

/// Spike magnitude distribution, meters.
const SPIKE_MEAN: f64 = 10.0;
const SPIKE_STD: f64 = 2.0;
/// Dropout window duration range, seconds.
const DROPOUT_RANGE: (f64, f64) = (15.0, 30.0);
/// Constant-offset segment shape: 10 m for 10 s.
const OFFSET_MAGNITUDE: f64 = 10.0;
const OFFSET_DURATION: f64 = 10.0;

fn sub_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Corrupt a GNSS stream deterministically under `seed`. Spikes displace
/// individual fixes, dropouts remove contiguous windows, offsets shift
/// contiguous segments by a fixed horizontal vector. In honest mode the
/// covariance of a displaced fix is inflated by the outer product of the
/// injected error.
pub fn corrupt_gnss(gnss: &[GnssFix], spec: &CorruptionSpec, seed: u64) -> Vec<GnssFix> {
    if gnss.is_empty() {
        return Vec::new();
    }
    let t0 = gnss.first().unwrap().t;
    let t1 = gnss.last().unwrap().t;
    let duration = (t1 - t0).max(0.0);

    // Dropout windows.
    let mut drop_rng = sub_rng(seed, 1);
    let n_windows = (spec.dropout_rate_per_minute * duration / 60.0).round() as usize;
    let windows: Vec<(f64, f64)> = (0..n_windows)
        .map(|_| {
            let len = DROPOUT_RANGE.0 + drop_rng.random::<f64>() * (DROPOUT_RANGE.1 - DROPOUT_RANGE.0);
            let start = t0 + drop_rng.random::<f64>() * (duration - len).max(0.0);
            (start, start + len)
        })
        .collect();

    // Constant-offset segments.
    let mut off_rng = sub_rng(seed, 2);
    let offsets: Vec<(f64, f64, Vector3<f64>)> = (0..spec.offset_segments)
        .map(|_| {
            let start = t0 + off_rng.random::<f64>() * (duration - OFFSET_DURATION).max(0.0);
            let ang = off_rng.random::<f64>() * std::f64::consts::TAU;
            let dir = Vector3::new(ang.cos(), ang.sin(), 0.0) * OFFSET_MAGNITUDE;
            (start, start + OFFSET_DURATION, dir)
        })
        .collect();

    let mut spike_rng = sub_rng(seed, 3);
    let spike_mag = Normal::new(SPIKE_MEAN, SPIKE_STD).expect("valid normal");

    let mut out = Vec::with_capacity(gnss.len());
    for fix in gnss {
        if windows.iter().any(|&(a, b)| fix.t >= a && fix.t < b) {
            continue;
        }
        let mut fix = fix.clone();
        let mut injected = Vector3::zeros();
        for &(a, b, dir) in &offsets {
            if fix.t >= a && fix.t < b {
                injected += dir;
            }
        }
        if spec.spike_probability > 0.0 {
            // Draw per retained fix in stream order; deterministic under seed.
            let hit = spike_rng.random::<f64>() < spec.spike_probability;
            if hit {
                let mag = spike_mag.sample(&mut spike_rng).abs();
                injected += random_unit_vector(&mut spike_rng) * mag;
            }
        }
        if injected != Vector3::zeros() {
            fix.position += injected;
            if spec.covariance_mode == CovarianceMode::HonestCovariance {
                fix.covariance += injected * injected.transpose();
            }
        }
        out.push(fix);
    }
    out
}
