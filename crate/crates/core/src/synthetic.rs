//! Built-in drift generator shaped like a C-MAPSS training split.
//!
//! Each engine follows an exponential health index `h(t) ∈ [0, 1]`; drifting
//! sensors move `amplitude * h(t)` away from an engine-specific baseline with
//! Gaussian noise proportional to the amplitude. Three sensors (11, 4, 12) are
//! given the cleanest trends so the drift ranking has a known answer.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adaptation::engine_rng;
use crate::cmapss::{SensorTrajectory, N_CHANNELS, N_SENSORS, N_SETTINGS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub engines: usize,
    pub min_length: usize,
    pub max_length: usize,
    /// Range of the health-index growth rate; larger is more convex.
    pub rate_min: f64,
    pub rate_max: f64,
    /// Multiplier on every sensor's noise level.
    pub noise_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            engines: 20,
            min_length: 150,
            max_length: 260,
            rate_min: 2.5,
            rate_max: 5.0,
            noise_scale: 1.0,
        }
    }
}

/// (sensor id, nominal level, drift amplitude, noise as a fraction of amplitude)
const SENSOR_PROFILE: [(u8, f64, f64, f64); N_SENSORS] = [
    (1, 518.67, 0.0, 0.0),
    (2, 642.5, 0.8, 0.30),
    (3, 1590.0, 15.0, 0.35),
    (4, 1408.0, 25.0, 0.10),
    (5, 14.62, 0.0, 0.0),
    (6, 21.61, 0.0, 0.0),
    (7, 553.9, -1.8, 0.30),
    (8, 2388.06, 0.15, 0.40),
    (9, 9050.0, 30.0, 0.45),
    (10, 1.3, 0.0, 0.0),
    (11, 47.4, 0.9, 0.09),
    (12, 521.8, -1.7, 0.11),
    (13, 2388.06, 0.15, 0.40),
    (14, 8140.0, 20.0, 0.45),
    (15, 8.42, 0.08, 0.30),
    (16, 0.03, 0.0, 0.0),
    (17, 392.0, 4.0, 0.35),
    (18, 2388.0, 0.0, 0.0),
    (19, 100.0, 0.0, 0.0),
    (20, 38.9, -0.5, 0.30),
    (21, 23.35, -0.3, 0.30),
];

/// Generates `cfg.engines` trajectories with ids `1..=engines`.
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Vec<SensorTrajectory> {
    (1..=cfg.engines as u32)
        .map(|id| generate_engine(cfg, seed, id))
        .collect()
}

fn generate_engine(cfg: &SyntheticConfig, seed: u64, engine_id: u32) -> SensorTrajectory {
    // Stream offset keeps generator draws disjoint from adaptation draws.
    let mut rng = engine_rng(seed ^ 0x9e37_79b9_7f4a_7c15, engine_id);
    let len = rng.random_range(cfg.min_length..=cfg.max_length.max(cfg.min_length));
    let rate = rng.random_range(cfg.rate_min..=cfg.rate_max.max(cfg.rate_min));
    let offsets: Vec<f64> = SENSOR_PROFILE
        .iter()
        .map(|&(_, _, amp, _)| {
            let spread = 0.08 * amp.abs();
            if spread > 0.0 {
                Normal::new(0.0, spread).unwrap().sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let setting_noise = [
        Normal::new(0.0, 0.002).unwrap(),
        Normal::new(0.0, 0.0003).unwrap(),
    ];
    let norm = rate.exp_m1();
    let mut data = Vec::with_capacity(len * N_CHANNELS);
    for t in 0..len {
        let health = (rate * t as f64 / (len - 1) as f64).exp_m1() / norm;
        data.push(setting_noise[0].sample(&mut rng));
        data.push(setting_noise[1].sample(&mut rng));
        data.push(100.0);
        for (k, &(_, level, amp, noise)) in SENSOR_PROFILE.iter().enumerate() {
            let sigma = noise * amp.abs() * cfg.noise_scale;
            let eps = if sigma > 0.0 {
                Normal::new(0.0, sigma).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            data.push(level + offsets[k] + amp * health + eps);
        }
    }
    debug_assert_eq!(data.len(), len * (N_SETTINGS + N_SENSORS));
    SensorTrajectory::new(engine_id, data).expect("generated trajectory is well-formed")
}
