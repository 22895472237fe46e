//! Deterministic PHM08-format surrogate trajectories.
//!
//! Six operating regimes are drawn independently per cycle; each sensor is a
//! regime baseline plus a degradation drift that grows exponentially towards
//! the end of life, plus Gaussian measurement noise. Sensors that carry no
//! drift (s1, s5, s6, s10, s16, s18, s19) are pure regime functions. Engine 1
//! has 223 cycles by default, matching the size of the PHM08 engine-1
//! trajectory.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{RawRecord, RawRecordTable, SENSOR_COUNT};
use crate::stats;

/// (altitude-like, Mach-like, throttle) settings of the six regimes.
const REGIMES: [[f64; 3]; 6] = [
    [0.0, 0.0, 100.0],
    [10.0, 0.25, 100.0],
    [20.0, 0.7, 100.0],
    [25.0, 0.62, 60.0],
    [35.0, 0.84, 100.0],
    [42.0, 0.84, 100.0],
];

/// Position of each regime between the sea-level and high-altitude anchors.
const REGIME_BLEND: [f64; 6] = [0.0, 0.22, 0.45, 0.55, 0.8, 1.0];

const SEA_LEVEL: [f64; SENSOR_COUNT] = [
    518.67, 642.5, 1590.0, 1408.0, 14.62, 21.61, 553.4, 2388.0, 9050.0, 1.3, 47.4, 521.7, 2388.0,
    8130.0, 8.43, 0.03, 393.0, 2388.0, 100.0, 38.9, 23.3,
];

const ALTITUDE: [f64; SENSOR_COUNT] = [
    445.0, 549.6, 1350.0, 1120.0, 3.91, 5.71, 138.6, 2211.9, 8300.0, 1.02, 42.0, 130.4, 2387.9,
    8080.0, 9.33, 0.02, 330.0, 2212.0, 100.0, 10.6, 6.36,
];

/// End-of-life drift per sensor.
const DRIFT: [f64; SENSOR_COUNT] = [
    0.0, 1.5, 25.0, 35.0, 0.0, 0.0, -3.0, 0.3, 35.0, 0.0, 1.1, -2.3, 0.3, 20.0, 0.1, 0.0, 6.0,
    0.0, 0.0, -0.5, -0.35,
];

const NOISE: [f64; SENSOR_COUNT] = [
    0.0, 0.5, 6.0, 9.0, 0.0, 0.0, 0.9, 0.07, 20.0, 0.0, 0.27, 0.74, 0.07, 19.0, 0.037, 0.0, 1.5,
    0.0, 0.0, 0.18, 0.11,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub units: u32,
    pub engine1_cycles: u32,
    /// Steepness of the exponential health decay.
    pub degradation_rate: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            units: 3,
            engine1_cycles: 223,
            degradation_rate: 4.0,
            seed: 2008,
        }
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Generates run-to-failure trajectories for `cfg.units` engines.
pub fn generate(cfg: &SurrogateConfig) -> Result<RawRecordTable> {
    let mut rng = stats::rng(cfg.seed);
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut records = Vec::new();
    for unit in 1..=cfg.units {
        let life = if unit == 1 {
            cfg.engine1_cycles
        } else {
            rng.random_range(128..=357)
        };
        let severity: f64 = rng.random_range(0.8..1.2);
        let scale = (cfg.degradation_rate).exp() - 1.0;
        for cycle in 1..=life {
            let r = rng.random_range(0..REGIMES.len());
            let blend = REGIME_BLEND[r];
            let throttle_factor = if REGIMES[r][2] < 100.0 { 0.95 } else { 1.0 };
            let health = ((cfg.degradation_rate * f64::from(cycle) / f64::from(life)).exp() - 1.0)
                / scale;
            let settings = [
                round4(REGIMES[r][0] + 0.003 * unit_normal.sample(&mut rng)),
                round4(REGIMES[r][1] + 0.0003 * unit_normal.sample(&mut rng)),
                REGIMES[r][2],
            ];
            let mut sensors = [0.0; SENSOR_COUNT];
            for (k, s) in sensors.iter_mut().enumerate() {
                let base = SEA_LEVEL[k] + (ALTITUDE[k] - SEA_LEVEL[k]) * blend;
                let base = if k == 0 || k == 18 { base } else { base * throttle_factor };
                let drift = DRIFT[k] * severity * health;
                *s = round4(base + drift + NOISE[k] * unit_normal.sample(&mut rng));
            }
            records.push(RawRecord {
                unit,
                cycle,
                settings,
                sensors,
            });
        }
    }
    RawRecordTable::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_records, RecordFormat};

    #[test]
    fn engine_one_has_configured_length() {
        let t = generate(&SurrogateConfig::default()).unwrap();
        assert_eq!(t.records().iter().filter(|r| r.unit == 1).count(), 223);
        assert_eq!(t.units(), vec![1, 2, 3]);
    }

    #[test]
    fn whitespace_dump_round_trips() {
        let t = generate(&SurrogateConfig {
            units: 1,
            engine1_cycles: 40,
            ..SurrogateConfig::default()
        })
        .unwrap();
        let back = parse_records(&t.to_whitespace(), RecordFormat::Whitespace).unwrap();
        assert_eq!(back, t);
    }
}
