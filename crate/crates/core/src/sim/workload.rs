//! Seeded workload generation: deterministic or Poisson arrival processes,
//! reproducible from the scenario seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::model::TimeMs;

use super::scenario::WorkloadSpec;

/// One generated request arrival.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrival {
    pub t: TimeMs,
    pub is_write: bool,
    pub key: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum BadSpec {
    #[error("arrival rate must be > 0, got {0}")]
    NonPositiveRate(f64),
    #[error("unknown arrival mode {0:?}")]
    UnknownMode(String),
    #[error("workload window is empty ({start_s}s .. {end_s}s)")]
    EmptyWindow { start_s: f64, end_s: f64 },
}

/// Expands a workload spec into a concrete arrival sequence. Deterministic
/// arrivals land at start + k/rate; Poisson arrivals use exponential gaps
/// from a seeded generator. The same seed always yields the same sequence.
pub fn generate_workload(
    spec: &WorkloadSpec,
    end_s: f64,
    seed: u64,
) -> Result<Vec<Arrival>, BadSpec> {
    if spec.arrivals == "none" {
        return Ok(Vec::new());
    }
    if spec.rate_per_s <= 0.0 {
        return Err(BadSpec::NonPositiveRate(spec.rate_per_s));
    }
    if end_s <= spec.start_s {
        return Err(BadSpec::EmptyWindow {
            start_s: spec.start_s,
            end_s,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut times: Vec<f64> = Vec::new();
    match spec.arrivals.as_str() {
        "deterministic" => {
            let gap = 1.0 / spec.rate_per_s;
            let mut k = 1u64;
            loop {
                let t = spec.start_s + k as f64 * gap;
                if t > end_s + 1e-9 {
                    break;
                }
                times.push(t);
                k += 1;
            }
        }
        "poisson" => {
            let mut t = spec.start_s;
            loop {
                let u: f64 = rng.random();
                // u in [0,1); 1-u in (0,1] keeps ln defined
                t += -(1.0 - u).ln() / spec.rate_per_s;
                if t > end_s {
                    break;
                }
                times.push(t);
            }
        }
        other => return Err(BadSpec::UnknownMode(other.to_string())),
    }
    Ok(times
        .into_iter()
        .map(|t| Arrival {
            t: TimeMs::from_secs(t),
            is_write: spec.write_ratio > 0.0 && rng.random_bool(spec.write_ratio),
            key: format!("k{}", rng.random_range(0..spec.key_space.max(1))),
        })
        .collect())
}
