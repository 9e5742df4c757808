//! Seeded synthetic compositions with latent structure.
//!
//! Log intensities follow `μ_j + a_iᵀ b_j + ε_ij`, with per-part abundance
//! levels `μ_j` so that some parts are rare, a low-rank sample structure and
//! Gaussian noise. Rows are scaled to a common depth, which makes a detection
//! limit applied through [`CompositionMatrix::inject_zeros`] behave like a
//! count threshold. An optional binary response depends on the first latent
//! score.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::composition::CompositionMatrix;
use crate::error::{CodaError, Result};
use crate::io::BinaryResponse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rows: usize,
    pub parts: usize,
    pub factors: usize,
    /// Standard deviation of the part abundance levels on the log scale.
    pub abundance_spread: f64,
    /// Standard deviation of the factor loadings.
    pub factor_scale: f64,
    pub noise: f64,
    /// Row total after scaling.
    pub depth: f64,
    pub seed: u64,
    pub response: Option<ResponseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseConfig {
    pub intercept: f64,
    /// Log-odds change per unit of the first latent score.
    pub effect: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 40,
            parts: 15,
            factors: 3,
            abundance_spread: 1.0,
            factor_scale: 0.6,
            noise: 0.2,
            depth: 10_000.0,
            seed: 1,
            response: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub matrix: CompositionMatrix,
    pub response: Option<BinaryResponse>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    if config.rows < 2 || config.parts < 2 {
        return Err(CodaError::InvalidArgument(
            "synthetic data needs at least 2 rows and 2 parts".into(),
        ));
    }
    for (name, v) in [
        ("abundance spread", config.abundance_spread),
        ("factor scale", config.factor_scale),
        ("noise", config.noise),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CodaError::InvalidArgument(format!(
                "{name} must be finite and >= 0"
            )));
        }
    }
    if !(config.depth.is_finite() && config.depth > 0.0) {
        return Err(CodaError::InvalidArgument("depth must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let (n, p, k) = (config.rows, config.parts, config.factors);
    let mu: Vec<f64> = (0..p)
        .map(|_| config.abundance_spread * std.sample(&mut rng))
        .collect();
    let loadings = DMatrix::from_fn(p, k, |_, _| config.factor_scale * std.sample(&mut rng));
    let scores = DMatrix::from_fn(n, k, |_, _| std.sample(&mut rng));

    let mut values = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut logs = Vec::with_capacity(p);
        for j in 0..p {
            let structure: f64 = (0..k).map(|f| scores[(i, f)] * loadings[(j, f)]).sum();
            logs.push(mu[j] + structure + config.noise * std.sample(&mut rng));
        }
        // subtract the row maximum before exponentiating to avoid overflow
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        for j in 0..p {
            values[(i, j)] = config.depth * raw[j] / total;
        }
    }

    let response = match &config.response {
        None => None,
        Some(rc) => {
            let values: Vec<bool> = (0..n)
                .map(|i| {
                    let eta = rc.intercept + rc.effect * if k > 0 { scores[(i, 0)] } else { 0.0 };
                    rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
                })
                .collect();
            Some(BinaryResponse {
                name: "y".into(),
                values,
                class_labels: ["0".into(), "1".into()],
            })
        }
    };
    Ok(SynthData {
        matrix: CompositionMatrix::from_values(values)?,
        response,
    })
}

/// Smallest detection limit at which at least `fraction` of the cells of `m`
/// fall strictly below it.
pub fn limit_for_zero_fraction(m: &CompositionMatrix, fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(CodaError::InvalidArgument(format!(
            "zero fraction {fraction} outside [0, 1)"
        )));
    }
    let mut cells: Vec<f64> = m.values().iter().copied().collect();
    cells.sort_by(f64::total_cmp);
    let target = (fraction * cells.len() as f64).ceil() as usize;
    if target == 0 {
        return Ok(0.0);
    }
    // any value above the target-th smallest cell and not above the next one
    let below = cells[target - 1];
    Ok(match cells.get(target) {
        Some(&next) if next > below => below + (next - below) / 2.0,
        _ => f64::from_bits(below.to_bits() + 1),
    })
}
