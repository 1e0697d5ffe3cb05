//! Synthetic embedding tables with closed-form proxy values.
//!
//! Noun `k` with angular rate `beta_k` maps the phrase `"n <plural>"` to the
//! unit vector `(cos(beta_k ln n), sin(beta_k ln n), 0, ..., 0)`. Optional
//! isotropic Gaussian noise is added before renormalizing. `beta_k` is the
//! base rate times the multiplier of the noun's first category that has one
//! (1 otherwise).

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_store::{EmbeddingTable, TableError};
use crate::lexicon::{Lexicon, NounEntry};
use crate::metrics::SumUpper;
use crate::phrasegen::{render_phrase, QuantityRange};
use crate::rng::{cell_seed, SplitMix64};

/// `cos(beta ln 1.5)` below this is treated as a vanishing denominator.
pub const ORACLE_DENOMINATOR_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("beta must be finite and non-negative, got {0}")]
    InvalidBeta(f64),
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error("multiplier for '{0}' must be finite and non-negative")]
    InvalidMultiplier(String),
    #[error("beta {beta} times ln({hi}/2) reaches pi/2; similarities would not stay positive")]
    AngleOverflow { beta: f64, hi: u32 },
    #[error("oracle needs a noiseless configuration")]
    Noisy,
    #[error("cos(beta ln 1.5) = {0:e}; the proxy denominator vanishes")]
    DegenerateDenominator(f64),
    #[error("proxy horizon must be at least 4, got {0}")]
    HorizonTooSmall(u32),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub beta: f64,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quantities: QuantityRange,
    /// Per-category rate multipliers.
    #[serde(default)]
    pub multipliers: BTreeMap<String, f64>,
    #[serde(default = "default_model_id")]
    pub model_id: String,
}

fn default_dimension() -> usize {
    16
}

fn default_model_id() -> String {
    "synth".to_string()
}

impl SynthConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            dimension: default_dimension(),
            noise_sigma: 0.0,
            seed: 0,
            quantities: QuantityRange::default(),
            multipliers: BTreeMap::new(),
            model_id: default_model_id(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rate for one noun.
    pub fn beta_for(&self, entry: &NounEntry) -> f64 {
        let m = entry.categories.iter().find_map(|c| self.multipliers.get(c)).copied().unwrap_or(1.0);
        self.beta * m
    }

    fn check_angle(&self, beta: f64) -> Result<(), SynthError> {
        if beta * (f64::from(self.quantities.hi()) / 2.0).ln() >= FRAC_PI_2 {
            return Err(SynthError::AngleOverflow { beta, hi: self.quantities.hi() });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(SynthError::InvalidBeta(self.beta));
        }
        if self.dimension < 2 {
            return Err(SynthError::InvalidDimension(self.dimension));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidNoise(self.noise_sigma));
        }
        for (name, m) in &self.multipliers {
            if !(m.is_finite() && *m >= 0.0) {
                return Err(SynthError::InvalidMultiplier(name.clone()));
            }
        }
        let max_mult = self.multipliers.values().copied().fold(1.0, f64::max);
        self.check_angle(self.beta * max_mult)
    }

    /// Embedding of `"n <plural>"` for a noun with rate `beta`.
    pub fn vector(&self, beta: f64, noun: &str, n: u32) -> Vec<f64> {
        let theta = beta * f64::from(n).ln();
        let mut v = vec![0.0; self.dimension];
        v[0] = theta.cos();
        v[1] = theta.sin();
        if self.noise_sigma > 0.0 {
            let mut rng = SplitMix64::new(cell_seed(self.seed, noun, n));
            for x in v.iter_mut() {
                *x += self.noise_sigma * rng.next_gaussian();
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
        }
        v
    }
}

/// Builds a table covering every noun over `cfg.quantities`. When two nouns
/// share a plural, the first noun in lexicon order supplies the phrase.
pub fn synth_table(cfg: &SynthConfig, nouns: &Lexicon) -> Result<EmbeddingTable, SynthError> {
    cfg.validate()?;
    let mut table = EmbeddingTable::new(cfg.model_id.clone(), cfg.dimension);
    let mut line = 0;
    for entry in nouns.entries() {
        let beta = cfg.beta_for(entry);
        for n in cfg.quantities.iter() {
            let phrase = render_phrase(n, entry).expect("range starts at 2");
            if table.contains(&phrase) {
                continue;
            }
            line += 1;
            table.insert(phrase, &cfg.vector(beta, &entry.singular, n), line)?;
        }
    }
    Ok(table)
}

/// Closed-form proxy of a noiseless synthetic noun with rate `beta`:
///
/// `sum_{n=3}^{T} cos(beta ln((n+1)/n)) / (T cos(beta ln 1.5))`
pub fn oracle_proxy_for_beta(beta: f64, horizon: u32, upper: SumUpper) -> Result<f64, SynthError> {
    if horizon < 4 {
        return Err(SynthError::HorizonTooSmall(horizon));
    }
    let denom = (beta * 1.5f64.ln()).cos();
    if denom.abs() < ORACLE_DENOMINATOR_FLOOR {
        return Err(SynthError::DegenerateDenominator(denom));
    }
    let numer: f64 =
        (3..=upper.last_term(horizon)).map(|n| (beta * (f64::from(n + 1) / f64::from(n)).ln()).cos()).sum();
    Ok(numer / (f64::from(horizon) * denom))
}

/// Closed-form proxy for the base rate of a noiseless configuration.
pub fn oracle_proxy(cfg: &SynthConfig, horizon: u32) -> Result<f64, SynthError> {
    if cfg.noise_sigma != 0.0 {
        return Err(SynthError::Noisy);
    }
    oracle_proxy_for_beta(cfg.beta, horizon, SumUpper::Inclusive)
}
