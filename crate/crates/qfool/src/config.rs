//! Attack configuration: the tunables, their file format, and resolution of
//! shape-dependent defaults.
//!
//! [`AttackConfig`] is what users edit — a plain key/value (TOML) file where
//! every key is optional. Shape-dependent defaults (noise scales, search
//! tolerance) are filled in by [`AttackConfig::resolve`] once the oracle's
//! [`Domain`] is known; the result is the [`ResolvedConfig`] echoed into every
//! trace and run record so outputs are self-describing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::point::Domain;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// User-facing knobs for both attack modes. Unset optionals fall back to
/// shape-dependent defaults at [`AttackConfig::resolve`] time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Total oracle-query budget `n`.
    pub total_budget: u64,
    /// Queries added to the gradient estimate per growth step (`n_u`).
    pub unit_batch: u64,
    /// Per-query improvement threshold `ε` of the inner-loop gate.
    pub improvement_threshold: f64,
    /// Off-boundary step `δ` of the targeted walk. Unset means adaptive:
    /// half the current perturbation norm, re-derived every pass.
    pub targeted_step: Option<f64>,
    /// Initial probe-noise norm `ω₀`. Default `0.01·(hi-lo)·√d`.
    pub initial_noise_norm: Option<f64>,
    /// Per-coordinate σ₀ of the starting-point noise. Default `0.02·(hi-lo)`.
    pub initial_sigma: Option<f64>,
    /// Multiplier applied to σ after each failed starting-point draw.
    pub sigma_growth: f64,
    /// Boundary bisection stops once the bracket gap is below this.
    /// Default `1e-5 ·` box diameter.
    pub binary_search_tolerance: Option<f64>,
    /// Low-frequency subspace side `√m`; unset means full-space noise.
    pub subspace_side: Option<usize>,
    /// Optional early-stop threshold τ: the attack stops once the best
    /// perturbation norm `‖v‖₂` falls to τ or below.
    pub perturbation_threshold: Option<f64>,
    /// Probes of the coarse scan that brackets the first target-class
    /// segment in targeted line searches.
    pub scan_probes: u32,
    /// Seed for the attack's single deterministic RNG stream.
    pub rng_seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            total_budget: 10_000,
            unit_batch: 100,
            improvement_threshold: 0.95,
            targeted_step: None,
            initial_noise_norm: None,
            initial_sigma: None,
            sigma_growth: 2.0,
            binary_search_tolerance: None,
            subspace_side: None,
            perturbation_threshold: None,
            scan_probes: 32,
            rng_seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Fills shape-dependent defaults against `domain` and validates every
    /// field. The resolved values are what the attack actually runs with.
    pub fn resolve(&self, domain: &Domain) -> Result<ResolvedConfig, ConfigError> {
        if domain.is_empty() {
            return Err(ConfigError::Invalid("domain has zero dimensions".into()));
        }
        if self.unit_batch == 0 {
            return Err(ConfigError::Invalid("unit_batch must be at least 1".into()));
        }
        if !(self.improvement_threshold > 0.0 && self.improvement_threshold < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "improvement_threshold must lie in (0, 1), got {}",
                self.improvement_threshold
            )));
        }
        if self.sigma_growth <= 1.0 {
            return Err(ConfigError::Invalid(format!(
                "sigma_growth must exceed 1, got {}",
                self.sigma_growth
            )));
        }
        if self.scan_probes < 2 {
            return Err(ConfigError::Invalid("scan_probes must be at least 2".into()));
        }
        let range = domain.bounds.range();
        let diameter = domain.diameter();
        let tolerance = self
            .binary_search_tolerance
            .unwrap_or(1e-5 * diameter);
        if !(tolerance > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "binary_search_tolerance must be positive, got {tolerance}"
            )));
        }
        let initial_noise_norm = self
            .initial_noise_norm
            .unwrap_or(0.01 * range * (domain.len() as f64).sqrt());
        if !(initial_noise_norm > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "initial_noise_norm must be positive, got {initial_noise_norm}"
            )));
        }
        let initial_sigma = self.initial_sigma.unwrap_or(0.02 * range);
        if !(initial_sigma > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "initial_sigma must be positive, got {initial_sigma}"
            )));
        }
        if let Some(step) = self.targeted_step {
            if !(step > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "targeted_step must be positive, got {step}"
                )));
            }
        }
        if let Some(tau) = self.perturbation_threshold {
            if !(tau > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "perturbation_threshold must be positive, got {tau}"
                )));
            }
        }
        if let Some(side) = self.subspace_side {
            let max = domain.shape.min_side();
            if side == 0 || side > max {
                return Err(ConfigError::Invalid(format!(
                    "subspace_side {side} outside 1..={max} for shape {}",
                    domain.shape
                )));
            }
        }
        Ok(ResolvedConfig {
            domain: *domain,
            total_budget: self.total_budget,
            unit_batch: self.unit_batch,
            improvement_threshold: self.improvement_threshold,
            targeted_step: self.targeted_step,
            initial_noise_norm,
            initial_sigma,
            sigma_growth: self.sigma_growth,
            binary_search_tolerance: tolerance,
            subspace_side: self.subspace_side,
            perturbation_threshold: self.perturbation_threshold,
            scan_probes: self.scan_probes,
            rng_seed: self.rng_seed,
        })
    }
}

/// A fully concrete configuration: every default filled in against a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub domain: Domain,
    pub total_budget: u64,
    pub unit_batch: u64,
    pub improvement_threshold: f64,
    pub targeted_step: Option<f64>,
    pub initial_noise_norm: f64,
    pub initial_sigma: f64,
    pub sigma_growth: f64,
    pub binary_search_tolerance: f64,
    pub subspace_side: Option<usize>,
    pub perturbation_threshold: Option<f64>,
    pub scan_probes: u32,
    pub rng_seed: u64,
}

impl ResolvedConfig {
    /// Noise norms adapted during estimation never fall below this floor.
    pub fn noise_norm_floor(&self) -> f64 {
        self.binary_search_tolerance
    }
}
