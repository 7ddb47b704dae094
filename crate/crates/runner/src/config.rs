//! Experiment configuration read from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::path::Path;

use cov3d_core::channel::{ChannelParams, LosModel};
use cov3d_core::geometry::{RegionRadius, SimGeometry, TypicalUe, UeSampling};
use cov3d_core::QuadratureSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Monte-Carlo trials per coverage point.
    pub trials: u64,
    pub theta_db: f64,
    pub sweep: SweepConfig,
    pub channel: ChannelConfig,
    pub geometry: GeometryConfig,
    pub quadrature: QuadratureConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 20_000,
            theta_db: -10.0,
            sweep: SweepConfig::default(),
            channel: ChannelConfig::default(),
            geometry: GeometryConfig::default(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Log-spaced grid `points` values from `min` to `max`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Explicit(Vec<f64>),
    Log { min: f64, max: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Explicit(v) => v.clone(),
            Grid::Log { min, max, points } => log_grid(*min, *max, *points),
        }
    }

    fn validate(&self, field: &str) -> Result<(), RunError> {
        if let Grid::Log { min, max, points } = self {
            if *points == 0 {
                return Err(RunError::invalid(field, "points must be at least 1"));
            }
            if !(*min > 0.0 && *max >= *min && max.is_finite()) {
                return Err(RunError::invalid(field, "need 0 < min <= max"));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(RunError::invalid(field, "must not be empty"));
        }
        if let Some(bad) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(RunError::invalid(field, format!("values must be positive, got {bad}")));
        }
        Ok(())
    }
}

/// `points` values evenly spaced in log10 between `min` and `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![min];
    }
    let (a, b) = (min.log10(), max.log10());
    (0..points)
        .map(|i| {
            if i == 0 {
                min
            } else if i + 1 == points {
                max
            } else {
                10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// AP intensities per m³ for the activity and coverage sweeps.
    pub lambda_ap: Grid,
    /// UE intensities per m³; one curve each.
    pub lambda_ue: Vec<f64>,
    /// Active-AP intensities per m³ for the link LOS sweep.
    pub lambda_active: Grid,
    /// Neighbor orders n of the link LOS sweep.
    pub los_orders: Vec<u32>,
    /// Networks per point of the activity sweep.
    pub activity_draws: u64,
    /// Networks per point of the link LOS sweep.
    pub los_draws: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_ap: Grid::Log { min: 1e-6, max: 1e2, points: 12 },
            lambda_ue: vec![1e-4, 1e-2, 1e0],
            lambda_active: Grid::Log { min: 1e-9, max: 1e-1, points: 12 },
            los_orders: vec![1, 2, 3],
            activity_draws: 12,
            los_draws: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LosLaw {
    /// 3GPP pico-cell law.
    Exact,
    /// exp(−(d/L)³).
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// 10·log10 of the LOS path loss at 1 m.
    pub k_los_db: f64,
    pub k_nlos_db: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub nakagami_shape: u32,
    /// Scale L of the cubic-exponential LOS law, meters.
    pub los_scale: f64,
    /// LOS law of the simulator.
    pub los_model: LosLaw,
    /// Recorded only; cancels out of the SIR.
    pub carrier_frequency_ghz: f64,
    /// Recorded only; cancels out of the SIR.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmit_power_dbm: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            k_los_db: 41.1,
            k_nlos_db: 32.9,
            alpha_los: 2.09,
            alpha_nlos: 3.75,
            nakagami_shape: 3,
            los_scale: 82.5,
            los_model: LosLaw::Exact,
            carrier_frequency_ghz: 2.0,
            transmit_power_dbm: None,
        }
    }
}

impl ChannelConfig {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            k_los: 10f64.powf(self.k_los_db / 10.0),
            k_nlos: 10f64.powf(self.k_nlos_db / 10.0),
            alpha_los: self.alpha_los,
            alpha_nlos: self.alpha_nlos,
            nakagami_shape: self.nakagami_shape,
            los_scale: self.los_scale,
            los_model: match self.los_model {
                LosLaw::Exact => LosModel::Exact3gpp,
                LosLaw::Cubic => LosModel::CubicExponential,
            },
        }
    }
}

/// `"auto"` or a length in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radius {
    Meters(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl Radius {
    fn to_core(self) -> RegionRadius {
        match self {
            Radius::Meters(m) => RegionRadius::Fixed(m),
            Radius::Keyword(AutoKeyword::Auto) => RegionRadius::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypicalUeMode {
    Probe,
    Counted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Auto,
    Full,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub ap_region_radius: Radius,
    pub ue_guard_margin: Radius,
    pub min_expected_aps: f64,
    pub max_expected_aps: f64,
    pub redraw_limit: u32,
    pub tail_budget: f64,
    pub far_field_compensation: bool,
    pub typical_ue: TypicalUeMode,
    pub ue_sampling: SamplingMode,
    pub point_cap: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            ap_region_radius: Radius::Keyword(AutoKeyword::Auto),
            ue_guard_margin: Radius::Keyword(AutoKeyword::Auto),
            min_expected_aps: 2000.0,
            max_expected_aps: 2000.0,
            redraw_limit: 100,
            tail_budget: 0.01,
            far_field_compensation: true,
            typical_ue: TypicalUeMode::Probe,
            ue_sampling: SamplingMode::Auto,
            point_cap: 1e7,
        }
    }
}

impl GeometryConfig {
    pub fn sim_geometry(&self) -> SimGeometry {
        SimGeometry {
            ap_region_radius: self.ap_region_radius.to_core(),
            ue_guard_margin: self.ue_guard_margin.to_core(),
            min_expected_aps: self.min_expected_aps,
            max_expected_aps: self.max_expected_aps,
            redraw_limit: self.redraw_limit,
            tail_budget: self.tail_budget,
            far_field_compensation: self.far_field_compensation,
            typical_ue: match self.typical_ue {
                TypicalUeMode::Probe => TypicalUe::Probe,
                TypicalUeMode::Counted => TypicalUe::Counted,
            },
            ue_sampling: match self.ue_sampling {
                SamplingMode::Auto => UeSampling::Auto,
                SamplingMode::Full => UeSampling::Full,
                SamplingMode::Sparse => UeSampling::Sparse,
            },
            point_cap: self.point_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
    pub tail_cutoff_epsilon: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSettings::default();
        Self {
            relative_tolerance: q.relative_tolerance,
            absolute_tolerance: q.absolute_tolerance,
            max_subdivisions: q.max_subdivisions,
            tail_cutoff_epsilon: q.tail_cutoff_epsilon,
        }
    }
}

impl QuadratureConfig {
    pub fn settings(&self) -> QuadratureSettings {
        QuadratureSettings {
            relative_tolerance: self.relative_tolerance,
            absolute_tolerance: self.absolute_tolerance,
            max_subdivisions: self.max_subdivisions,
            tail_cutoff_epsilon: self.tail_cutoff_epsilon,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.trials < cov3d_core::montecarlo::MIN_TRIALS {
            return Err(RunError::invalid(
                "trials",
                format!("must be at least {}", cov3d_core::montecarlo::MIN_TRIALS),
            ));
        }
        if !self.theta_db.is_finite() {
            return Err(RunError::invalid("theta_db", "must be finite"));
        }
        self.sweep.lambda_ap.validate("sweep.lambda_ap")?;
        self.sweep.lambda_active.validate("sweep.lambda_active")?;
        if self.sweep.lambda_ue.is_empty() {
            return Err(RunError::invalid("sweep.lambda_ue", "must not be empty"));
        }
        if let Some(bad) = self.sweep.lambda_ue.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(RunError::invalid("sweep.lambda_ue", format!("values must be positive, got {bad}")));
        }
        if self.sweep.los_orders.is_empty() {
            return Err(RunError::invalid("sweep.los_orders", "must not be empty"));
        }
        if self.sweep.los_orders.contains(&0) {
            return Err(RunError::invalid("sweep.los_orders", "orders start at 1"));
        }
        if self.sweep.activity_draws == 0 {
            return Err(RunError::invalid("sweep.activity_draws", "must be positive"));
        }
        if self.sweep.los_draws == 0 {
            return Err(RunError::invalid("sweep.los_draws", "must be positive"));
        }
        self.channel
            .params()
            .validate()
            .map_err(|e| RunError::prefixed("channel", e))?;
        self.geometry
            .sim_geometry()
            .validate()
            .map_err(|e| RunError::prefixed("geometry", e))?;
        self.quadrature
            .settings()
            .validate()
            .map_err(|e| RunError::prefixed("quadrature", e))?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("configuration serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let p = cfg.channel.params();
        assert!((p.k_los - 10f64.powf(4.11)).abs() < 1e-9 * p.k_los);
        assert!((p.k_nlos - 10f64.powf(3.29)).abs() < 1e-9 * p.k_nlos);
        assert_eq!(cfg.theta_db, -10.0);
        assert_eq!(cfg.sweep.lambda_ap.values().len(), 12);
    }

    #[test]
    fn radius_keyword_and_number() {
        let cfg = ExperimentConfig::from_toml("[geometry]\nap_region_radius = 50.0\nue_guard_margin = \"auto\"\n").unwrap();
        assert_eq!(cfg.geometry.ap_region_radius, Radius::Meters(50.0));
        assert_eq!(cfg.geometry.sim_geometry().ue_guard_margin, RegionRadius::Auto);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_toml("[sweep]\nlambda_ue = []\n").unwrap_err();
        assert!(e.to_string().contains("sweep.lambda_ue"), "{e}");
        let e = ExperimentConfig::from_toml("[channel]\nalpha_nlos = 2.5\n").unwrap_err();
        assert!(e.to_string().contains("alpha_nlos"), "{e}");
        let e = ExperimentConfig::from_toml("[sweep]\nlos_orders = []\n").unwrap_err();
        assert!(e.to_string().contains("los_orders"), "{e}");
        let e = ExperimentConfig::from_toml("bogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-6, 1e2, 12);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[11], 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log_grid(3.0, 5.0, 1), vec![3.0]);
    }
}
