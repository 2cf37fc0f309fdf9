//! Experiment specs: a simulation config whose sparsity is swept with the
//! signal level held fixed.

use serde::Deserialize;

use stgof_core::dcbm::{MembershipVariant, ModelSection, PPattern, PiSection, RunSection, SimulationConfig, ThetaLaw};
use stgof_core::stgof::StgofConfig;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentModel {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

/// `beta_n` values to visit; at each one `b_n = 1 - snr_target / beta_n`,
/// so `(1 - b_n) * beta_n` stays at `snr_target`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub beta_n: Vec<f64>,
    pub snr_target: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub alpha: f64,
    pub k_max: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = StgofConfig::default();
        Self { alpha: d.alpha, k_max: d.k_max }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ExperimentModel,
    pub theta: ThetaLaw,
    pub pi: PiSection,
    #[serde(rename = "P")]
    pub p: PPattern,
    #[serde(default)]
    pub variant: MembershipVariant,
    pub run: RunSection,
    pub sweep: Sweep,
    #[serde(default)]
    pub estimator: EstimatorSection,
}

impl ExperimentSpec {
    /// Parses and validates; every sweep point must give `b_n` in (0, 1).
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Spec(e.to_string()))?;
        if spec.sweep.beta_n.is_empty() {
            return Err(CliError::Spec("sweep.beta_n is empty".into()));
        }
        if !(spec.estimator.alpha > 0.0 && spec.estimator.alpha < 1.0) || spec.estimator.k_max == 0 {
            return Err(CliError::Spec("estimator needs 0 < alpha < 1 and k_max >= 1".into()));
        }
        for i in 0..spec.sweep.beta_n.len() {
            spec.point(i)?;
        }
        Ok(spec)
    }

    pub fn points(&self) -> usize {
        self.sweep.beta_n.len()
    }

    /// The simulation config at sweep point `i`.
    pub fn point(&self, i: usize) -> Result<SimulationConfig, CliError> {
        let beta_n = self.sweep.beta_n[i];
        let b_n = 1.0 - self.sweep.snr_target / beta_n;
        if !(b_n > 0.0 && b_n < 1.0) {
            return Err(CliError::Spec(format!(
                "sweep point {i} (beta_n = {beta_n}): b_n = 1 - {}/{beta_n} = {b_n} is outside (0, 1)",
                self.sweep.snr_target
            )));
        }
        let config = SimulationConfig {
            model: ModelSection { n: self.model.n, k: self.model.k, beta_n, b_n },
            theta: self.theta.clone(),
            pi: self.pi.clone(),
            p: self.p.clone(),
            variant: self.variant.clone(),
            run: self.run.clone(),
        };
        config.validate().map_err(|e| CliError::Spec(format!("sweep point {i} (beta_n = {beta_n}): {e}")))?;
        Ok(config)
    }

    pub fn estimator(&self) -> StgofConfig {
        StgofConfig { alpha: self.estimator.alpha, k_max: self.estimator.k_max, ..StgofConfig::default() }
    }
}
