use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, Domain, TimeGrid};
use crate::solver::{BasisConfig, SolverConfig, SolverMode};

use super::presets::{CustomNoise, GChoice, MarketModel};

/// Flat experiment description, loaded from JSON. Every field is optional;
/// missing ones take the values of the reference borrowing/lending setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mu: f64,
    #[serde(alias = "sigma")]
    pub sigma_coef: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "K")]
    pub strike: f64,
    pub x0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,

    pub domain_lower: f64,
    pub domain_upper: f64,
    pub basis_lower: f64,
    pub basis_upper: f64,
    /// Size the basis from the simulated paths instead of the bounds above.
    pub basis_from_paths: bool,

    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(rename = "M")]
    pub paths: usize,
    pub delta: f64,
    #[serde(rename = "I")]
    pub picard_iterations: usize,

    pub g_choice: GChoice,
    pub g_custom: CustomNoise,
    pub mode: SolverMode,
    pub seed: u64,
    pub reps: usize,
    pub shift_enabled: bool,
    /// Share one backward path (drawn from this seed) across repetitions.
    pub backward_seed: Option<u64>,

    /// Path counts of the table; defaults to 128, 512, …, 32768.
    pub table_m_values: Option<Vec<usize>>,
    /// Largest `j` of the convergence sweep.
    pub j_max: usize,
    pub sweep_basis_lower: f64,
    pub sweep_basis_upper: f64,

    pub spde_points: usize,
    pub spde_lower: f64,
    pub spde_upper: f64,
    /// Grid indices of the field; defaults to every index.
    pub spde_time_indices: Option<Vec<usize>>,
    pub spde_paths: usize,

    pub out: Option<PathBuf>,
    pub paths_csv: Option<PathBuf>,
    pub diagnostics_csv: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let m = MarketModel::default();
        Self {
            mu: m.mu,
            sigma_coef: m.sigma,
            r: m.r,
            big_r: m.big_r,
            strike: m.strike,
            x0: m.x0,
            horizon: m.horizon,
            domain_lower: 60.0,
            domain_upper: 200.0,
            basis_lower: 60.0,
            basis_upper: 200.0,
            basis_from_paths: false,
            steps: 20,
            paths: 32768,
            delta: 1.0,
            picard_iterations: 3,
            g_choice: GChoice::G1,
            g_custom: CustomNoise::default(),
            mode: SolverMode::BdsdeRandomTerminal,
            seed: 1,
            reps: 50,
            shift_enabled: true,
            backward_seed: None,
            table_m_values: None,
            j_max: 7,
            sweep_basis_lower: 40.0,
            sweep_basis_upper: 180.0,
            spde_points: 29,
            spde_lower: 60.0,
            spde_upper: 200.0,
            spde_time_indices: None,
            spde_paths: 4096,
            out: None,
            paths_csv: None,
            diagnostics_csv: None,
        }
    }
}

pub const DEFAULT_TABLE_M: [usize; 5] = [128, 512, 2048, 8192, 32768];

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn ordered(lower_name: &'static str, lower: f64, upper: f64) -> Result<()> {
    if lower.is_finite() && upper.is_finite() && lower < upper {
        Ok(())
    } else {
        Err(Error::invalid(lower_name, format!("need {lower} < {upper}")))
    }
}

/// Reads and validates a JSON config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn market(&self) -> MarketModel {
        MarketModel {
            mu: self.mu,
            sigma: self.sigma_coef,
            r: self.r,
            big_r: self.big_r,
            strike: self.strike,
            x0: self.x0,
            horizon: self.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut market = self.market();
        // reported under the config's own field name
        if !(self.sigma_coef.is_finite() && self.sigma_coef > 0.0) {
            return Err(Error::invalid("sigma_coef", "must be positive"));
        }
        market.sigma = 1.0;
        market.validate()?;
        ordered("domain_lower", self.domain_lower, self.domain_upper)?;
        ordered("basis_lower", self.basis_lower, self.basis_upper)?;
        ordered("sweep_basis_lower", self.sweep_basis_lower, self.sweep_basis_upper)?;
        ordered("spde_lower", self.spde_lower, self.spde_upper)?;
        if !(self.domain_lower < self.x0 && self.x0 < self.domain_upper) {
            return Err(Error::invalid("x0", "must lie inside the domain"));
        }
        positive("delta", self.delta)?;
        if self.steps == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("M", "must be at least 1"));
        }
        if self.reps < 2 {
            return Err(Error::invalid("reps", "need at least 2 repetitions for a standard deviation"));
        }
        if self.j_max == 0 {
            return Err(Error::invalid("j_max", "must be at least 1"));
        }
        if self.spde_points == 0 {
            return Err(Error::invalid("spde_points", "must be at least 1"));
        }
        if self.spde_paths == 0 {
            return Err(Error::invalid("spde_paths", "must be at least 1"));
        }
        if let Some(ms) = &self.table_m_values {
            if ms.is_empty() || ms.contains(&0) {
                return Err(Error::invalid("table_m_values", "need a non-empty list of positive path counts"));
            }
        }
        if let Some(ts) = &self.spde_time_indices {
            if let Some(&bad) = ts.iter().find(|&&n| n > self.steps) {
                return Err(Error::invalid("spde_time_indices", format!("index {bad} exceeds N={}", self.steps)));
            }
        }
        for (name, v) in [
            ("g_custom.z", self.g_custom.z),
            ("g_custom.y", self.g_custom.y),
            ("g_custom.log_x", self.g_custom.log_x),
            ("g_custom.t", self.g_custom.t),
            ("g_custom.constant", self.g_custom.constant),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> CoefficientSet {
        self.market().coefficients(self.g_choice, self.g_custom)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::axis_box(vec![self.domain_lower], vec![self.domain_upper])
    }

    pub fn basis(&self) -> BasisConfig {
        if self.basis_from_paths {
            BasisConfig::FromPaths { delta: self.delta }
        } else {
            BasisConfig::Fixed {
                lower: vec![self.basis_lower],
                upper: vec![self.basis_upper],
                delta: self.delta,
            }
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            picard_iterations: self.picard_iterations,
            mode: self.mode,
            shift_enabled: self.shift_enabled,
        }
    }

    pub fn table_m(&self) -> Vec<usize> {
        self.table_m_values.clone().unwrap_or_else(|| DEFAULT_TABLE_M.to_vec())
    }
}
