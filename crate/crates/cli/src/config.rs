use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lzfe_core::models::find_family;
use lzfe_core::propagator::{IntegratorConfig, LimitPolicy, StepMethod};
use lzfe_core::ModelParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Everything a run depends on. Unset fields take command-specific defaults
/// when the config is resolved; the resolved config is echoed in the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Sets g = √(γ·b); cleared once resolved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    /// Tolerance the command asserts for its exit code.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Convergence tolerance of the infinite-time limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<StepMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_matrix: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt_partner: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub via_reduction: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($field:ident),*) => {
        $(if $src.$field.is_some() { $dst.$field = $src.$field.clone(); })*
    };
}

impl RunConfig {
    /// Reads TOML, or a JSON file holding either a bare config or a result
    /// envelope (in which case its `config_echo` is used).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let bad = |msg: String| CliError::Usage(format!("config file {}: {msg}", path.display()));
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            if let Some(echo) = value.get_mut("config_echo") {
                value = echo.take();
            }
            serde_json::from_value(value).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))
        }
    }

    /// Fields set in `other` win.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(
            self,
            other,
            model,
            b,
            g,
            gamma,
            tau,
            half_width,
            tau0,
            tolerance,
            limit_tolerance,
            method,
            max_step,
            level,
            full_matrix,
            grid,
            corrupt_partner,
            gammas,
            via_reduction,
            synthetic,
            a1,
            n,
            output_format,
            output_path
        );
    }

    pub fn format(&self) -> OutputFormat {
        self.output_format.unwrap_or_default()
    }

    pub fn resolve_model(&mut self, default: &str) -> Result<(), CliError> {
        let name = self.model.get_or_insert_with(|| default.to_string());
        find_family(name)?;
        Ok(())
    }

    /// Fills b and g (from γ if given) and checks their domains.
    pub fn resolve_params(&mut self) -> Result<ModelParams, CliError> {
        let b = *self.b.get_or_insert(1.0);
        if let Some(gamma) = self.gamma.take() {
            if !(gamma >= 0.0) || !gamma.is_finite() {
                return Err(CliError::Usage(format!(
                    "--gamma must be non-negative, got {gamma}"
                )));
            }
            self.g = Some((gamma * b).sqrt());
        }
        let g = *self.g.get_or_insert(1.0);
        let tau = *self.tau.get_or_insert(1.0);
        let params = ModelParams::new(b, g).with_tau(tau);
        params.check_slope()?;
        params.check_tau()?;
        if !g.is_finite() {
            return Err(CliError::Usage(format!("--g must be finite, got {g}")));
        }
        Ok(params)
    }

    pub fn resolve_integrator(
        &mut self,
        default: IntegratorConfig,
    ) -> Result<IntegratorConfig, CliError> {
        let config = IntegratorConfig {
            method: *self.method.get_or_insert(default.method),
            max_step: *self.max_step.get_or_insert(default.max_step),
            ..default
        };
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_policy(&mut self) -> Result<LimitPolicy, CliError> {
        let integrator = self.resolve_integrator(IntegratorConfig::default())?;
        let policy = LimitPolicy {
            integrator,
            ..LimitPolicy::default().with_tolerance(*self.limit_tolerance.get_or_insert(1e-5))
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn resolve_tolerance(&mut self, default: f64) -> Result<f64, CliError> {
        let tol = *self.tolerance.get_or_insert(default);
        if tol > 0.0 && tol.is_finite() {
            Ok(tol)
        } else {
            Err(CliError::Usage(format!(
                "--tolerance must be positive, got {tol}"
            )))
        }
    }
}

/// (start, stop, step), stop inclusive.
pub type Range = (f64, f64, f64);

/// `t=-5:5:1,tau=0.5:4:0.5`.
pub fn parse_grid(spec: &str) -> Result<(Range, Range), CliError> {
    let bad = || {
        CliError::Usage(format!(
            "grid `{spec}` is not of the form t=start:stop:step,tau=start:stop:step"
        ))
    };
    let mut t = None;
    let mut tau = None;
    for part in spec.split(',') {
        let (key, range) = part.split_once('=').ok_or_else(bad)?;
        let nums: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, stop, step] = nums[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || !(stop >= start) {
            return Err(CliError::Usage(format!(
                "grid range `{part}` needs step > 0 and stop ≥ start"
            )));
        }
        match key.trim() {
            "t" => t = Some((start, stop, step)),
            "tau" => tau = Some((start, stop, step)),
            _ => return Err(bad()),
        }
    }
    Ok((t.ok_or_else(bad)?, tau.ok_or_else(bad)?))
}
