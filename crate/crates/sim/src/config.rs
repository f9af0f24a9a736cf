use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use d2dprice::TopologyConfig;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Per-iteration power trajectories of the best-response iteration.
    Convergence,
    /// Revenue, interference and powers versus a uniform price.
    UniformSweep,
    /// Number of transmitting users versus a uniform price.
    ActiveUsersVsPrice,
    /// Pricing schemes compared over peak power (dB) at fixed threshold.
    CompareSnr,
    /// Pricing schemes compared over the interference threshold at fixed peak power.
    CompareIth,
}

impl ScenarioKind {
    /// Sweep used when the config omits one.
    pub fn default_sweep(self) -> Option<Sweep> {
        match self {
            Self::Convergence => None,
            // Price sweeps are expressed as fractions of the upper price bound.
            Self::UniformSweep | Self::ActiveUsersVsPrice => Some(Sweep {
                from: 0.0,
                to: 1.05,
                points: 211,
            }),
            Self::CompareSnr => Some(Sweep {
                from: 0.0,
                to: 30.0,
                points: 7,
            }),
            Self::CompareIth => Some(Sweep {
                from: 0.01,
                to: 0.1,
                points: 10,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Sweep {
    /// Equally spaced values from `from` to `to` inclusive, rounded to 12
    /// significant digits so decimal grids come out as written.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let x = (self.from * (last - k as f64) + self.to * k as f64) / last;
                format!("{x:.11e}").parse().expect("formatted float parses")
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub topology: TopologyConfig,
    /// Monte Carlo trials; see [`ScenarioConfig::trials`] for the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    /// Convergence scenario price as a fraction of the upper price bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_fraction: Option<f64>,
    pub output_path: String,
}

pub const DEFAULT_PRICE_FRACTION: f64 = 0.1;
pub const FULL_TRIALS: usize = 1000;

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configured trial count, or [`FULL_TRIALS`] for the comparison
    /// scenarios and a single run otherwise.
    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.scenario {
            ScenarioKind::CompareSnr | ScenarioKind::CompareIth => FULL_TRIALS,
            _ => 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.trials == Some(0) {
            return Err(SimError::Config("trials must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            if !(s.from.is_finite() && s.to.is_finite() && s.from < s.to) {
                return Err(SimError::Config(format!(
                    "sweep.from ({}) must be below sweep.to ({})",
                    s.from, s.to
                )));
            }
            if s.points < 2 {
                return Err(SimError::Config("sweep.points must be at least 2".into()));
            }
            if matches!(
                self.scenario,
                ScenarioKind::UniformSweep
                    | ScenarioKind::ActiveUsersVsPrice
                    | ScenarioKind::CompareIth
            ) && s.from < 0.0
            {
                return Err(SimError::Config(
                    "sweep values must be nonnegative for this scenario".into(),
                ));
            }
            if self.scenario == ScenarioKind::CompareIth && s.from <= 0.0 {
                return Err(SimError::Config(
                    "interference thresholds must be positive".into(),
                ));
            }
        }
        if let Some(f) = self.price_fraction {
            if !(f.is_finite() && f >= 0.0) {
                return Err(SimError::Config(format!(
                    "price_fraction must be nonnegative, got {f}"
                )));
            }
        }
        if self.output_path.trim().is_empty() {
            return Err(SimError::Config("output_path must not be empty".into()));
        }
        Ok(())
    }

    pub fn sweep_or_default(&self) -> Option<Sweep> {
        self.sweep.or_else(|| self.scenario.default_sweep())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// Shipped configurations reproducing each simulation figure at desk scale.
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "fig3",
        "best-response convergence, 4 users, price = upper bound / 10",
        include_str!("../presets/fig3.json"),
    ),
    (
        "fig4",
        "uniform price sweep: revenue, powers, interference",
        include_str!("../presets/fig4.json"),
    ),
    (
        "fig5",
        "best-response convergence, 100 users",
        include_str!("../presets/fig5.json"),
    ),
    (
        "fig6",
        "active transmitters versus uniform price, 100 users",
        include_str!("../presets/fig6.json"),
    ),
    (
        "fig7",
        "scheme comparison versus SNR, I_th = 0.05",
        include_str!("../presets/fig7.json"),
    ),
    (
        "fig8",
        "scheme comparison versus I_th, peak power 20 dB",
        include_str!("../presets/fig8.json"),
    ),
];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, _, text) = PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| SimError::Config(format!("unknown preset `{name}`")))?;
    ScenarioConfig::from_json(text)
}
