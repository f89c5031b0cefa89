//! Config file handling: a nested TOML document with one section per
//! concern, CLI flags layered on top.

use anyhow::{bail, Context, Result};
use platoon_core::dynamics::{Mode, ScenarioConfig};
use platoon_core::gains::GainSet;
use platoon_core::stochastic::DecelDistribution;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub platoon: PlatoonSection,
    pub gains: GainsSection,
    pub topology: TopologySection,
    pub scenario: ScenarioSection,
    pub decel: DecelSection,
    pub mc: McSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatoonSection {
    pub followers: usize,
    pub initial_speed_mps: f64,
    pub standstill_m: f64,
}

impl Default for PlatoonSection {
    fn default() -> Self {
        Self {
            followers: 10,
            initial_speed_mps: 25.0,
            standstill_m: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsSection {
    pub ka: f64,
    pub kv: f64,
    pub kp: f64,
    pub headway_s: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        Self {
            ka: 0.2,
            kv: 0.92,
            kp: 0.03,
            headway_s: 0.86,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub predecessors: usize,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self { predecessors: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub mode: String,
    pub tau_s: f64,
    pub tau0_s: f64,
    pub sim_time_s: f64,
    pub step_s: f64,
    pub clamp_reverse: bool,
    pub leader_through_lag: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            mode: "coordinated".into(),
            tau_s: 0.5,
            tau0_s: 0.5,
            sim_time_s: 50.0,
            step_s: 0.01,
            clamp_reverse: true,
            leader_through_lag: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecelSection {
    /// "standin" (mildly peaked symmetric placeholder) or "uniform";
    /// ignored when explicit arrays are given.
    pub preset: String,
    pub lower_mps2: f64,
    pub upper_mps2: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values_mps2: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

impl Default for DecelSection {
    fn default() -> Self {
        Self {
            preset: "standin".into(),
            lower_mps2: 4.75,
            upper_mps2: 9.75,
            points: 11,
            values_mps2: None,
            probs: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub iterations: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d0_sweep_mps2: Option<Vec<f64>>,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            iterations: 2000,
            seed: 42,
            d0_sweep_mps2: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl FileConfig {
    /// Parses a config document. A run manifest is accepted too: its
    /// embedded `[config]` snapshot is used, so any campaign re-runs from
    /// its own manifest.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: toml::Value = toml::from_str(text).context("config is not valid TOML")?;
        let source = match doc.get("config") {
            Some(snapshot) => snapshot.clone(),
            None => doc,
        };
        let cfg: FileConfig = source
            .try_into()
            .context("config has an unknown or ill-typed key")?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn mode(&self) -> Result<Mode> {
        match self.scenario.mode.as_str() {
            "coordinated" => Ok(Mode::Coordinated),
            "uncoordinated" => Ok(Mode::Uncoordinated),
            other => bail!("scenario.mode must be \"coordinated\" or \"uncoordinated\", got {other:?}"),
        }
    }

    pub fn gain_set(&self, predecessors: usize) -> Result<GainSet> {
        GainSet::new(
            self.gains.ka,
            self.gains.kv,
            self.gains.kp,
            predecessors,
            self.gains.headway_s,
        )
        .map_err(|e| anyhow::anyhow!("gains section: {e}"))
    }

    pub fn distribution(&self) -> Result<DecelDistribution> {
        let d = &self.decel;
        match (&d.values_mps2, &d.probs) {
            (Some(values), Some(probs)) => {
                DecelDistribution::new(values.clone(), probs.clone())
                    .map_err(|e| anyhow::anyhow!("decel section: {e}"))
            }
            (None, None) => {
                let support =
                    DecelDistribution::arithmetic_support(d.lower_mps2, d.upper_mps2, d.points);
                let dist = match d.preset.as_str() {
                    "standin" => DecelDistribution::standin_bell(support),
                    "uniform" => DecelDistribution::uniform(support),
                    other => bail!("decel.preset must be \"standin\" or \"uniform\", got {other:?}"),
                };
                dist.map_err(|e| anyhow::anyhow!("decel section: {e}"))
            }
            _ => bail!("decel.values_mps2 and decel.probs must be given together"),
        }
    }

    /// Scenario for one `(predecessors, standstill)` variant. The leader
    /// deceleration is a placeholder until the campaign sweep fills it.
    pub fn scenario(&self, predecessors: usize, standstill_m: f64) -> Result<ScenarioConfig> {
        let cfg = ScenarioConfig {
            mode: self.mode()?,
            standstill_m,
            initial_speed: self.platoon.initial_speed_mps,
            gains: self.gain_set(predecessors)?,
            tau: self.scenario.tau_s,
            leader_decel: 0.0,
            followers: self.platoon.followers,
            sim_time: self.scenario.sim_time_s,
            step_size: self.scenario.step_s,
            clamp_reverse: self.scenario.clamp_reverse,
            leader_through_lag: self.scenario.leader_through_lag,
        };
        if self.scenario.tau_s > self.scenario.tau0_s {
            bail!(
                "scenario.tau_s ({}) exceeds scenario.tau0_s ({})",
                self.scenario.tau_s,
                self.scenario.tau0_s
            );
        }
        cfg.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(cfg)
    }
}
