use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use cfdim_core::cantor::{CantorSchedule, GeneralSchedule};
use cfdim_core::PsiSpec;

/// Binary64 is what the mass computations actually run in.
pub const EFFECTIVE_PRECISION_BITS: u32 = 53;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleConfig {
    Cantor(CantorSchedule),
    General(GeneralSchedule),
}

impl ScheduleConfig {
    pub fn cantor(&self) -> anyhow::Result<&CantorSchedule> {
        match self {
            ScheduleConfig::Cantor(s) => Ok(s),
            ScheduleConfig::General(_) => bail!("this command needs a schedule of kind \"cantor\""),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub psi: Option<PsiSpec>,
    pub schedule: Option<ScheduleConfig>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

fn default_depth() -> usize {
    6
}
fn default_budget() -> usize {
    2_000_000
}
fn default_precision() -> u32 {
    128
}
fn default_tol() -> f64 {
    1e-10
}
fn default_margin() -> f64 {
    0.05
}

impl Default for ExperimentConfig {
    /// A small schedule that every command can run in well under a second.
    fn default() -> Self {
        ExperimentConfig {
            psi: None,
            schedule: Some(ScheduleConfig::Cantor(
                CantorSchedule::new(3, 2, cfdim_core::arith::int(1), vec![1]).expect("valid default"),
            )),
            depth: default_depth(),
            node_budget: default_budget(),
            precision_bits: default_precision(),
            tol: default_tol(),
            margin: default_margin(),
            seed: Some(0),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.depth == 0 {
            bail!("depth must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            bail!("tol must lie in (0, 1), got {}", self.tol);
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            bail!("margin must be finite and nonnegative, got {}", self.margin);
        }
        if !(24..=4096).contains(&self.precision_bits) {
            bail!("precision_bits must lie in 24..=4096, got {}", self.precision_bits);
        }
        if self.node_budget == 0 {
            bail!("node_budget must be positive");
        }
        Ok(())
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        self.seed
            .context("this command samples at random and needs a seed (config \"seed\" or --seed)")
    }

    pub fn schedule(&self) -> anyhow::Result<&ScheduleConfig> {
        self.schedule.as_ref().context("config has no \"schedule\"")
    }

    /// `Ψ(q) = q^τ` from the schedule unless the config names one.
    pub fn psi(&self) -> anyhow::Result<PsiSpec> {
        if let Some(psi) = &self.psi {
            return Ok(psi.clone());
        }
        let tau = match self.schedule()? {
            ScheduleConfig::Cantor(s) => s.tau().clone(),
            ScheduleConfig::General(s) => s.tau().clone(),
        };
        Ok(PsiSpec::power(tau))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_schedule_kinds() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"schedule":{"kind":"cantor","M":3,"L":2,"tau":"1","window_blocks":[1,1]},"seed":4}"#,
        )
        .unwrap();
        assert_eq!(c.schedule().unwrap().cantor().unwrap().windows(), &[4, 8]);
        assert_eq!(c.depth, 6);
        let g: ExperimentConfig = serde_json::from_str(
            r#"{"schedule":{"kind":"general","Q_seq":["2^40"],"delta":"3/10","epsilon":"1/10","M":3,"tau":1}}"#,
        )
        .unwrap();
        assert!(g.schedule().unwrap().cantor().is_err());
        assert!(g.seed().is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"depht":3}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"schedule":{"kind":"cantor","M":1,"L":2,"tau":"1","window_blocks":[1]}}"#
        )
        .is_err());
        let c: ExperimentConfig = serde_json::from_str(r#"{"tol":2.0}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
