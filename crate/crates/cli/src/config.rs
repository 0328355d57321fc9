use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use nvmdse::isocap::Exposure;
use nvmdse::techlib::MemoryKind;

use crate::CliError;

/// Declarative description of a pipeline run. Relative paths resolve against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output: PathBuf,
    pub seed: u64,
    /// Technology coefficients; the shipped calibrated defaults when absent.
    pub tech: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub calibration_ceiling: f64,
    pub kinds: Vec<MemoryKind>,
    /// Bitcell files by kind name; kinds not listed use the builtin cell.
    pub bitcells: BTreeMap<String, PathBuf>,
    pub baseline: MemoryKind,
    /// Tuning grid for `tune`.
    pub capacities_mb: Vec<u64>,
    pub iso_capacity_mb: u64,
    pub sweep_capacities_mb: Vec<u64>,
    /// Capacities of the DRAM-reduction curve in the iso-area stage.
    pub reduction_capacities_mb: Vec<u64>,
    /// Profile CSV; the synthetic suite (seeded by `seed`) when absent.
    pub profiles: Option<PathBuf>,
    /// Optional single-network profiles over several batch sizes.
    pub batch_profiles: Option<PathBuf>,
    /// A text or binary trace, or a `.toml` generator spec with checksum.
    pub trace: Option<PathBuf>,
    pub include_dram: bool,
    pub sweep_include_dram: bool,
    pub area_slack: f64,
    pub delay_convention: Exposure,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output: PathBuf::from("out"),
            seed: 1,
            tech: None,
            anchors: None,
            calibration_ceiling: 0.15,
            kinds: MemoryKind::ALL.to_vec(),
            bitcells: BTreeMap::new(),
            baseline: MemoryKind::Sram,
            capacities_mb: vec![3],
            iso_capacity_mb: 3,
            sweep_capacities_mb: vec![1, 2, 4, 8, 16, 32],
            reduction_capacities_mb: vec![3, 4, 5, 6, 7, 8, 9, 10, 12, 16],
            profiles: None,
            batch_profiles: None,
            trace: None,
            include_dram: true,
            sweep_include_dram: false,
            area_slack: 0.025,
            delay_convention: Exposure::Measured,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        for p in [&mut self.tech, &mut self.anchors, &mut self.profiles, &mut self.batch_profiles, &mut self.trace]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for p in self.bitcells.values_mut() {
            fix(p);
        }
    }

    /// Fail-fast checks; nothing is computed before these pass.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.kinds.is_empty() {
            return usage("`kinds` must not be empty".into());
        }
        let mut seen = self.kinds.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.kinds.len() {
            return usage("`kinds` lists a kind twice".into());
        }
        if !self.kinds.contains(&self.baseline) {
            return usage(format!("baseline {} is not among the selected kinds", self.baseline));
        }
        for (name, grid) in [
            ("capacities_mb", &self.capacities_mb),
            ("sweep_capacities_mb", &self.sweep_capacities_mb),
            ("reduction_capacities_mb", &self.reduction_capacities_mb),
        ] {
            if grid.is_empty() {
                return usage(format!("`{name}` must not be empty"));
            }
            if grid.contains(&0) {
                return usage(format!("`{name}` entries must be positive"));
            }
        }
        if self.iso_capacity_mb == 0 {
            return usage("`iso_capacity_mb` must be positive".into());
        }
        if !(self.area_slack.is_finite() && self.area_slack >= 0.0) {
            return usage("`area_slack` must be finite and non-negative".into());
        }
        if !(self.calibration_ceiling.is_finite() && self.calibration_ceiling > 0.0) {
            return usage("`calibration_ceiling` must be positive".into());
        }
        for key in self.bitcells.keys() {
            let kind: MemoryKind = key.parse().map_err(|e: nvmdse::Error| CliError::Usage(e.to_string()))?;
            if !self.kinds.contains(&kind) {
                return usage(format!("bitcell given for unselected kind {kind}"));
            }
        }
        let paths = [&self.tech, &self.anchors, &self.profiles, &self.batch_profiles, &self.trace]
            .into_iter()
            .flatten()
            .chain(self.bitcells.values());
        for p in paths {
            if !p.is_file() {
                return usage(format!("file not found: {}", p.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(toml::from_str::<RunConfig>("capacity = 3").is_err());
    }

    #[test]
    fn baseline_must_be_selected() {
        let cfg: RunConfig = toml::from_str("kinds = [\"STT_MRAM\"]").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let cfg: RunConfig = toml::from_str("capacities_mb = []").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        let cfg: RunConfig = toml::from_str("anchors = \"/nonexistent/anchors.toml\"").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("file not found"));
    }
}
