//! Run configuration files. Precedence: command-line flag, then file, then
//! built-in default. Relative paths in a file are relative to that file.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use simready_core::metrics::{DEFAULT_F_SCORE_TAU, DEFAULT_IOU_RESOLUTION};
use simready_core::{ScenarioSpec, SimConfig};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsOptions {
    /// F-score distance threshold in normalized units.
    pub tau: f64,
    pub iou_resolution: usize,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            tau: DEFAULT_F_SCORE_TAU,
            iou_resolution: DEFAULT_IOU_RESOLUTION,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    pub sim: SimConfig,
    pub metrics: MetricsOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.asset, &mut cfg.output, &mut cfg.frames_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config is TOML-representable")
    }

    pub fn check_paths(&self) -> Result<()> {
        if let Some(a) = &self.asset {
            if !a.is_file() {
                bail!("asset file {} does not exist", a.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "asset = \"chair.sra\"\noutput = \"/abs/out.trj\"\n[scenario]\ntype = \"tilt\"\nangle = 0.3\n[sim]\nresolution = 40\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.asset.unwrap(), dir.path().join("chair.sra"));
        assert_eq!(cfg.output.unwrap(), PathBuf::from("/abs/out.trj"));
        assert_eq!(cfg.scenario, Some(ScenarioSpec::Tilt { angle: 0.3 }));
        assert_eq!(cfg.sim.resolution, 40);
        assert_eq!(cfg.sim.fps, SimConfig::default().fps);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "assset = \"x\"\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig {
            asset: Some("a.sra".into()),
            scenario: Some(ScenarioSpec::default_throw()),
            ..Default::default()
        };
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
