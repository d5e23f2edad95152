//! Run configuration: TOML with sections for training, scene generation and
//! the network preset. Unknown keys are rejected so typos fail closed.

use anyhow::{bail, Context, Result};
use bldnet::datapipe::SceneConfig;
use bldnet::netgraph::NetworkSpec;
use bldnet::trainer::TrainConfig;
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// 32 or 64; 64 is the deterministic reference mode.
    pub precision: u32,
    pub seed: u64,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub scene: SceneSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: 64,
            seed: 0,
            network: NetworkSection::default(),
            train: TrainSection::default(),
            scene: SceneSection::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// "standard" (full-width) or "reduced".
    pub preset: String,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            preset: "standard".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            weight_decay: d.weight_decay,
            batch_size: d.batch_size,
            epochs: d.epochs,
            validation_fraction: d.validation_fraction,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub tile: usize,
    pub building_count: [usize; 2],
    pub size_range: [f64; 2],
    pub max_rotation_deg: f64,
    pub background_albedo: [f64; 2],
    pub building_albedo: [f64; 2],
    pub noise: f64,
    pub shadow_offset: [f64; 2],
    pub shadow_strength: f64,
    pub margin: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        let d = SceneConfig::default();
        SceneSection {
            tile: d.tile,
            building_count: [d.building_count.0, d.building_count.1],
            size_range: [d.size_range.0, d.size_range.1],
            max_rotation_deg: d.max_rotation_deg,
            background_albedo: [d.background_albedo.0, d.background_albedo.1],
            building_albedo: [d.building_albedo.0, d.building_albedo.1],
            noise: d.noise,
            shadow_offset: [d.shadow_offset.0, d.shadow_offset.1],
            shadow_strength: d.shadow_strength,
            margin: d.margin,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.precision != 32 && self.precision != 64 {
            bail!("precision must be 32 or 64, got {}", self.precision);
        }
        self.network_spec()?;
        Ok(())
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        match self.network.preset.as_str() {
            "standard" => Ok(NetworkSpec::standard()),
            "reduced" => Ok(NetworkSpec::reduced()),
            other => bail!("unknown network preset '{}'", other),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.seed,
            validation_fraction: self.train.validation_fraction,
        }
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            tile: self.scene.tile,
            building_count: (self.scene.building_count[0], self.scene.building_count[1]),
            size_range: (self.scene.size_range[0], self.scene.size_range[1]),
            max_rotation_deg: self.scene.max_rotation_deg,
            background_albedo: (
                self.scene.background_albedo[0],
                self.scene.background_albedo[1],
            ),
            building_albedo: (self.scene.building_albedo[0], self.scene.building_albedo[1]),
            noise: self.scene.noise,
            shadow_offset: (self.scene.shadow_offset[0], self.scene.shadow_offset[1]),
            shadow_strength: self.scene.shadow_strength,
            margin: self.scene.margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_check() {
        let config = RunConfig::default();
        config.check().unwrap();
        assert_eq!(config.precision, 64);
        assert_eq!(config.train.learning_rate, 0.02);
    }

    #[test]
    fn unknown_keys_fail_closed() {
        let with_typo = "[train]\nlearning_rte = 0.01\n";
        assert!(toml::from_str::<RunConfig>(with_typo).is_err());
        let top_level = "not_a_key = 5\n";
        assert!(toml::from_str::<RunConfig>(top_level).is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let text = "seed = 9\n[scene]\ntile = 128\nbuilding_count = [2, 4]\n";
        let config: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.scene_config().tile, 128);
        assert_eq!(config.scene_config().building_count, (2, 4));
        assert_eq!(config.train.momentum, 0.9);
    }
}
