//! Pipeline configuration: built-in defaults, then an optional TOML file,
//! then `SKF_`-prefixed environment variables (nested keys joined by `__`,
//! e.g. `SKF_GENERATION__SEED=7`), then command-line flags.

use std::path::{Path, PathBuf};

use figment::providers::{Env, Format, Serialized, Toml};
use figment::Figment;
use serde::{Deserialize, Serialize};

use skf_core::eval::EvalConfig;
use skf_core::tasks::GenerationConfig;
use skf_core::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Spider-layout database directory: `<db_root>/<db_id>/<db_id>.sqlite`.
    pub db_root: PathBuf,
    /// Spider `tables.json`; when set it decides which databases are used.
    pub tables_json: Option<PathBuf>,
    /// Template pack file; the built-in pack when unset.
    pub templates_path: Option<PathBuf>,
    pub output_path: PathBuf,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    pub sampler: SamplerConfig,
    pub generation: GenerationConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            db_root: PathBuf::from("database"),
            tables_json: None,
            templates_path: None,
            output_path: PathBuf::from("out"),
            jobs: None,
            sampler: SamplerConfig::default(),
            generation: GenerationConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

const SECTIONS: [&str; 8] = [
    "db_root",
    "tables_json",
    "templates_path",
    "output_path",
    "jobs",
    "sampler",
    "generation",
    "eval",
];

impl PipelineConfig {
    /// Layers defaults, the file (if any) and the environment.
    pub fn load(file: Option<&Path>) -> Result<Self, String> {
        let mut fig = Figment::from(Serialized::defaults(PipelineConfig::default()));
        if let Some(path) = file {
            if !path.is_file() {
                return Err(format!("config file not found: {}", path.display()));
            }
            fig = fig.merge(Toml::file(path));
        }
        // Only keys naming a config section; other SKF_ variables are left alone.
        let env = Env::prefixed("SKF_")
            .split("__")
            .filter(|k| {
                let k = k.as_str().to_ascii_lowercase();
                SECTIONS.iter().any(|s| k == *s || k.starts_with(&format!("{s}.")))
            });
        fig.merge(env).extract().map_err(|e| e.to_string())
    }

    #[cfg(test)]
    pub fn from_toml(text: &str) -> Result<Self, String> {
        Figment::from(Serialized::defaults(PipelineConfig::default()))
            .merge(Toml::string(text))
            .extract()
            .map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.sampler.validate()?;
        self.generation.validate()?;
        self.eval.validate().map_err(|e| e.to_string())?;
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use skf_core::tasks::TaskKind;

    #[test]
    fn toml_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.tables_json = Some("spider/tables.json".into());
        cfg.jobs = Some(3);
        cfg.sampler.clusters = 7;
        cfg.generation.seed = 99;
        cfg.generation.quotas.insert(TaskKind::JoinCompatibility, 5);
        cfg.eval.timeout_secs = 2.5;
        let text = cfg.to_toml().unwrap();
        let back = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = PipelineConfig::from_toml("[sampler]\nclusters = 3\n[generation.quotas]\ntable_from_row = 4\n").unwrap();
        assert_eq!(cfg.sampler.clusters, 3);
        assert_eq!(cfg.sampler.rows_per_cluster, 2);
        assert_eq!(cfg.generation.quota(TaskKind::TableFromRow), 4);
        assert_eq!(cfg.generation.quota(TaskKind::TableFromColumns), 32);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml("[sampler]\nclustrs = 3\n").is_err());
        assert!(PipelineConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn environment_overrides_file() {
        figment::Jail::expect_with(|jail| {
            jail.create_file("skf.toml", "[generation]\nseed = 1\ndefault_quota = 9\n")?;
            jail.set_env("SKF_GENERATION__SEED", "42");
            jail.set_env("SKF_SAMPLER__CLUSTERS", "4");
            jail.set_env("SKF_SPIDER_DIR", "/elsewhere");
            let cfg = PipelineConfig::load(Some(Path::new("skf.toml"))).unwrap();
            assert_eq!(cfg.generation.seed, 42);
            assert_eq!(cfg.generation.default_quota, 9);
            assert_eq!(cfg.sampler.clusters, 4);
            Ok(())
        });
    }
}
