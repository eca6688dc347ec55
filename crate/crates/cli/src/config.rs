//! TOML configuration shared by all subcommands. Flags override config
//! values; everything has a default, so no config file is required.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use ecc_core::control::{make_code_vocab, CodeVocabulary};
use ecc_core::metrics::MatchMode;
use ecc_core::ner::Gazetteer;
use ecc_core::wikigen::TargetProfile;

pub const CONFIG_ENV_VAR: &str = "ECC_CONFIG";
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub k: Option<usize>,
    pub matching_mode: Option<String>,
    pub fixed_cuts: Option<Vec<f64>>,
    pub gazetteer_path: Option<PathBuf>,
    pub abbreviations_path: Option<PathBuf>,
    #[serde(default)]
    pub codes: CodesConfig,
    #[serde(default, rename = "profile")]
    pub profiles: Vec<ProfileConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodesConfig {
    /// Overrides the generated faithfulness code tokens; must have
    /// exactly k entries, lowest bin first, each an `FF-*` name.
    pub faithfulness: Option<Vec<String>>,
    /// Target names registered in the vocabulary (token `<T-{name}>`).
    #[serde(default)]
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub name: String,
    pub summary_sents: usize,
    pub doc_sents: usize,
    pub abstractiveness: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub max_pairs: Option<usize>,
}

fn default_tolerance() -> f64 {
    0.05
}

impl From<ProfileConfig> for TargetProfile {
    fn from(config: ProfileConfig) -> TargetProfile {
        TargetProfile {
            name: config.name,
            summary_sents: config.summary_sents,
            doc_sents: config.doc_sents,
            abstractiveness: config.abstractiveness,
            tolerance: config.tolerance,
            max_pairs: config.max_pairs,
        }
    }
}

impl Config {
    /// Loads from `--config`, then the `ECC_CONFIG` env var, then falls
    /// back to defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Config> {
        let path = match explicit {
            Some(path) => Some(path.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from),
        };
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let contents = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Config = toml::from_str(&contents)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn k(&self, flag: Option<usize>) -> usize {
        flag.or(self.k).unwrap_or(DEFAULT_K)
    }

    pub fn matching_mode(&self, flag: Option<MatchMode>) -> Result<MatchMode> {
        if let Some(mode) = flag {
            return Ok(mode);
        }
        match &self.matching_mode {
            Some(raw) => Ok(raw.parse()?),
            None => Ok(MatchMode::default()),
        }
    }

    pub fn fixed_cuts(&self, flag: Option<&[f64]>) -> Option<Vec<f64>> {
        flag.map(<[f64]>::to_vec).or_else(|| self.fixed_cuts.clone())
    }

    pub fn gazetteer(&self, flag: Option<&Path>) -> Result<Option<Gazetteer>> {
        let path = flag.or(self.gazetteer_path.as_deref());
        path.map(|p| Gazetteer::from_path(p).map_err(Into::into))
            .transpose()
    }

    pub fn profiles(&self) -> Vec<TargetProfile> {
        self.profiles.iter().cloned().map(Into::into).collect()
    }

    /// Builds the active code vocabulary for k bins: configured
    /// faithfulness overrides (or the generated names), plus target
    /// names from the config, the profiles, and the caller.
    pub fn vocabulary(&self, k: usize, extra_target_names: &[String]) -> Result<CodeVocabulary> {
        let mut names: Vec<String> = self.codes.targets.clone();
        names.extend(self.profiles.iter().map(|p| p.name.clone()));
        names.extend(extra_target_names.iter().cloned());
        names.sort();
        names.dedup();

        match &self.codes.faithfulness {
            Some(overrides) => {
                if overrides.len() != k {
                    bail!(
                        "codes.faithfulness lists {} tokens but k = {k}",
                        overrides.len()
                    );
                }
                let target_tokens: Vec<String> =
                    names.iter().map(|n| format!("<T-{n}>")).collect();
                Ok(CodeVocabulary::new(overrides, &target_tokens)?)
            }
            None => Ok(make_code_vocab(k, &names)?),
        }
    }

    /// Installs a configured abbreviation list, if any. Must run before
    /// any sentence splitting.
    pub fn install_abbreviations(&self) -> Result<()> {
        if let Some(path) = &self.abbreviations_path {
            ecc_core::Abbreviations::from_path(path)?.install()?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfilesFile {
    #[serde(default, rename = "profile")]
    profiles: Vec<ProfileConfig>,
}

/// Reads `[[profile]]` entries from a standalone TOML file.
pub fn load_profiles(path: &Path) -> Result<Vec<TargetProfile>> {
    let contents = std::fs::read_to_string(path)
        .with_context(|| format!("reading profiles {}", path.display()))?;
    let file: ProfilesFile = toml::from_str(&contents)
        .with_context(|| format!("parsing profiles {}", path.display()))?;
    Ok(file.profiles.into_iter().map(Into::into).collect())
}
