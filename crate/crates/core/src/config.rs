//! Layered configuration: built-in defaults, then a TOML file, then
//! command-line overrides. Every override is a dotted key into the same
//! tree the file uses, so anything settable by flag is settable in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::harness::{BenchConfig, Method};
use crate::operators::{PromptBuilder, Templates, Temperatures};
use crate::provider::{CompletionProvider, Gateway, LiveConfig, LiveProvider, ScriptedProvider};
use crate::sandbox::{Sandbox, SandboxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Live,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scripted" => Ok(ProviderKind::Scripted),
            "live" => Ok(ProviderKind::Live),
            other => Err(Error::Config(format!("unknown provider {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub problems: Option<PathBuf>,
    pub problem_id: Option<String>,
    pub out: PathBuf,
    pub run_id: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            problems: None,
            problem_id: None,
            out: PathBuf::from("runs"),
            run_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub script: Option<PathBuf>,
    pub max_inflight: usize,
    pub template_dir: Option<PathBuf>,
    pub temperatures: Temperatures,
    pub live: LiveConfig,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Scripted,
            script: None,
            max_inflight: 4,
            template_dir: None,
            temperatures: Temperatures::default(),
            live: LiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub pool_size: usize,
    pub test_calls: usize,
}

impl Default for HarnessSection {
    fn default() -> Self {
        let b = BenchConfig::default();
        Self {
            methods: Method::ALL.to_vec(),
            repeats: b.repeats,
            pool_size: b.pool_size,
            test_calls: b.test_calls,
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub engine: EngineConfig,
    pub sandbox: SandboxConfig,
    pub provider: ProviderSection,
    pub harness: HarnessSection,
}

/// A single override, e.g. `("engine.seed", 7.into())`.
pub type Override = (String, toml::Value);

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| Error::Config(format!("bad key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

impl Config {
    /// Defaults < file < overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[Override]) -> Result<Self> {
        let file_table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Some(
                    text.parse::<toml::Table>()
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
                )
            }
            None => None,
        };
        Self::resolve_table(file_table, overrides)
    }

    pub fn resolve_table(file: Option<toml::Table>, overrides: &[Override]) -> Result<Self> {
        let mut table = match toml::Value::try_from(Config::default()) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("defaults serialize to a table"),
        };
        if let Some(f) = file {
            merge(&mut table, f);
        }
        for (k, v) in overrides {
            set_dotted(&mut table, k, v.clone())?;
        }
        let config: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if self.sandbox.timeout_ms == 0 || self.sandbox.memory_mb == 0 {
            return Err(Error::Config("sandbox limits must be positive".into()));
        }
        if self.harness.repeats == 0 {
            return Err(Error::Config("harness.repeats must be at least 1".into()));
        }
        if self.harness.methods.is_empty() {
            return Err(Error::Config("harness.methods is empty".into()));
        }
        Ok(())
    }

    /// The snapshot stored next to each run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Provider named by `provider.kind`, wrapped in a fresh gateway.
    pub fn build_gateway(&self) -> Result<Gateway> {
        let provider: Arc<dyn CompletionProvider> = match self.provider.kind {
            ProviderKind::Scripted => {
                let script = self
                    .provider
                    .script
                    .as_ref()
                    .ok_or_else(|| Error::Config("the scripted provider needs a script".into()))?;
                Arc::new(ScriptedProvider::load(script)?)
            }
            ProviderKind::Live => Arc::new(LiveProvider::from_env(self.provider.live.clone())?),
        };
        Ok(Gateway::new(provider, self.provider.max_inflight))
    }

    pub fn build_prompts(&self) -> Result<PromptBuilder> {
        let templates = match &self.provider.template_dir {
            Some(dir) => Templates::load(dir)?,
            None => Templates::builtin(),
        };
        Ok(PromptBuilder::new(templates, self.provider.temperatures, self.engine.tests_per_call))
    }

    pub fn build_sandbox(&self) -> Result<Sandbox> {
        Sandbox::new(self.sandbox.clone())
    }

    pub fn bench(&self, run_root: Option<PathBuf>) -> BenchConfig {
        BenchConfig {
            repeats: self.harness.repeats,
            pool_size: self.harness.pool_size,
            test_calls: self.harness.test_calls,
            seed: self.engine.seed,
            run_root,
        }
    }
}
