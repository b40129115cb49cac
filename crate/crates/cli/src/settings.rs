//! Command-line flags, optionally backed by a JSON config file. A flag given
//! on the command line always wins over the same key in the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use vizrefine::agent::{EndpointConfig, WeightVector, PRESET_NAMES};
use vizrefine::dr::{BackendCommand, BackendRegistry, DrConfig, Method};
use vizrefine::orchestrator::ScoreMode;
use vizrefine::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Mock,
    Llm,
}

/// Dataset and embedding flags shared by `run` and `evaluate`.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column holding class labels [default: label].
    #[arg(long)]
    pub label_col: Option<String>,
    /// tsne, pca or external:NAME [default: tsne].
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial hyperparameter, repeatable: --param perplexity=5.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// External backend, repeatable: --backend umap="python -m bridge".
    #[arg(long = "backend", value_name = "NAME=COMMAND")]
    pub backends: Vec<String>,
    /// JSON file supplying any of these flags by their long names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Score driving selection and convergence [default: implicit].
    #[arg(long)]
    pub mode: Option<String>,
    /// [default: mock]
    #[arg(long, value_enum)]
    pub agent: Option<AgentKind>,
    /// Preset name or path to a JSON weight file [default: gpt-5.2].
    #[arg(long)]
    pub weights: Option<String>,
    /// [default: 10]
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Output directory [default: vizrefine-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Chat-completion base URL for the LLM agent.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Environment variable holding the agent credential [default: OPENAI_API_KEY].
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Send the scatter plot with each prompt.
    #[arg(long)]
    pub attach_plot: Option<bool>,
}

/// Config file contents: any flag by its long name, underscores for dashes.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    data: Option<PathBuf>,
    label_col: Option<String>,
    method: Option<String>,
    seed: Option<u64>,
    params: Vec<String>,
    backends: Vec<String>,
    mode: Option<String>,
    agent: Option<AgentKind>,
    weights: Option<String>,
    max_iter: Option<usize>,
    epsilon: Option<f64>,
    out: Option<PathBuf>,
    base_url: Option<String>,
    model: Option<String>,
    temperature: Option<f64>,
    api_key_env: Option<String>,
    attach_plot: Option<bool>,
}

impl FileConfig {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

impl DataArgs {
    fn merge(self, file: &FileConfig) -> Self {
        Self {
            data: self.data.or_else(|| file.data.clone()),
            label_col: self.label_col.or_else(|| file.label_col.clone()),
            method: self.method.or_else(|| file.method.clone()),
            seed: self.seed.or(file.seed),
            params: [file.params.clone(), self.params].concat(),
            backends: [file.backends.clone(), self.backends].concat(),
            config: self.config,
        }
    }

    pub fn resolved(self) -> Result<Self> {
        match self.config.clone() {
            Some(path) => Ok(self.merge(&FileConfig::read(&path)?)),
            None => Ok(self),
        }
    }

    pub fn load(&self) -> Result<(DataMatrix, String)> {
        let path = self
            .data
            .as_ref()
            .context("no dataset given (--data or `data` in the config file)")?;
        let label_col = self.label_col.as_deref().unwrap_or("label");
        let data = DataMatrix::read_csv(path, label_col)
            .with_context(|| format!("cannot load {}", path.display()))?;
        let name = path
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
        Ok((data, name))
    }

    /// Method defaults fitted to the dataset, then the requested overrides.
    pub fn initial_config(&self, data: &DataMatrix) -> Result<DrConfig> {
        let method: Method = self.method.as_deref().unwrap_or("tsne").parse()?;
        let mut config = DrConfig::for_method(method, data.rows(), data.cols());
        for w in config.clamp_all() {
            log::warn!("baseline adjusted for this dataset: {w}");
        }
        if let Some(seed) = self.seed {
            config.set_param_str("seed", &seed.to_string())?;
        }
        for kv in &self.params {
            let (key, value) = kv
                .split_once('=')
                .with_context(|| format!("--param `{kv}` is not KEY=VALUE"))?;
            let key = key.trim();
            if !config.is_known_param(key) {
                bail!("`{key}` is not a parameter of {}", config.method);
            }
            if let Some(w) = config.set_param_str(key, value)? {
                log::warn!("{w}");
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn registry(&self) -> Result<BackendRegistry> {
        let mut registry = BackendRegistry::default();
        for spec in &self.backends {
            let (name, command) = spec
                .split_once('=')
                .with_context(|| format!("--backend `{spec}` is not NAME=COMMAND"))?;
            let command = BackendCommand::parse(command)
                .with_context(|| format!("--backend `{spec}` has no command"))?;
            registry.register(name.trim(), command);
        }
        Ok(registry)
    }
}

impl RunArgs {
    fn merge(self, file: FileConfig) -> Self {
        Self {
            data: self.data.merge(&file),
            mode: self.mode.or(file.mode),
            agent: self.agent.or(file.agent),
            weights: self.weights.or(file.weights),
            max_iter: self.max_iter.or(file.max_iter),
            epsilon: self.epsilon.or(file.epsilon),
            out: self.out.or(file.out),
            base_url: self.base_url.or(file.base_url),
            model: self.model.or(file.model),
            temperature: self.temperature.or(file.temperature),
            api_key_env: self.api_key_env.or(file.api_key_env),
            attach_plot: self.attach_plot.or(file.attach_plot),
        }
    }

    pub fn resolved(self) -> Result<Self> {
        match self.data.config.clone() {
            Some(path) => Ok(self.merge(FileConfig::read(&path)?)),
            None => Ok(self),
        }
    }

    pub fn mode(&self) -> Result<ScoreMode> {
        Ok(self.mode.as_deref().unwrap_or("implicit").parse()?)
    }

    pub fn weights(&self) -> Result<WeightVector> {
        let spec = self.weights.as_deref().unwrap_or("gpt-5.2");
        if let Some(w) = WeightVector::preset(spec) {
            return Ok(w);
        }
        let path = Path::new(spec);
        if !path.exists() {
            bail!(
                "--weights `{spec}` is neither a preset ({}) nor a file",
                PRESET_NAMES.join(", ")
            );
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {spec}"))?;
        WeightVector::from_json(&text).with_context(|| format!("invalid weights in {spec}"))
    }

    pub fn endpoint(&self) -> EndpointConfig {
        let mut e = EndpointConfig::default();
        if let Some(v) = &self.base_url {
            e.base_url = v.clone();
        }
        if let Some(v) = &self.model {
            e.model = v.clone();
        }
        if let Some(v) = self.temperature {
            e.temperature = v;
        }
        if let Some(v) = &self.api_key_env {
            e.api_key_env = v.clone();
        }
        e.attach_plot = self.attach_plot.unwrap_or(false);
        e
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("vizrefine-out"))
    }
}
