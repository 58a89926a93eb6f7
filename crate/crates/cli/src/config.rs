use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use protoclass::classify::{DEFAULT_K, DEFAULT_TAU};
use protoclass::eval::{DEFAULT_KS, DEFAULT_SAMPLE_SIZES};
use protoclass::{Metric, Rule};
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "PROTOCLASS_OUT";
pub const DEFAULT_OUT: &str = "protoclass-out";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

/// One named text-embedding file: the prompts of one template bank run
/// through a text encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextInput {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Train split image embeddings (gallery in the train -> test direction).
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Second encoder's embeddings of the same images, for fusion.
    pub train_b: Option<PathBuf>,
    pub test_b: Option<PathBuf>,
    pub text: Vec<TextInput>,
    /// Caption embedding files; their manifests carry the split tag.
    pub captions: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    /// Seeds for the sample-size sweep; five consecutive seeds from `seed`
    /// when left out.
    pub seeds: Option<Vec<u64>>,
    pub fusion_pca_dims: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            seeds: None,
            fusion_pca_dims: vec![1024, 512],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 28,
            dim: 64,
            per_class: 400,
            sigma: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub rule: Rule,
    pub tau: f64,
    pub k: usize,
    pub metric: Metric,
    pub proto_samples: Option<usize>,
    pub pca_dim: Option<usize>,
    /// Worker threads; all processors when left out. Never changes results.
    pub parallel: Option<usize>,
    /// Template bank name (`baseline`, `multiple`, `selected`) or JSON path.
    pub templates: String,
    pub inputs: Inputs,
    pub sweep: SweepConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: None,
            seed: 0,
            rule: Rule::Npc,
            tau: DEFAULT_TAU,
            k: DEFAULT_K,
            metric: Metric::Euclidean,
            proto_samples: None,
            pca_dim: None,
            parallel: None,
            templates: "baseline".into(),
            inputs: Inputs::default(),
            sweep: SweepConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub rule: Option<Rule>,
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub proto_samples: Option<usize>,
    pub pca_dim: Option<usize>,
    pub parallel: Option<usize>,
    pub templates: Option<String>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
    if let Ok(abs) = std::path::absolute(&*p) {
        *p = abs;
    }
}

impl RunConfig {
    /// Parses TOML; relative input paths are taken from the config file's
    /// directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let i = &mut cfg.inputs;
        for p in [&mut i.train, &mut i.test, &mut i.train_b, &mut i.test_b]
            .into_iter()
            .flatten()
        {
            rebase(base, p);
        }
        for t in &mut i.text {
            rebase(base, &mut t.path);
        }
        for p in &mut i.captions {
            rebase(base, p);
        }
        if let Some(out) = &mut cfg.out {
            rebase(base, out);
        }
        Ok(cfg)
    }

    /// Applies overrides and materializes every default, so the result can
    /// be written out and replayed.
    pub fn resolve(mut self, o: &Overrides, env_out: Option<PathBuf>) -> anyhow::Result<Self> {
        self.out = o
            .out
            .clone()
            .or(self.out)
            .or(env_out)
            .or_else(|| Some(PathBuf::from(DEFAULT_OUT)))
            .map(|p| std::path::absolute(&p).unwrap_or(p));
        self.seed = o.seed.unwrap_or(self.seed);
        self.rule = o.rule.unwrap_or(self.rule);
        self.k = o.k.unwrap_or(self.k);
        self.tau = o.tau.unwrap_or(self.tau);
        self.proto_samples = o.proto_samples.or(self.proto_samples);
        self.pca_dim = o.pca_dim.or(self.pca_dim);
        self.parallel = o.parallel.or(self.parallel);
        if let Some(t) = &o.templates {
            self.templates = t.clone();
        }
        if self.sweep.seeds.is_none() {
            self.sweep.seeds = Some((0..5).map(|i| self.seed.wrapping_add(i)).collect());
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            bail!("tau must be positive, got {}", self.tau);
        }
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if self.proto_samples == Some(0) {
            bail!("proto_samples must be at least 1");
        }
        if self.pca_dim == Some(0) {
            bail!("pca_dim must be at least 1");
        }
        if self.parallel == Some(0) {
            bail!("parallel must be at least 1");
        }
        if self.sweep.ks.contains(&0) {
            bail!("sweep.ks must be positive");
        }
        if self.sweep.sample_sizes.contains(&0) {
            bail!("sweep.sample_sizes must be positive");
        }
        if self.sweep.seeds.as_ref().is_some_and(Vec::is_empty) {
            bail!("sweep.seeds must not be empty");
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn pipeline(&self) -> protoclass::eval::PipelineConfig {
        protoclass::eval::PipelineConfig {
            rule: self.rule,
            classifier: protoclass::ClassifierConfig {
                tau: self.tau,
                k: self.k,
                metric: self.metric,
            },
            proto_samples: self.proto_samples,
            seed: self.seed,
            pca_dim: self.pca_dim,
        }
    }
}

/// The input path for `field`, which must be set and exist.
pub fn require<'a>(path: &'a Option<PathBuf>, field: &str) -> anyhow::Result<&'a Path> {
    let p = path
        .as_deref()
        .with_context(|| format!("config needs inputs.{field}"))?;
    if !p.exists() {
        bail!("inputs.{field}: {} does not exist", p.display());
    }
    Ok(p)
}
