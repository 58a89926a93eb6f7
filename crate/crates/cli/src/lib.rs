//! Command-line runner: reads embedding files, runs classification and
//! evaluation, and writes reports into a run directory.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use protoclass::classify::prediction_records;
use protoclass::eval::{
    crossval_2fold, eval_text_banks, fuse_sets, generate_synthetic, project_2d, sweep_fusion,
    sweep_k, sweep_prototype_samples, top1_accuracy, Column, EvalReport, FittedPipeline, ReportRow,
    SyntheticSpec,
};
use protoclass::store::{read_captions, ClassCatalog};
use protoclass::{
    build_caption_prototypes, build_text_prototypes, classify_batch, expand_templates, load_set,
    read_set, write_set, BankName, CaptionSplit, EmbeddingSet, PrototypeBank, Reference, Rule,
    TemplateBank,
};

use config::{require, Overrides, RunConfig, OUT_ENV, RESOLVED_CONFIG};

#[derive(Debug, Parser)]
#[command(
    name = "protoclass",
    version,
    about = "Prototype and k-NN classification over precomputed embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (falls back to the config, then $PROTOCLASS_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// softmax, npc or knn.
    #[arg(long, global = true, value_parser = parse_rule)]
    pub rule: Option<Rule>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub proto_samples: Option<usize>,
    #[arg(long, global = true)]
    pub pca_dim: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    /// Template bank: baseline, multiple, selected, or a JSON file.
    #[arg(long, global = true)]
    pub templates: Option<String>,
}

fn parse_rule(s: &str) -> Result<Rule, String> {
    s.parse().map_err(|e: protoclass::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    K,
    Samples,
    Fusion,
    Prompts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check EMB1 sets and caption files; with --join, check that every set
    /// pairs up with the first by sourceId.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        join: bool,
    },
    /// Classify the test split against the train split (one direction).
    Classify,
    /// Two-direction cross-validation with the configured rule.
    Eval,
    /// Parameter sweep over k, prototype sample size, fusion PCA dims or prompt banks.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
    },
    /// Write seeded synthetic train and test sets.
    Synth {
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Two-dimensional PCA projection of a set, as CSV.
    Project { input: PathBuf },
    /// Expand a template bank over a class catalog into prompts.jsonl, the
    /// input of the text encoder.
    Prompts {
        /// An EMB1 set whose catalog to use, or a text file of class names.
        #[arg(long)]
        classes: PathBuf,
    },
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            rule: self.rule,
            k: self.k,
            tau: self.tau,
            proto_samples: self.proto_samples,
            pca_dim: self.pca_dim,
            parallel: self.parallel,
            templates: self.templates.clone(),
        }
    }

    /// Config file (if any) with flags, environment and defaults applied.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let env_out = std::env::var_os(OUT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        base.resolve(&self.overrides(), env_out)
    }
}

/// Files a command wrote, plus text for standard output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Command::Validate { paths, join } = &cli.command {
        return validate(paths, *join);
    }
    let cfg = cli.common.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel.unwrap_or(0))
        .build()
        .context("starting worker threads")?;
    pool.install(|| dispatch(&cli.command, cfg))
}

fn dispatch(command: &Command, mut cfg: RunConfig) -> anyhow::Result<Outcome> {
    if let Command::Synth {
        classes,
        dim,
        per_class,
        sigma,
    } = command
    {
        let s = &mut cfg.synth;
        s.classes = classes.unwrap_or(s.classes);
        s.dim = dim.unwrap_or(s.dim);
        s.per_class = per_class.unwrap_or(s.per_class);
        s.sigma = sigma.unwrap_or(s.sigma);
    }
    let mut run = RunDir::create(&cfg)?;
    match command {
        Command::Validate { .. } => unreachable!("handled before thread setup"),
        Command::Classify => classify(&cfg, &mut run)?,
        Command::Eval => {
            let (train, test) = load_pair(&cfg)?;
            let report = crossval_2fold(&train, &test, &cfg.pipeline())?;
            run.report(&report)?;
        }
        Command::Sweep { kind } => {
            let report = sweep(&cfg, *kind)?;
            run.report(&report)?;
        }
        Command::Synth { .. } => synth(&cfg, &mut run)?,
        Command::Project { input } => {
            let set = load_set(input)?;
            let projection = project_2d(&set)?;
            let path = run.dir.join("projection.csv");
            projection.write_csv(&path)?;
            run.files.push(path);
        }
        Command::Prompts { classes } => prompts(&cfg, classes, &mut run)?,
    }
    Ok(run.finish())
}

struct RunDir {
    dir: PathBuf,
    files: Vec<PathBuf>,
    messages: Vec<String>,
}

impl RunDir {
    fn create(cfg: &RunConfig) -> anyhow::Result<Self> {
        let dir = cfg.out_dir().to_owned();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(RESOLVED_CONFIG);
        fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(Self {
            dir,
            files: vec![path],
            messages: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }

    fn report(&mut self, report: &EvalReport) -> anyhow::Result<()> {
        let mut json = serde_json::to_string_pretty(report)?;
        json.push('\n');
        self.write("report.json", json)?;
        let table = report.render_table();
        self.write("report.txt", &table)?;
        self.messages.push(table);
        for row in report.rows.iter().filter(|r| !r.is_ok()) {
            log::warn!("row {} / {} failed", row.config, row.column.label());
        }
        Ok(())
    }

    fn finish(self) -> Outcome {
        for f in &self.files {
            log::info!("wrote {}", f.display());
        }
        Outcome {
            files: self.files,
            messages: self.messages,
        }
    }
}

fn load(path: &Option<PathBuf>, field: &str) -> anyhow::Result<EmbeddingSet> {
    let p = require(path, field)?;
    let set = load_set(p)?;
    log::info!("{}: {} records, dim {}", p.display(), set.len(), set.dim());
    Ok(set)
}

fn load_pair(cfg: &RunConfig) -> anyhow::Result<(EmbeddingSet, EmbeddingSet)> {
    Ok((
        load(&cfg.inputs.train, "train")?,
        load(&cfg.inputs.test, "test")?,
    ))
}

fn validate(paths: &[PathBuf], join: bool) -> anyhow::Result<Outcome> {
    let mut out = Outcome::default();
    let mut sets: Vec<(&Path, EmbeddingSet)> = Vec::new();
    for p in paths {
        if p.extension().is_some_and(|e| e == "jsonl") {
            let c = read_captions(p)?;
            out.messages.push(format!(
                "OK {}: {} captions, split {}",
                p.display(),
                c.entries.len(),
                c.split
            ));
        } else {
            let s = read_set(p)?;
            out.messages.push(format!(
                "OK {}: {} records, dim {}, {} classes, split {}",
                p.display(),
                s.len(),
                s.dim(),
                s.catalog().len(),
                s.meta.split
            ));
            sets.push((p, s));
        }
    }
    if join {
        let Some(((first_path, first), rest)) = sets.split_first() else {
            bail!("--join needs at least one embedding set");
        };
        for (p, s) in rest {
            fuse_sets(first, s).with_context(|| {
                format!("joining {} with {}", first_path.display(), p.display())
            })?;
            out.messages.push(format!(
                "OK join {} + {}",
                first_path.display(),
                p.display()
            ));
        }
    }
    Ok(out)
}

fn classify(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    let queries = load(&cfg.inputs.test, "test")?;
    let (label, preds) = if cfg.rule == Rule::SoftmaxProto && !cfg.inputs.text.is_empty() {
        let t = &cfg.inputs.text[0];
        let bank = build_text_prototypes(&load_set(&t.path)?)?;
        let preds = classify_batch(
            &queries,
            Rule::SoftmaxProto,
            &cfg.pipeline().classifier,
            Reference::Bank(&bank),
        )?;
        (format!("{} softmax tau={}", t.name, cfg.tau), preds)
    } else {
        let gallery = load(&cfg.inputs.train, "train")?;
        let pipeline = cfg.pipeline();
        let fitted = FittedPipeline::fit(&gallery, &pipeline)?;
        (pipeline.label(), fitted.predict(&queries)?)
    };
    let mut jsonl = String::new();
    for rec in prediction_records(&queries, &preds) {
        writeln!(jsonl, "{}", serde_json::to_string(&rec)?)?;
    }
    run.write("predictions.jsonl", jsonl)?;
    let predicted: Vec<u32> = preds.iter().map(|p| p.class_id).collect();
    let acc = top1_accuracy(&predicted, &queries.class_ids())?;
    let row = ReportRow::ok(label, Column::Subset("Test".into()), acc, queries.len());
    run.report(&EvalReport::new(
        "Single-direction classification",
        vec![row],
    ))
}

fn sweep(cfg: &RunConfig, kind: SweepKind) -> anyhow::Result<EvalReport> {
    let s = &cfg.sweep;
    Ok(match kind {
        SweepKind::K => {
            let (train, test) = load_pair(cfg)?;
            sweep_k(&train, &test, &s.ks)?
        }
        SweepKind::Samples => {
            let (train, test) = load_pair(cfg)?;
            let seeds = s.seeds.as_deref().unwrap_or_default();
            sweep_prototype_samples(&train, &test, &s.sample_sizes, seeds)?
        }
        SweepKind::Fusion => {
            let (train, test) = load_pair(cfg)?;
            let train_b = load(&cfg.inputs.train_b, "train_b")?;
            let test_b = load(&cfg.inputs.test_b, "test_b")?;
            let dims: Vec<Option<usize>> = std::iter::once(None)
                .chain(s.fusion_pca_dims.iter().map(|&d| Some(d)))
                .collect();
            sweep_fusion(&train, &train_b, &test, &test_b, &dims)?
        }
        SweepKind::Prompts => {
            let (train, test) = load_pair(cfg)?;
            let banks = text_banks(cfg)?;
            if banks.is_empty() {
                bail!("the prompts sweep needs inputs.text or inputs.captions");
            }
            let refs: Vec<(String, &PrototypeBank)> =
                banks.iter().map(|(n, b)| (n.clone(), b)).collect();
            eval_text_banks(&refs, &train, &test, cfg.tau)?
        }
    })
}

fn text_banks(cfg: &RunConfig) -> anyhow::Result<Vec<(String, PrototypeBank)>> {
    let mut banks = Vec::new();
    for t in &cfg.inputs.text {
        let set = load_set(&t.path)?;
        check_bank_size(&t.name, &set);
        banks.push((t.name.clone(), build_text_prototypes(&set)?));
    }
    if !cfg.inputs.captions.is_empty() {
        let sets = cfg
            .inputs
            .captions
            .iter()
            .map(load_set)
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&EmbeddingSet> = sets.iter().collect();
        for split in [CaptionSplit::Train, CaptionSplit::Test, CaptionSplit::All] {
            match build_caption_prototypes(&refs, split) {
                Ok(bank) => banks.push((format!("captions ({split})"), bank)),
                Err(e) => log::warn!("no caption prototypes for {split}: {e}"),
            }
        }
    }
    Ok(banks)
}

/// Warns when a builtin bank's text embeddings do not hold one record per
/// template and class.
fn check_bank_size(name: &str, set: &EmbeddingSet) {
    let Ok(bank) = TemplateBank::resolve(name) else {
        return;
    };
    if bank.name() == BankName::Custom {
        return;
    }
    for (c, members) in set.indices_by_class().iter().enumerate() {
        if members.len() != bank.len() {
            log::warn!(
                "text bank {name}: class {c} has {} embeddings, the bank has {} templates",
                members.len(),
                bank.len()
            );
        }
    }
}

fn synth(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        classes: cfg.synth.classes,
        dim: cfg.synth.dim,
        per_class: cfg.synth.per_class,
        sigma: cfg.synth.sigma,
        seed: cfg.seed,
    };
    let (train, test) = generate_synthetic(&spec)?;
    for (name, set) in [("train.emb", &train), ("test.emb", &test)] {
        let path = run.dir.join(name);
        write_set(set, &path)?;
        if &read_set(&path)? != set {
            bail!("{} did not read back identically", path.display());
        }
        run.files.push(path);
    }
    Ok(())
}

fn prompts(cfg: &RunConfig, classes: &Path, run: &mut RunDir) -> anyhow::Result<()> {
    let bank = TemplateBank::resolve(&cfg.templates)?;
    let catalog = if classes.extension().is_some_and(|e| e == "emb") {
        read_set(classes)?.catalog().clone()
    } else {
        let text = fs::read_to_string(classes)
            .with_context(|| format!("reading {}", classes.display()))?;
        ClassCatalog::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))?
    };
    let mut jsonl = String::new();
    for (class_id, prompts) in expand_templates(&bank, &catalog).into_iter().enumerate() {
        for (template, prompt) in prompts.into_iter().enumerate() {
            let line = serde_json::json!({
                "classId": class_id,
                "className": catalog.name(class_id as u32),
                "template": template,
                "prompt": prompt,
            });
            writeln!(jsonl, "{line}")?;
        }
    }
    run.write("prompts.jsonl", jsonl)
}
