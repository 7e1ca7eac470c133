//! Command-line front end. Each subcommand runs one pipeline stage, reads
//! its inputs from files, writes its artifact plus `<out>.manifest.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::artifact::{file_fingerprint, Checkpoint, RunManifest};
use crate::attribution::{attribute_dataset, AttributionMatrix};
use crate::config::ConfigBundle;
use crate::data::{load_csv, save_csv, FeatureSchema, MultiDomainDataset};
use crate::error::{Error, Result};
use crate::memory::{count_flops, Kernel, MemoryModel};
use crate::nn::BaseDnn;
use crate::sensitivity::{all_distributions, rank_features, write_distribution_csv, Selection, SensitivityReport};
use crate::train::{
    evaluate, memory_config, run_ablation_study, run_selection_study, split_data, train_base, train_memory,
    EvalReport, Flags, StudyReport, BASE_KIND, MEMORY_KIND,
};

#[derive(Debug, Parser)]
#[command(name = "dsfm", version, about = "Domain-sensitive feature ranking and feature-memory CTR models")]
pub struct Cli {
    /// TOML config document; missing sections take defaults.
    #[arg(long, global = true, env = "DSFM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Run seed; overrides `seed` in the config.
    #[arg(long, global = true, env = "DSFM_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "DSFM_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Override the number of training epochs.
    #[arg(long, global = true, env = "DSFM_EPOCHS")]
    pub epochs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic multi-domain dataset and its schema.
    GenData(GenDataArgs),
    /// Train the shared base DNN.
    TrainBase(TrainBaseArgs),
    /// Integrated-gradients scores for every training sample.
    Attribute(AttributeArgs),
    /// Rank features by domain sensitivity.
    Rank(RankArgs),
    /// Train the feature-memory model on the selected features.
    TrainMemory(TrainMemoryArgs),
    /// Overall and per-domain AUC of a checkpoint on the test split.
    Evaluate(EvaluateArgs),
    /// Compare the baseline with top-k, last-k and all-feature selections.
    StudySelection(StudyArgs),
    /// Compare the full memory model with its single-component ablations.
    StudyAblation(StudyArgs),
    /// Forward FLOPs of the memory model.
    Flops(FlopsArgs),
    /// Effect-weighted per-domain distributions, one CSV per feature.
    ExportDists(ExportArgs),
}

#[derive(Debug, Args)]
pub struct DataArg {
    /// Dataset CSV; its schema is read from `<stem>.schema.toml` next to it.
    #[arg(long, default_value = "data.csv")]
    pub data: PathBuf,
    /// Explicit schema path.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct TopKArgs {
    /// Features kept among scalar categorical features.
    #[arg(long)]
    pub top_k_categorical: Option<usize>,
    /// Features kept among sequential categorical features.
    #[arg(long)]
    pub top_k_sequential: Option<usize>,
    /// Features kept among scalar numerical features.
    #[arg(long)]
    pub top_k_numerical: Option<usize>,
    /// Features kept among sequential numerical features.
    #[arg(long)]
    pub top_k_numerical_sequential: Option<usize>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct MemoryArgs {
    /// Attention kernel: linear or softmax.
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// Drop the embedding-level retriever.
    #[arg(long)]
    pub no_emb_attn: bool,
    /// Drop the hidden-layer retrievers.
    #[arg(long)]
    pub no_hidden_attn: bool,
    /// Drop the extractor logit from the output.
    #[arg(long)]
    pub no_aux_logit: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
    /// Override the number of samples.
    #[arg(long)]
    pub num_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainBaseArgs {
    #[command(flatten)]
    pub data: DataArg,
    #[arg(long, default_value = "base.ckpt.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub data: DataArg,
    /// Base model checkpoint.
    #[arg(long, default_value = "base.ckpt.json")]
    pub checkpoint: PathBuf,
    /// Riemann steps of the path integral.
    #[arg(long)]
    pub ig_steps: Option<usize>,
    #[arg(long, default_value = "attribution.bin")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArg,
    /// Attribution matrix written by `attribute`.
    #[arg(long, default_value = "attribution.bin")]
    pub attribution: PathBuf,
    #[command(flatten)]
    pub top_k: TopKArgs,
    #[arg(long, default_value = "sensitivity.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainMemoryArgs {
    #[command(flatten)]
    pub data: DataArg,
    /// Sensitivity report written by `rank`.
    #[arg(long, default_value = "sensitivity.json")]
    pub sensitivity: PathBuf,
    #[command(flatten)]
    pub memory: MemoryArgs,
    #[arg(long, default_value = "memory.ckpt.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArg,
    /// Base or memory checkpoint; the kind is read from the file.
    #[arg(long, default_value = "memory.ckpt.json")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "eval.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Dataset CSV; without it each seed draws its own synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[command(flatten)]
    pub top_k: TopKArgs,
    #[command(flatten)]
    pub memory: MemoryArgs,
    /// Riemann steps of the path integral.
    #[arg(long)]
    pub ig_steps: Option<usize>,
    /// Comma-separated study seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, default_value = "study.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    /// Schema whose features feed the model; defaults to the synthetic one.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Sensitivity report fixing the memory features.
    #[arg(long)]
    pub sensitivity: Option<PathBuf>,
    #[command(flatten)]
    pub memory: MemoryArgs,
    #[arg(long, default_value = "flops.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArg,
    #[arg(long, default_value = "attribution.bin")]
    pub attribution: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "dists")]
    pub out: PathBuf,
}

/// Parses argv and runs it; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            2
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn load_bundle(cli: &Cli) -> Result<ConfigBundle> {
    let mut bundle = match &cli.config {
        Some(p) => ConfigBundle::load(p)?,
        None => ConfigBundle::default(),
    };
    if let Some(s) = cli.seed {
        bundle.seed = s;
    }
    if let Some(e) = cli.epochs {
        bundle.train.epochs = e;
    }
    Ok(bundle)
}

fn finish(bundle: &ConfigBundle, mut manifest: RunManifest, started: Instant, outputs: &[PathBuf], out: &Path) -> Result<()> {
    for o in outputs {
        manifest.output(o)?;
    }
    manifest.config = bundle.to_json();
    manifest.duration_secs = started.elapsed().as_secs_f64();
    let path = manifest_path(out);
    manifest.save(&path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// `<out>.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `<stem>.schema.toml` beside the data file.
pub fn schema_path_for(data: &Path) -> PathBuf {
    data.with_extension("schema.toml")
}

fn require(path: &Path, what: &str, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            msg: format!("{what} not found; run `{hint}` first"),
        })
    }
}

fn load_data(data: &Path, schema: Option<&Path>, manifest: &mut RunManifest) -> Result<MultiDomainDataset> {
    let schema_path = schema.map_or_else(|| schema_path_for(data), Path::to_path_buf);
    require(data, "dataset", "gen-data")?;
    require(&schema_path, "schema", "gen-data")?;
    let schema = FeatureSchema::load(&schema_path)?;
    let ds = load_csv(data, &schema)?;
    manifest.input("data", file_fingerprint(data)?);
    manifest.input("schema", ds.schema.fingerprint());
    Ok(ds)
}

fn apply_top_k(bundle: &mut ConfigBundle, t: &TopKArgs) -> Result<()> {
    let k = &mut bundle.rank.top_k;
    if let Some(v) = t.top_k_categorical {
        k.categorical_scalar = v;
    }
    if let Some(v) = t.top_k_sequential {
        k.categorical_sequential = v;
    }
    if let Some(v) = t.top_k_numerical {
        k.numerical_scalar = v;
    }
    if let Some(v) = t.top_k_numerical_sequential {
        k.numerical_sequential = v;
    }
    bundle.validate()
}

fn apply_memory(bundle: &mut ConfigBundle, m: &MemoryArgs) {
    if let Some(k) = m.kernel {
        bundle.memory.kernel = k;
    }
    bundle.memory.use_emb_attn &= !m.no_emb_attn;
    bundle.memory.use_hidden_attn &= !m.no_hidden_attn;
    bundle.memory.use_aux_logit &= !m.no_aux_logit;
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

#[derive(Deserialize)]
struct CheckpointHeader {
    kind: String,
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut bundle = load_bundle(cli)?;
    let started = Instant::now();
    let name = subcommand_name(&cli.command);
    let mut manifest = RunManifest::new(name, bundle.seed, serde_json::Value::Null);
    let seed = bundle.seed;

    match &cli.command {
        Command::GenData(a) => {
            if let Some(n) = a.num_samples {
                bundle.synthetic.num_samples = n;
            }
            let ds = crate::train::synthetic_for_seed(&bundle, seed)?;
            let schema_path = schema_path_for(&a.out);
            save_csv(&ds, &a.out)?;
            ds.schema.save(&schema_path)?;
            eprintln!(
                "{} samples, {} features, domain counts {:?}",
                ds.len(),
                ds.schema.num_features(),
                ds.domain_counts()
            );
            finish(&bundle, manifest, started, &[a.out.clone(), schema_path], &a.out)
        }
        Command::TrainBase(a) => {
            let ds = load_data(&a.data.data, a.data.schema.as_deref(), &mut manifest)?;
            let (train, valid, _) = split_data(&bundle, &ds, seed)?;
            let (model, history) = train_base(&bundle, &train, &valid, seed)?;
            eprintln!("best epoch {} valid auc {:?}", history.best_epoch, history.valid_auc);
            let hp = serde_json::json!({ "base": bundle.base, "train": bundle.train, "history": history });
            Checkpoint::new(BASE_KIND, &ds.schema.fingerprint(), hp, model).save(&a.out)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::Attribute(a) => {
            if let Some(t) = a.ig_steps {
                bundle.ig.steps = t;
            }
            bundle.validate()?;
            let ds = load_data(&a.data.data, a.data.schema.as_deref(), &mut manifest)?;
            require(&a.checkpoint, "base checkpoint", "train-base")?;
            let ckpt: Checkpoint<BaseDnn> = Checkpoint::load(&a.checkpoint, BASE_KIND, &ds.schema.fingerprint())?;
            manifest.input("checkpoint", ckpt.model_fingerprint.clone());
            let (train, _, _) = split_data(&bundle, &ds, seed)?;
            let attrib = attribute_dataset(&ckpt.model, &train, &bundle.ig)?;
            attrib.save(&a.out)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::Rank(a) => {
            apply_top_k(&mut bundle, &a.top_k)?;
            let ds = load_data(&a.data.data, a.data.schema.as_deref(), &mut manifest)?;
            let (train, _, _) = split_data(&bundle, &ds, seed)?;
            let attrib = load_attribution(&a.attribution, &train)?;
            manifest.input("attribution", file_fingerprint(&a.attribution)?);
            let report = rank_features(&train, &attrib, &bundle.rank)?;
            stdout(&report.render_table());
            report.save(&a.out)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::TrainMemory(a) => {
            apply_memory(&mut bundle, &a.memory);
            let ds = load_data(&a.data.data, a.data.schema.as_deref(), &mut manifest)?;
            require(&a.sensitivity, "sensitivity report", "rank")?;
            let report = SensitivityReport::load(&a.sensitivity)?;
            manifest.input("sensitivity", file_fingerprint(&a.sensitivity)?);
            let (train, valid, _) = split_data(&bundle, &ds, seed)?;
            if report.dataset_fingerprint != train.fingerprint() {
                return Err(Error::Compatibility(format!(
                    "{} was ranked on a different training split (expected dataset {})",
                    a.sensitivity.display(),
                    train.fingerprint()
                )));
            }
            let sensitive = report.selected();
            if sensitive.is_empty() {
                return Err(Error::Config("the sensitivity report selects no feature".into()));
            }
            eprintln!("memory features: {}", sensitive.join(", "));
            let cfg = memory_config(&bundle, sensitive, Flags::of(&bundle.memory));
            let (model, history) = train_memory(&bundle, &train, &valid, cfg, seed)?;
            eprintln!("best epoch {} valid auc {:?}", history.best_epoch, history.valid_auc);
            let hp = serde_json::json!({ "memory": model.config, "train": bundle.train, "history": history });
            Checkpoint::new(MEMORY_KIND, &ds.schema.fingerprint(), hp, model).save(&a.out)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::Evaluate(a) => {
            let ds = load_data(&a.data.data, a.data.schema.as_deref(), &mut manifest)?;
            require(&a.checkpoint, "checkpoint", "train-base` or `train-memory")?;
            let (_, _, test) = split_data(&bundle, &ds, seed)?;
            let report = evaluate_checkpoint(&a.checkpoint, &test, &mut manifest)?;
            let names: Vec<String> = (0..ds.num_domains()).map(|k| ds.schema.domain_label(k)).collect();
            stdout(&report.render_table(&names));
            stdout(&format!("{}\n", serde_json::to_string_pretty(&report)?));
            write_json(&a.out, &report)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::StudySelection(a) | Command::StudyAblation(a) => {
            apply_top_k(&mut bundle, &a.top_k)?;
            apply_memory(&mut bundle, &a.memory);
            if let Some(t) = a.ig_steps {
                bundle.ig.steps = t;
            }
            if let Some(s) = &a.seeds {
                bundle.study.seeds = s.clone();
            }
            bundle.validate()?;
            let data = match &a.data {
                Some(p) => Some(load_data(p, a.schema.as_deref(), &mut manifest)?),
                None => None,
            };
            let report: StudyReport = if matches!(cli.command, Command::StudySelection(_)) {
                run_selection_study(&bundle, data.as_ref(), &[Selection::TopK, Selection::LastK, Selection::All])?
            } else {
                run_ablation_study(&bundle, data.as_ref())?
            };
            stdout(&report.render_table());
            write_json(&a.out, &report)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::Flops(a) => {
            apply_memory(&mut bundle, &a.memory);
            let num_features = match &a.schema {
                Some(p) => FeatureSchema::load(p)?.num_features(),
                None => bundle.synthetic.features.len() + usize::from(bundle.synthetic.include_domain_feature),
            };
            let sensitive = match &a.sensitivity {
                Some(p) => SensitivityReport::load(p)?.selected(),
                None if !bundle.memory.sensitive.is_empty() => bundle.memory.sensitive.clone(),
                None => (0..bundle.rank.top_k.total()).map(|i| format!("feature_{i}")).collect(),
            };
            let cfg = memory_config(&bundle, sensitive, Flags::of(&bundle.memory));
            let report = count_flops(&cfg, num_features);
            stdout(&report.render_table());
            stdout(&format!("{}\n", serde_json::to_string_pretty(&report)?));
            write_json(&a.out, &report)?;
            finish(&bundle, manifest, started, &[a.out.clone()], &a.out)
        }
        Command::ExportDists(a) => {
            let ds = load_data(&a.data.data, a.data.schema.as_deref(), &mut manifest)?;
            let (train, _, _) = split_data(&bundle, &ds, seed)?;
            let attrib = load_attribution(&a.attribution, &train)?;
            manifest.input("attribution", file_fingerprint(&a.attribution)?);
            let dists = all_distributions(&train, &attrib, bundle.rank.weight_mode)?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let mut outputs = Vec::new();
            for (j, per_domain) in dists.iter().enumerate() {
                let path = a.out.join(format!("{}.csv", train.schema.features[j].name));
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_distribution_csv(&train, j, per_domain, file)?;
                outputs.push(path);
            }
            eprintln!("wrote {} distribution files to {}", outputs.len(), a.out.display());
            finish(&bundle, manifest, started, &outputs, &a.out)
        }
    }
}

fn load_attribution(path: &Path, train: &MultiDomainDataset) -> Result<AttributionMatrix> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            msg: format!(
                "attribution file not found; run `attribute` first (expected dataset {})",
                train.fingerprint()
            ),
        });
    }
    let attrib = AttributionMatrix::load(path)?;
    attrib.check_dataset(train)?;
    Ok(attrib)
}

fn evaluate_checkpoint(path: &Path, test: &MultiDomainDataset, manifest: &mut RunManifest) -> Result<EvalReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let header: CheckpointHeader = serde_json::from_reader(std::io::BufReader::new(file))?;
    let schema_fp = test.schema.fingerprint();
    match header.kind.as_str() {
        k if k == BASE_KIND => {
            let c: Checkpoint<BaseDnn> = Checkpoint::load(path, BASE_KIND, &schema_fp)?;
            manifest.input("checkpoint", c.model_fingerprint.clone());
            evaluate(&c.model, test)
        }
        k if k == MEMORY_KIND => {
            let c: Checkpoint<MemoryModel> = Checkpoint::load(path, MEMORY_KIND, &schema_fp)?;
            manifest.input("checkpoint", c.model_fingerprint.clone());
            evaluate(&c.model, test)
        }
        other => Err(Error::Compatibility(format!("unknown checkpoint kind `{other}`"))),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::GenData(_) => "gen-data",
        Command::TrainBase(_) => "train-base",
        Command::Attribute(_) => "attribute",
        Command::Rank(_) => "rank",
        Command::TrainMemory(_) => "train-memory",
        Command::Evaluate(_) => "evaluate",
        Command::StudySelection(_) => "study-selection",
        Command::StudyAblation(_) => "study-ablation",
        Command::Flops(_) => "flops",
        Command::ExportDists(_) => "export-dists",
    }
}
