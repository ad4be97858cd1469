//! Subcommands behind the `alea` binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use alea_core::dataset::{inject_bachelors, load_openea, write_openea};
use alea_core::evaluation::{auc_at, mean_sd};
use alea_core::synth::{isomorphic_pair, SynthConfig};
use alea_core::{run_campaign, CampaignConfig, CampaignLog, Dataset, Strategy};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG: &str = "resolved-config.json";
pub const RUN_MANIFEST: &str = "run.json";
pub const LOG_FILE: &str = "log.jsonl";
pub const CURVE_FILE: &str = "curve.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
/// Upper end of the annotation-proportion axis for the summary AUC.
pub const AUC_X_MAX: f64 = 0.5;
/// Worker-thread count for the data-parallel kernels.
pub const THREADS_ENV: &str = "ALEA_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] alea_core::Error),
    #[error(transparent)]
    Service(#[from] alea_service::ApiError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
    #[error("cannot compare runs: {0}")]
    Compare(String),
    #[error("cannot start the service: {0}")]
    Startup(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.into(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "alea", version, about = "Budgeted active learning for entity alignment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulated campaign per seed and write logs, curves and a summary.
    Run(RunArgs),
    /// Turn a fraction of gold pairs into bachelors by deleting their KG2 side.
    Inject(InjectArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Serve a campaign to human annotators over HTTP.
    Serve(ServeArgs),
    /// Tabulate AUC@0.5 across run directories.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset directory in the tab-separated two-graph layout.
    #[arg(long, conflicts_with = "synth")]
    pub data: Option<PathBuf>,
    /// Use a generated dataset instead.
    #[arg(long)]
    pub synth: bool,
    #[arg(long, default_value_t = 300, requires = "synth")]
    pub synth_entities: usize,
    #[arg(long, default_value_t = 0.0, requires = "synth")]
    pub synth_bachelors: f64,
    #[arg(long, default_value_t = 0, requires = "synth")]
    pub synth_seed: u64,
}

/// Where the data of a run came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Dir(PathBuf),
    Synth(SynthConfig),
}

impl DatasetArgs {
    pub fn source(&self) -> Result<DatasetSource> {
        match (&self.data, self.synth) {
            (Some(d), _) => Ok(DatasetSource::Dir(d.clone())),
            (None, true) => Ok(DatasetSource::Synth(SynthConfig {
                entities: self.synth_entities,
                bachelor_fraction: self.synth_bachelors,
                seed: self.synth_seed,
                ..Default::default()
            })),
            (None, false) => Err(CliError::Usage("give --data DIR or --synth".into())),
        }
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DatasetSource::Dir(d) => load_openea(d)?,
            DatasetSource::Synth(cfg) => isomorphic_pair(cfg)?,
        })
    }
}

/// Campaign settings: an optional JSON file, overridden by flags.
#[derive(Debug, Clone, Default, Args)]
pub struct CampaignArgs {
    /// JSON file with campaign settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Entities that may be queried.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Structural propagation weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub pi_eps: Option<f64>,
    #[arg(long)]
    pub pi_max_iters: Option<usize>,
    /// Dropout samples for the Bayesian variants.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Recognizer ensemble size.
    #[arg(long)]
    pub recognizer_k: Option<usize>,
    /// Recognizer input and output widths, e.g. `500,400`.
    #[arg(long, value_parser = parse_dims)]
    pub recognizer_dims: Option<(usize, usize)>,
    #[arg(long)]
    pub recognizer_epochs: Option<usize>,
    /// Recognizer contrastive margin.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the negative term in the recognizer loss.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Corrupted pairs per positive in the recognizer loss.
    #[arg(long)]
    pub n_neg: Option<usize>,
    /// Alignment model embedding width.
    #[arg(long)]
    pub ea_dim: Option<usize>,
    #[arg(long)]
    pub ea_epochs: Option<usize>,
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once([',', 'x'])
        .ok_or_else(|| format!("expected IN,OUT, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

impl CampaignArgs {
    pub fn resolve(&self) -> Result<CampaignConfig> {
        let mut c = match &self.config {
            Some(p) => read_json(p)?,
            None => CampaignConfig::default(),
        };
        if let Some(v) = self.strategy {
            c.strategy = v;
        }
        if let Some(v) = self.budget {
            c.budget = v;
        }
        if let Some(v) = self.batch {
            c.batch_size = v;
        }
        if let Some(v) = self.alpha {
            c.struct_uncertainty.alpha = v;
        }
        if let Some(v) = self.pi_eps {
            c.struct_uncertainty.eps = v;
        }
        if let Some(v) = self.pi_max_iters {
            c.struct_uncertainty.max_iterations = v;
        }
        if self.mc_samples.is_some() || self.dropout.is_some() {
            let mut mc = c.mc.clone().unwrap_or_default();
            if let Some(v) = self.mc_samples {
                mc.samples = v;
            }
            if let Some(v) = self.dropout {
                mc.dropout = v;
            }
            c.mc = Some(mc);
        }
        if let Some(v) = self.recognizer_k {
            c.recognizer.folds = v;
        }
        if let Some((i, o)) = self.recognizer_dims {
            c.recognizer.input_dim = i;
            c.recognizer.output_dim = o;
        }
        if let Some(v) = self.recognizer_epochs {
            c.recognizer.epochs = v;
        }
        if let Some(v) = self.lambda {
            c.recognizer.margin = v;
        }
        if let Some(v) = self.beta {
            c.recognizer.balance = v;
        }
        if let Some(v) = self.n_neg {
            c.recognizer.negatives = v;
        }
        if let Some(v) = self.ea_dim {
            c.model.dim = v;
        }
        if let Some(v) = self.ea_epochs {
            c.model.epochs = v;
        }
        Ok(c)
    }
}

/// Distinct campaign seeds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let seeds: Vec<u64> = s
        .split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("seed {t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err("seeds must be distinct".into());
    }
    Ok(Seeds(seeds))
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Comma-separated campaign seeds, one run each.
    #[arg(long, value_parser = parse_seeds, default_value = "0")]
    pub seeds: Seeds,
    #[arg(long)]
    pub out: PathBuf,
}

/// Everything needed to repeat a `run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: DatasetSource,
    pub seeds: Vec<u64>,
    pub config: CampaignConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub auc_at_half: f64,
    pub final_hit_at_1: Option<f64>,
    pub spent: usize,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn cmd_run(args: &RunArgs, mut report: impl Write) -> Result<Vec<SeedSummary>> {
    let seeds = args.seeds.0.clone();
    let source = args.dataset.source()?;
    let data = source.load()?;
    let base = args.campaign.resolve()?;
    base.validate(data.kg1.num_entities())?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let first = CampaignConfig {
        seed: seeds[0],
        ..base.clone()
    };
    write_json(&args.out.join(RESOLVED_CONFIG), &first)?;
    write_json(
        &args.out.join(RUN_MANIFEST),
        &RunManifest {
            dataset: source,
            seeds: seeds.clone(),
            config: base.clone(),
        },
    )?;

    let mut summaries = Vec::new();
    for &seed in &seeds {
        let cfg = CampaignConfig { seed, ..base.clone() };
        tracing::info!(strategy = %cfg.strategy, seed, "campaign starts");
        let log = run_campaign(data.clone(), cfg.clone())?;
        let dir = seed_dir(&args.out, seed);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_json(&dir.join(RESOLVED_CONFIG), &cfg)?;
        let path = dir.join(LOG_FILE);
        log.write_jsonl(fs::File::create(&path).map_err(io_err(&path))?)?;
        let path = dir.join(CURVE_FILE);
        log.write_curve_csv(fs::File::create(&path).map_err(io_err(&path))?)?;
        let auc = auc_at(&log.learning_curve()?, AUC_X_MAX)?;
        summaries.push(SeedSummary {
            seed,
            auc_at_half: auc,
            final_hit_at_1: log.records.iter().rev().find_map(|r| r.hit_at_1),
            spent: log.spent(),
        });
    }

    let path = args.out.join(SUMMARY_FILE);
    let mut csv = String::from("seed,auc_at_0.5,final_hit_at_1,spent\n");
    for s in &summaries {
        let hit = s.final_hit_at_1.map(|h| h.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", s.seed, s.auc_at_half, hit, s.spent));
    }
    fs::write(&path, csv).map_err(io_err(&path))?;

    let aucs: Vec<f64> = summaries.iter().map(|s| s.auc_at_half).collect();
    let (mean, sd) = mean_sd(&aucs);
    let write = |e: std::io::Error| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    for s in &summaries {
        writeln!(report, "seed {}: AUC@0.5 {:.2}%", s.seed, 100.0 * s.auc_at_half).map_err(write)?;
    }
    writeln!(
        report,
        "{} over {} seed(s): AUC@0.5 {:.2} ± {:.2}%",
        base.strategy,
        summaries.len(),
        100.0 * mean,
        100.0 * sd
    )
    .map_err(write)?;
    Ok(summaries)
}

#[derive(Debug, Clone, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fraction of gold pairs to turn into bachelors.
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_inject(args: &InjectArgs) -> Result<usize> {
    let data = load_openea(&args.data)?;
    let (out, removed) = inject_bachelors(&data, args.fraction, args.seed)?;
    write_openea(&args.out, &out)?;
    // Reload to check the written files describe a valid dataset.
    load_openea(&args.out)?.validate()?;
    Ok(removed.len())
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    pub entities: usize,
    #[arg(long, default_value_t = 6)]
    pub relations: usize,
    #[arg(long, default_value_t = 5.0)]
    pub triples_per_entity: f64,
    /// Popularity skew of triple endpoints; 0 is uniform.
    #[arg(long, default_value_t = 0.0)]
    pub skew: f64,
    #[arg(long, default_value_t = 0.0)]
    pub bachelors: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let data = isomorphic_pair(&SynthConfig {
        entities: args.entities,
        relations: args.relations,
        triples_per_entity: args.triples_per_entity,
        skew: args.skew,
        bachelor_fraction: args.bachelors,
        seed: args.seed,
    })?;
    write_openea(&args.out, &data)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for the campaign snapshot and pending answers.
    #[arg(long)]
    pub session_dir: Option<PathBuf>,
    /// Continue from the snapshot in the session directory.
    #[arg(long, requires = "session_dir")]
    pub resume: bool,
    /// Ranked KG2 candidates shown per query.
    #[arg(long, default_value_t = 10)]
    pub candidates: usize,
}

/// Binds the port and opens the session; errors here are startup errors.
pub async fn prepare_serve(args: &ServeArgs) -> Result<(tokio::net::TcpListener, alea_service::AppState)> {
    let addr = format!("{}:{}", args.host, args.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| CliError::Startup(format!("{addr}: {e}")))?;
    let data = load_openea(&args.data).map_err(|e| CliError::Startup(e.to_string()))?;
    let mut config = args.campaign.resolve()?;
    config.seed = args.seed;
    let (kg1, kg2) = (data.kg1.clone(), data.kg2.clone());
    let session = alea_service::Session::open(data, config, args.session_dir.clone(), args.resume, args.candidates)
        .map_err(|e| CliError::Startup(e.to_string()))?;
    Ok((listener, alea_service::AppState::new(session, kg1, kg2)))
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Output directories of `run`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub seeds: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Per-seed logs of a run directory, keyed by seed.
pub fn read_run(dir: &Path) -> Result<(RunManifest, BTreeMap<u64, CampaignLog>)> {
    let manifest: RunManifest = read_json(&dir.join(RUN_MANIFEST))?;
    let mut logs = BTreeMap::new();
    for &seed in &manifest.seeds {
        let path = seed_dir(dir, seed).join(LOG_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        logs.insert(seed, CampaignLog::from_jsonl(&text)?);
    }
    Ok((manifest, logs))
}

pub fn cmd_compare(args: &CompareArgs, mut report: impl Write) -> Result<Vec<CompareRow>> {
    let mut grid: Option<(PathBuf, usize, Vec<f64>)> = None;
    let mut dataset: Option<DatasetSource> = None;
    let mut rows = Vec::new();
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    let runs: Vec<_> = args.runs.iter().map(|d| read_run(d).map(|r| (d, r))).collect::<Result<_>>()?;
    for (_, (m, _)) in &runs {
        *names.entry(m.config.strategy.name().to_string()).or_default() += 1;
    }
    for (dir, (manifest, logs)) in &runs {
        match &dataset {
            None => dataset = Some(manifest.dataset.clone()),
            Some(d) if d != &manifest.dataset => {
                return Err(CliError::Compare(format!("{} used a different dataset", dir.display())))
            }
            _ => {}
        }
        let mut aucs = Vec::new();
        for (seed, log) in logs {
            let xs: Vec<f64> = log.records.iter().map(|r| r.proportion).collect();
            let budget = manifest.config.budget;
            match &grid {
                None => grid = Some((dir.to_path_buf(), budget, xs)),
                Some((first, b, g)) => {
                    if *b != budget || g.len() != xs.len() || g.iter().zip(&xs).any(|(a, x)| (a - x).abs() > 1e-12) {
                        return Err(CliError::Compare(format!(
                            "{} seed {seed} has a different budget grid than {}",
                            dir.display(),
                            first.display()
                        )));
                    }
                }
            }
            aucs.push(auc_at(&log.learning_curve()?, AUC_X_MAX)?);
        }
        let strategy = manifest.config.strategy.name();
        let name = if names[strategy] > 1 {
            dir.display().to_string()
        } else {
            strategy.to_string()
        };
        let (mean, sd) = mean_sd(&aucs);
        rows.push(CompareRow {
            name,
            seeds: aucs.len(),
            mean,
            sd,
        });
    }
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.name.cmp(&b.name)));

    let mut csv = String::from("name,seeds,auc_mean,auc_sd\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.name, r.seeds, r.mean, r.sd));
    }
    if let Some(p) = &args.csv {
        fs::write(p, &csv).map_err(io_err(p))?;
    }
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let write = |e: std::io::Error| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    writeln!(report, "{:width$}  seeds  AUC@0.5 (%)", "strategy").map_err(write)?;
    for r in &rows {
        writeln!(
            report,
            "{:width$}  {:>5}  {:.2} ± {:.2}",
            r.name,
            r.seeds,
            100.0 * r.mean,
            100.0 * r.sd
        )
        .map_err(write)?;
    }
    Ok(rows)
}

/// Applies the worker-thread override, if set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}
