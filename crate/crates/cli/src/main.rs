use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use picknet::checkpoint::Checkpoint;
use picknet::config::{RunConfig, RUN_CONFIG_SCHEMA};
use picknet::glance::read_glance_file;
use picknet::harness::{
    estimate_time, evaluate_split, generate_synthetic, greedy_episodes, pick_statistics, preset, CostTable, Dataset,
    EvalOptions, PickPolicy, Split, SyntheticConfig,
};
use picknet::harness::read_feature_file;
use picknet::picknet::EpisodeRecord;
use picknet::stream::StreamCaptioner;
use picknet::training::{
    resolve_reward, train_adaptation, train_reinforcement, train_supervision, Stage, TrainStats, TrainingData,
};

const SEED_VAR: &str = "PICKNET_SEED";

/// Frame picking for video captioning.
#[derive(Parser)]
#[command(name = "picknet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (manifest plus feature and glance files).
    GenData(GenDataArgs),
    /// Run one training stage and write its checkpoint and epoch log.
    Train(TrainArgs),
    /// Score a split under one pick policy and print a JSON report.
    Eval(EvalArgs),
    /// Pick frames and caption one video.
    Caption(CaptionArgs),
    /// Replay a glance file as a live stream, printing NDJSON events.
    Stream(StreamArgs),
    /// Pick-count and pick-position histograms as CSV.
    Stats(StatsArgs),
    /// Relative running time of captioning methods.
    EstimateTime(EstimateArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    validation: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Supervision,
    Reinforce,
    Adapt,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Supervision => Stage::Supervision,
            StageArg::Reinforce => Stage::Reinforcement,
            StageArg::Adapt => Stage::Adaptation,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    stage: StageArg,
    /// Run config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint of the previous stage; defaults to the one in the output directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-epoch progress on stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Picknet,
    Random,
    Kmeans,
    All,
}

impl From<PolicyArg> for PickPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Picknet => PickPolicy::PickNet,
            PolicyArg::Random => PickPolicy::Random,
            PolicyArg::Kmeans => PickPolicy::KMeans,
            PolicyArg::All => PickPolicy::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// k-means cluster count; defaults to the mean greedy PickNet pick count.
    #[arg(long)]
    kmeans_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Include picks and captions for every video.
    #[arg(long)]
    per_video: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CaptionArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    video: String,
    #[arg(long, value_enum, default_value = "picknet")]
    policy: PolicyArg,
    #[arg(long)]
    kmeans_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Glance file (PKNG) holding the frames in arrival order.
    #[arg(long)]
    input: PathBuf,
    /// Feature file (PKNF) for the same frames; looked up next to the input when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    fps: f64,
    /// Sleep between frames to match the frame rate.
    #[arg(long)]
    realtime: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Episode traces as NDJSON (`{"video","picks","n"}` per line).
    #[arg(long, conflicts_with_all = ["checkpoint", "dataset"])]
    episodes: Option<PathBuf>,
    /// Greedy picks of this checkpoint over a dataset split instead.
    #[arg(long, requires = "dataset")]
    checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the episode traces as NDJSON.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Cost table JSON: `{"baseline_frames": f, "entries": [...]}`.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in table: msvd or msr-vtt.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Caption(a) => caption(a),
        Command::Stream(a) => stream(a),
        Command::Stats(a) => stats(a),
        Command::EstimateTime(a) => estimate(a),
    }
}

/// Flag, then `PICKNET_SEED`, then the fallback.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_VAR}={v:?} is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(fallback),
        Err(e) => Err(anyhow!("{SEED_VAR}: {e}")),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let base = SyntheticConfig::new(resolve_seed(a.seed, 0)?);
    let cfg = SyntheticConfig {
        n_train: a.train.unwrap_or(base.n_train),
        n_validation: a.validation.unwrap_or(base.n_validation),
        n_test: a.test.unwrap_or(base.n_test),
        n_frames: a.frames.unwrap_or(base.n_frames),
        feature_dim: a.feature_dim.unwrap_or(base.feature_dim),
        ..base
    };
    let ds = generate_synthetic(&cfg)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    ds.save(&a.out)?;
    eprintln!("wrote {} videos to {}", ds.videos.len(), a.out.display());
    Ok(())
}

/// Parses a run config, checking it against the published schema first.
fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
    check_schema(&value).with_context(|| format!("{} does not match the run config schema", path.display()))?;
    let mut cfg: RunConfig = serde_json::from_value(value)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.dataset, &mut cfg.out].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn check_schema(value: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(RUN_CONFIG_SCHEMA)?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| anyhow!("bad schema: {e}"))?;
    let problems: Vec<String> = validator
        .iter_errors(value)
        .map(|e| {
            let at = e.instance_path().to_string();
            if at.is_empty() {
                e.to_string()
            } else {
                format!("{at}: {e}")
            }
        })
        .collect();
    if !problems.is_empty() {
        bail!("{}", problems.join("; "));
    }
    Ok(())
}

fn stage_file(out: &Path, stage: Stage) -> PathBuf {
    out.join(format!("{}.pknc", stage.name()))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_run_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = a.dataset {
        cfg.dataset = Some(d);
    }
    if let Some(o) = a.out {
        cfg.out = Some(o);
    }
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.validate()?;
    let dataset_path = cfg.dataset()?.to_path_buf();
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let stage = Stage::from(a.stage);
    let train_cfg = cfg.train_config();

    let dataset = Dataset::load(&dataset_path)?;
    let previous = match stage {
        Stage::Supervision => None,
        Stage::Reinforcement => Some(Stage::Supervision),
        Stage::Adaptation => Some(Stage::Reinforcement),
    };
    let prior = match previous {
        None => None,
        Some(prev) => {
            let path = a.checkpoint.clone().unwrap_or_else(|| stage_file(&out, prev));
            let ck = Checkpoint::load(&path).with_context(|| format!("{} stage needs a {} checkpoint", stage.name(), prev.name()))?;
            if ck.stage != prev {
                bail!("{} is a {} checkpoint, expected {}", path.display(), ck.stage.name(), prev.name());
            }
            Some(ck)
        }
    };

    let mut data = match &prior {
        None => TrainingData::new(&dataset, cfg.model.min_freq)?,
        Some(ck) => TrainingData::with_vocab(&dataset, ck.vocab.clone())?,
    };
    data.verbose = a.verbose;

    let (checkpoint, stats): (Checkpoint, TrainStats) = match (stage, prior) {
        (Stage::Supervision, _) => {
            let init = cfg.model.init_seq2seq(dataset.feature_dim, data.vocab.len(), cfg.seed)?;
            let (seq, stats) = train_supervision(&data, init, &train_cfg)?;
            let ck = Checkpoint {
                stage,
                seq2seq: seq,
                picknet: None,
                vocab: data.vocab.clone(),
                reward: None,
                seed: cfg.seed,
            };
            (ck, stats)
        }
        (Stage::Reinforcement, Some(prior)) => {
            let reward = resolve_reward(&data, &train_cfg)?;
            let rl_cfg = picknet::training::TrainConfig { reward, ..train_cfg };
            let (pn, stats) = train_reinforcement(&data, cfg.model.init_picknet(cfg.seed), &prior.seq2seq, &rl_cfg)?;
            let ck = Checkpoint {
                stage,
                seq2seq: prior.seq2seq,
                picknet: Some(pn),
                vocab: prior.vocab,
                reward: Some(rl_cfg.reward),
                seed: cfg.seed,
            };
            (ck, stats)
        }
        (Stage::Adaptation, Some(prior)) => {
            let picknet = prior.require_picknet()?.clone();
            let reward = match prior.reward.clone() {
                Some(r) => r,
                None => resolve_reward(&data, &train_cfg)?,
            };
            let ad_cfg = picknet::training::TrainConfig { reward, ..train_cfg };
            let (pn, seq, stats) = train_adaptation(&data, picknet, prior.seq2seq, &ad_cfg)?;
            let ck = Checkpoint {
                stage,
                seq2seq: seq,
                picknet: Some(pn),
                vocab: prior.vocab,
                reward: Some(ad_cfg.reward),
                seed: cfg.seed,
            };
            (ck, stats)
        }
        _ => unreachable!("later stages always load a prior checkpoint"),
    };

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    checkpoint.save(&stage_file(&out, stage))?;
    let log = out.join(format!("{}.stats.ndjson", stage.name()));
    std::fs::write(&log, stats.to_ndjson()?).with_context(|| format!("writing {}", log.display()))?;
    let resolved = out.join("run_config.json");
    std::fs::write(&resolved, cfg.to_json()? + "\n").with_context(|| format!("writing {}", resolved.display()))?;
    eprintln!(
        "{}: best epoch {} with validation CIDEr {:.4}; wrote {}",
        stage.name(),
        stats.best_epoch,
        stats.best_val_cider,
        stage_file(&out, stage).display()
    );
    Ok(())
}

fn eval_options(policy: PolicyArg, kmeans_k: Option<usize>, seed: Option<u64>, ck: &Checkpoint) -> Result<EvalOptions> {
    Ok(EvalOptions {
        kmeans_k,
        seed: resolve_seed(seed, ck.seed)?,
        ..EvalOptions::new(policy.into())
    })
}

fn eval(a: EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let dataset = Dataset::load(&a.dataset)?;
    let opts = EvalOptions {
        per_video: a.per_video,
        ..eval_options(a.policy, a.kmeans_k, a.seed, &ck)?
    };
    let report = evaluate_split(&dataset, a.split.into(), &ck.seq2seq, &ck.vocab, ck.picknet.as_ref(), &opts)?;
    write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

/// Captions through the whole split so seeded baselines pick exactly as `eval` does.
fn caption(a: CaptionArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let dataset = Dataset::load(&a.dataset)?;
    let video = dataset.video(&a.video).ok_or_else(|| anyhow!("no video {:?} in {}", a.video, a.dataset.display()))?;
    let opts = EvalOptions {
        per_video: true,
        ..eval_options(a.policy, a.kmeans_k, a.seed, &ck)?
    };
    let report = evaluate_split(&dataset, video.record.split, &ck.seq2seq, &ck.vocab, ck.picknet.as_ref(), &opts)?;
    let result = report
        .per_video
        .into_iter()
        .flatten()
        .find(|r| r.video == a.video)
        .ok_or_else(|| anyhow!("no caption produced for {}", a.video))?;
    println!("{}", serde_json::to_string(&result)?);
    Ok(())
}

/// `glances/<id>.glance` pairs with `features/<id>.feat`; otherwise `<stem>.feat` alongside.
fn default_features(input: &Path) -> Result<PathBuf> {
    let stem = input.file_stem().ok_or_else(|| anyhow!("{} has no file name", input.display()))?;
    let mut name = PathBuf::from(stem);
    name.set_extension("feat");
    let dir = input.parent().unwrap_or(Path::new(""));
    let candidates = [dir.join("..").join("features").join(&name), dir.join(&name)];
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| anyhow!("no feature file found for {}; pass --features", input.display()))
}

fn stream(a: StreamArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let picknet = ck.require_picknet()?;
    let glances = read_glance_file(&a.input)?;
    let feature_path = match a.features {
        Some(p) => p,
        None => default_features(&a.input)?,
    };
    let features = read_feature_file(&feature_path)?;
    if features.len() != glances.len() {
        bail!(
            "{} has {} frames but {} has {}",
            a.input.display(),
            glances.len(),
            feature_path.display(),
            features.len()
        );
    }
    let mut captioner = StreamCaptioner::new(picknet, &ck.seq2seq, &ck.vocab, a.fps)?;
    let frame_gap = std::time::Duration::from_secs_f64(1.0 / a.fps);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (i, g) in glances.iter().enumerate() {
        if a.realtime && i > 0 {
            std::thread::sleep(frame_gap);
        }
        let event = captioner.push(g, || Ok(features[i].clone()))?;
        let line = serde_json::to_string(&event)? + "\n";
        match out.write_all(line.as_bytes()).and_then(|()| out.flush()) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn stats(a: StatsArgs) -> Result<()> {
    let records = match (&a.episodes, &a.checkpoint, &a.dataset) {
        (Some(p), _, _) => read_episodes(p)?,
        (None, Some(ck), Some(ds)) => {
            let ck = Checkpoint::load(ck)?;
            let dataset = Dataset::load(ds)?;
            greedy_episodes(&dataset.split(a.split.into()), ck.require_picknet()?)?
        }
        _ => bail!("pass --episodes, or --checkpoint with --dataset"),
    };
    if let Some(t) = &a.traces {
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        std::fs::write(t, text).with_context(|| format!("writing {}", t.display()))?;
    }
    let hist = pick_statistics(&records)?;
    eprintln!("{} videos, mean picks {:.3}", hist.videos, hist.mean_n_p);
    write_output(a.out.as_deref(), &hist.to_csv())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let table: CostTable = match (&a.config, &a.preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} is not a cost table", p.display()))?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("pass --config or --preset"),
    };
    let rows = estimate_time(&table.entries, table.baseline_frames)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    println!("{:<width$}  {:>8}  {:>6}", "method", "relative", "listed");
    for r in rows {
        let listed = r.listed.map_or("-".to_string(), |l| format!("{l}x"));
        println!("{:<width$}  {:>7.1}x  {:>6}", r.method, r.relative, listed);
    }
    Ok(())
}
