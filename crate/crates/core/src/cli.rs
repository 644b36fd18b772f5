//! Subcommands of the `mmp-ood` binary.
//!
//! Each command reads an optional JSON [`RunConfig`], applies flag overrides
//! (flags win), and returns an [`Outcome`] holding its stdout text and exit
//! code. Exit codes: 0 success, 1 failed check, 2 usage/config/domain error,
//! 3 I/O or file-format error.

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::encoder::{ClassTokenTable, EncoderSpec, FrozenTextEncoder};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{self, evaluate};
use crate::prototypes::{compute_image_prototypes, PrototypeSet};
use crate::rng;
use crate::scoring::{self, read_score_csv, write_score_csv, ScoreConfig, ScoreKind, ScoreRow};
use crate::store::{load_embedding_set, save_embedding_set, EmbeddingSet};
use crate::synth::{self, generate_world, verify_theorem, SynthConfig};
use crate::tuner::{self, gradcheck, Conditioning, GradcheckConfig, ParamGroup, TrainConfig, TrainedModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Token dimension of the surrogate text encoder unless configured.
pub const DEFAULT_TOKEN_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub token_dim: usize,
    /// Defaults to `token_dim`.
    pub hidden: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            token_dim: DEFAULT_TOKEN_DIM,
            hidden: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub text_protos: Option<PathBuf>,
    pub image_protos: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub mapped: Option<PathBuf>,
    pub id_scores: Option<PathBuf>,
    pub ood_scores: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

/// Everything a run needs, loadable from one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, replaces the seed of every component.
    pub seed: Option<u64>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub score: ScoreConfig,
    pub encoder: EncoderConfig,
    pub condition: Conditioning,
    pub trials: usize,
    /// Softmax temperature used by `verify-theorem`.
    pub theorem_tau: f64,
    pub gradcheck: GradcheckConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            score: ScoreConfig::default(),
            encoder: EncoderConfig::default(),
            condition: Conditioning::default(),
            trials: 20,
            theorem_tau: 1.0,
            gradcheck: GradcheckConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| Error::BadConfig(e.to_string()))?;
        if let Some(seed) = cfg.seed {
            cfg.set_seed(seed);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.train.seed = seed;
        self.gradcheck.seed = seed;
    }
}

/// Frozen encoder and class tokens for a training run, both derived from the
/// training seed.
pub fn build_encoder(
    train: &TrainConfig,
    encoder: &EncoderConfig,
    output_dim: usize,
    classes: usize,
) -> Result<(FrozenTextEncoder, ClassTokenTable)> {
    let enc = FrozenTextEncoder::new(EncoderSpec {
        seed: rng::subseed(train.seed, "encoder"),
        token_dim: encoder.token_dim,
        hidden: encoder.hidden.unwrap_or(encoder.token_dim),
        output_dim,
    })?;
    let tokens = ClassTokenTable::new(rng::subseed(train.seed, "class-tokens"), classes, encoder.token_dim);
    Ok((enc, tokens))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::BadMagic | Error::BadHeader(_) | Error::Json(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: EXIT_OK }
    }

    fn check(stdout: String, pass: bool) -> Self {
        Self {
            stdout,
            code: if pass { EXIT_OK } else { EXIT_FAIL },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mmp-ood", version, about = "OOD detection with multi-modal prototypes")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world as OODEMB1 files.
    Gen(GenArgs),
    /// Class-mean image prototypes of a labeled embedding file.
    Prototypes(PrototypesArgs),
    /// Per-record OOD scores as CSV.
    Score(ScoreArgs),
    /// FPR95, AUROC, KS and optional accuracy and gap from score CSVs.
    Eval(EvalArgs),
    /// Few-shot prompt tuning on a labeled embedding file.
    Train(TrainArgs),
    /// Monte-Carlo check that MMP separates ID from OOD at least as well as MCM.
    VerifyTheorem(VerifyArgs),
    /// Finite-difference check of the tuner gradients.
    Gradcheck(GradcheckArgs),
    /// Distance between the centroids of two embedding files.
    Gap(GapArgs),
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub ood: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SynthArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        let s = &mut cfg.synth;
        if let Some(v) = self.classes {
            s.classes = v;
        }
        if let Some(v) = self.dim {
            s.dim = v;
        }
        if let Some(v) = self.train_per_class {
            s.n_per_class_train = v;
        }
        if let Some(v) = self.test_per_class {
            s.n_per_class_test = v;
        }
        if let Some(v) = self.ood {
            s.n_ood = v;
        }
        if let Some(v) = self.noise {
            s.noise_scale = v;
        }
        if let Some(v) = self.gap {
            s.gap = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Existing output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Args)]
pub struct PrototypesArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep raw class means instead of rescaling to unit norm.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Mcm,
    Mmp,
    Gmp,
}

impl From<KindArg> for ScoreKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Mcm => ScoreKind::Mcm,
            KindArg::Mmp => ScoreKind::Mmp,
            KindArg::Gmp => ScoreKind::Gmp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    PerImage,
    TrainMean,
}

impl From<ConditionArg> for Conditioning {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::PerImage => Conditioning::PerImage,
            ConditionArg::TrainMean => Conditioning::TrainMean,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub text_protos: Option<PathBuf>,
    #[arg(long)]
    pub image_protos: Option<PathBuf>,
    /// Trained model directory; supplies text prototypes and the image map.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Row-aligned mapped image embeddings, for `gmp` without a model.
    #[arg(long)]
    pub mapped: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// What conditions the inferred prompts of a trained model.
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub id: Option<PathBuf>,
    #[arg(long)]
    pub ood: Option<PathBuf>,
    /// Required when the CSVs hold more than one score kind.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Labeled embedding file row-aligned with the ID scores, for top-1.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Two embedding files whose centroid distance is reported.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub gap: Option<Vec<PathBuf>>,
    /// Existing directory receiving eval.json and the two ECDF CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Existing directory receiving model.json, params.bin and loss_history.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub context_length: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub token_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale one block's analytic gradient by 1.01 to show the check fails.
    #[arg(long)]
    pub mutate: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Unit-normalize every vector first.
    #[arg(long)]
    pub normalize: bool,
}

fn require(path: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::MissingInput(flag.into()))
}

fn existing_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )
        .into())
    }
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_gen(cfg: &RunConfig, args: &GenArgs) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    args.synth.apply(&mut cfg);
    let out = require(args.out.clone().or(cfg.paths.out.clone()), "--out")?;
    cfg.synth.validate()?;
    existing_dir(&out)?;
    let world = generate_world(&cfg.synth)?;
    let names = synth::class_names(cfg.synth.classes);
    let files: [(&str, EmbeddingSet); 5] = [
        ("train.emb", world.train),
        ("test.emb", world.test),
        ("ood.emb", world.ood),
        ("image_prototypes.emb", world.image_prototypes.to_embedding_set(&names)?),
        ("text_prototypes.emb", world.text_prototypes.to_embedding_set(&names)?),
    ];
    let mut stdout = String::new();
    for (name, set) in &files {
        save_embedding_set(set, out.join(name))?;
        stdout.push_str(&format!("{name}: {} records, dim {}\n", set.len(), set.dim()));
    }
    fs::write(out.join("world.json"), json_line(&cfg.synth)?)?;
    Ok(Outcome::ok(stdout))
}

pub fn cmd_prototypes(cfg: &RunConfig, args: &PrototypesArgs) -> Result<Outcome> {
    let input = require(args.input.clone().or(cfg.paths.input.clone()), "--input")?;
    let out = require(args.out.clone().or(cfg.paths.out.clone()), "--out")?;
    let set = load_embedding_set(input)?;
    let protos = compute_image_prototypes(&set, !args.no_normalize)?;
    save_embedding_set(&protos.to_embedding_set(set.class_names())?, &out)?;
    Ok(Outcome::ok(format!(
        "{} prototypes, dim {}\n",
        protos.class_count(),
        protos.dim()
    )))
}

fn load_protos(path: Option<PathBuf>) -> Result<Option<PrototypeSet>> {
    path.map(|p| PrototypeSet::from_embedding_set(&load_embedding_set(p)?))
        .transpose()
}

pub fn cmd_score(cfg: &RunConfig, args: &ScoreArgs) -> Result<Outcome> {
    let p = &cfg.paths;
    let set = load_embedding_set(require(args.embeddings.clone().or(p.embeddings.clone()), "--embeddings")?)?;
    let score_cfg = ScoreConfig::new(args.tau.unwrap_or(cfg.score.tau))?;
    let condition = args.condition.map(Conditioning::from).unwrap_or(cfg.condition);
    let kind = ScoreKind::from(args.kind);

    let model = args
        .model
        .clone()
        .or(p.model.clone())
        .map(TrainedModel::load)
        .transpose()?;
    let text = load_protos(args.text_protos.clone().or(p.text_protos.clone()))?;
    let image = load_protos(args.image_protos.clone().or(p.image_protos.clone()))?;
    let mapped = args
        .mapped
        .clone()
        .or(p.mapped.clone())
        .map(load_embedding_set)
        .transpose()?;

    if model.is_none() && text.is_none() {
        return Err(Error::MissingInput("--text-protos or --model".into()));
    }
    if kind != ScoreKind::Mcm && image.is_none() {
        return Err(Error::MissingInput("--image-protos".into()));
    }
    if kind == ScoreKind::Gmp && model.is_none() && mapped.is_none() {
        return Err(Error::MissingInput("--model or --mapped".into()));
    }
    if let Some(m) = &mapped {
        if m.len() != set.len() {
            return Err(Error::LengthMismatch(set.len(), m.len()));
        }
    }

    let mut rows = Vec::with_capacity(set.len());
    for (i, rec) in set.records().iter().enumerate() {
        let x = &rec.vector;
        let inferred;
        let text_protos = match (&model, &text) {
            (Some(m), _) => {
                inferred = m.infer_prototypes(x, condition)?;
                &inferred
            }
            (None, Some(t)) => t,
            (None, None) => unreachable!("checked above"),
        };
        let score = match kind {
            ScoreKind::Mcm => scoring::mcm_score(x, text_protos, &score_cfg)?,
            ScoreKind::Mmp => scoring::mmp_score(x, text_protos, image.as_ref().expect("checked"), &score_cfg)?,
            ScoreKind::Gmp => {
                let mapped_x = match (&model, &mapped) {
                    (Some(m), _) => m.map_image(x)?,
                    (None, Some(ms)) => ms.records()[i].vector.clone(),
                    (None, None) => unreachable!("checked above"),
                };
                scoring::gmp_score(x, &mapped_x, text_protos, image.as_ref().expect("checked"), &score_cfg)?
            }
        };
        rows.push(ScoreRow {
            id: rec.id.clone(),
            score_kind: kind,
            score,
            predicted_class: scoring::predict_class(x, text_protos)?,
        });
    }

    let mut buf = Vec::new();
    write_score_csv(&rows, &mut buf)?;
    match args.out.clone().or(p.out.clone()) {
        Some(path) => {
            fs::write(path, &buf)?;
            Ok(Outcome::ok(format!("{} rows\n", rows.len())))
        }
        None => Ok(Outcome::ok(String::from_utf8(buf).expect("csv output is utf-8"))),
    }
}

fn scores_of(rows: &[ScoreRow], kind: ScoreKind) -> (Vec<f64>, Vec<usize>) {
    rows.iter()
        .filter(|r| r.score_kind == kind)
        .map(|r| (r.score, r.predicted_class))
        .unzip()
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<Outcome> {
    let p = &cfg.paths;
    let id_rows = read_score_csv(fs::File::open(require(args.id.clone().or(p.id_scores.clone()), "--id")?)?)?;
    let ood_rows = read_score_csv(fs::File::open(require(args.ood.clone().or(p.ood_scores.clone()), "--ood")?)?)?;
    let kind = match args.kind {
        Some(k) => ScoreKind::from(k),
        None => {
            let first = id_rows.first().ok_or(Error::EmptyInput)?.score_kind;
            if id_rows.iter().chain(&ood_rows).any(|r| r.score_kind != first) {
                return Err(Error::MissingInput("--kind (several score kinds present)".into()));
            }
            first
        }
    };
    let (id, preds) = scores_of(&id_rows, kind);
    let (ood, _) = scores_of(&ood_rows, kind);
    let mut report = evaluate(&id, &ood)?;

    if let Some(path) = args.labels.clone().or(p.labels.clone()) {
        let set = load_embedding_set(path)?;
        let labels = set
            .records()
            .iter()
            .map(|r| r.label.ok_or(Error::NoLabels))
            .collect::<Result<Vec<_>>>()?;
        report.top1 = Some(metrics::top1_accuracy(&preds, &labels)?);
    }
    if let Some(pair) = &args.gap {
        let a: Vec<Vec<f64>> = load_embedding_set(&pair[0])?.into_records().into_iter().map(|r| r.vector).collect();
        let b: Vec<Vec<f64>> = load_embedding_set(&pair[1])?.into_records().into_iter().map(|r| r.vector).collect();
        report.gap_norm = Some(metrics::modality_gap_norm(&a, &b)?);
    }

    let json = json_line(&report)?;
    if let Some(dir) = args.out.clone().or(p.out.clone()) {
        existing_dir(&dir)?;
        fs::write(dir.join("eval.json"), &json)?;
        metrics::ecdf_export(&id, dir.join("ecdf_id.csv"))?;
        metrics::ecdf_export(&ood, dir.join("ecdf_ood.csv"))?;
    }
    Ok(Outcome::ok(json))
}

pub fn cmd_train(cfg: &RunConfig, args: &TrainArgs) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if let Some(s) = args.seed {
        cfg.set_seed(s);
    }
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.lr {
        t.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.context_length {
        t.context_length = v;
    }
    if let Some(v) = args.momentum {
        t.momentum = v;
    }
    if let Some(v) = args.alpha {
        t.alpha = v;
    }
    if let Some(v) = args.beta {
        t.beta = v;
    }
    if let Some(v) = args.tau {
        t.tau = v;
    }
    if let Some(v) = args.token_dim {
        cfg.encoder.token_dim = v;
    }
    if let Some(v) = args.hidden {
        cfg.encoder.hidden = Some(v);
    }
    cfg.train.validate()?;
    let input = require(args.train.clone().or(cfg.paths.train.clone()), "--train")?;
    let out = require(args.out.clone().or(cfg.paths.out.clone()), "--out")?;
    existing_dir(&out)?;

    let set = load_embedding_set(input)?;
    let (encoder, tokens) = build_encoder(&cfg.train, &cfg.encoder, set.dim(), set.class_count())?;
    let (model, history) = tuner::train(&set, &encoder, &tokens, &cfg.train)?;
    model.save(&out)?;
    let mut csv_buf = Vec::new();
    tuner::write_loss_history(&history, &mut csv_buf)?;
    fs::write(out.join("loss_history.csv"), csv_buf)?;

    let mut stdout = String::new();
    for (e, l) in history.iter().enumerate() {
        stdout.push_str(&format!(
            "epoch {e}: l_id={} l_inter={} l_intra={} l_bias={} total={}\n",
            l.l_id, l.l_inter, l.l_intra, l.l_bias, l.total
        ));
    }
    Ok(Outcome::ok(stdout))
}

pub fn cmd_verify_theorem(cfg: &RunConfig, args: &VerifyArgs) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    args.synth.apply(&mut cfg);
    let trials = args.trials.unwrap_or(cfg.trials);
    let score_cfg = ScoreConfig::new(args.tau.unwrap_or(cfg.theorem_tau))?;
    let report = verify_theorem(&cfg.synth, trials, &score_cfg)?;
    let json = json_line(&report)?;
    if let Some(path) = &args.out {
        fs::write(path, &json)?;
    }
    Ok(Outcome::check(json, report.pass))
}

pub fn cmd_gradcheck(cfg: &RunConfig, args: &GradcheckArgs) -> Result<Outcome> {
    let mut gc = cfg.gradcheck;
    if let Some(s) = args.seed {
        gc.seed = s;
    }
    if let Some(name) = &args.mutate {
        gc.mutate = Some(
            ParamGroup::from_name(name).ok_or_else(|| Error::BadConfig(format!("unknown parameter group {name:?}")))?,
        );
    }
    let report = gradcheck(&gc)?;
    let json = json_line(&report)?;
    if let Some(path) = &args.out {
        fs::write(path, &json)?;
    }
    Ok(Outcome::check(json, report.pass))
}

pub fn cmd_gap(_cfg: &RunConfig, args: &GapArgs) -> Result<Outcome> {
    let read = |p: &Path| -> Result<Vec<Vec<f64>>> {
        load_embedding_set(p)?
            .into_records()
            .into_iter()
            .map(|r| {
                if args.normalize {
                    linalg::normalized(&r.vector)
                } else {
                    Ok(r.vector)
                }
            })
            .collect()
    };
    let gap = metrics::modality_gap_norm(&read(&args.a)?, &read(&args.b)?)?;
    Ok(Outcome::ok(json_line(&serde_json::json!({ "gap_norm": gap }))?))
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(&cfg, a),
        Command::Prototypes(a) => cmd_prototypes(&cfg, a),
        Command::Score(a) => cmd_score(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Train(a) => cmd_train(&cfg, a),
        Command::VerifyTheorem(a) => cmd_verify_theorem(&cfg, a),
        Command::Gradcheck(a) => cmd_gradcheck(&cfg, a),
        Command::Gap(a) => cmd_gap(&cfg, a),
    }
}

/// Parses `args`, runs the command, prints its output and returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
