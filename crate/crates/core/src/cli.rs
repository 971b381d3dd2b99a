//! The `lpg` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, missing
//! resources for a configured stage), 2 for data errors.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clustering::{
    ambiguous_words, complete_assignments, lpg_embeddings, select_k, CcrWeighting, ClusterModel,
    KMeansParams, SelectKParams,
};
use crate::corpus::{
    annotated_index, attach_translations, comment_header, format_annotated, format_corpus, read_annotated,
    read_corpus, read_instance_vectors, read_predictions, read_translations, PredictionKind,
};
use crate::embeddings::{EmbeddingProvider, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::evalstats::{
    accuracy_row, accuracy_text, accuracy_tsv, ambiguity_stats, correctness, error_breakdown, mcnemar, GlossMatch,
    Granularity,
};
use crate::lexicon::Lexicon;
use crate::model::{PosInventory, Sentence, SpecialTags};
use crate::normalize::NormProfile;
use crate::probmodel::UnigramModel;
use crate::selectors::{run_corpus, PipelineSpec, Resources};
use crate::sync::{synchronize_corpus, LemmaLevel, SyncConfig};

#[derive(Debug, Parser)]
#[command(name = "lpg", version, about = "Lemma-POS-Gloss lemmatization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize the gold lemmas of a corpus.
    Normalize(NormalizeArgs),
    /// Re-align gold annotations to the lexicon.
    Sync(SyncArgs),
    /// Train the unigram lemma/POS model.
    Train(TrainArgs),
    /// Annotate a corpus with a pipeline configuration.
    Lemmatize(LemmatizeArgs),
    /// Cluster LPG embeddings and choose k by compactness ratio.
    Cluster(ClusterArgs),
    /// Accuracy of annotated outputs against a gold corpus.
    Eval(EvalArgs),
    /// McNemar's test between two annotated outputs.
    Mcnemar(McnemarArgs),
    /// Candidate ambiguity statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct NormArgs {
    /// Also drop a shadda on a lemma-initial sun letter.
    #[arg(long)]
    sun_letter_shadda: bool,
    /// Two-column table of whole-lemma substitutions.
    #[arg(long, value_name = "PATH")]
    substitutions: Option<PathBuf>,
}

impl NormArgs {
    fn profile(&self) -> Result<NormProfile> {
        let p = NormProfile::default().with_sun_letter_shadda_removal(self.sun_letter_shadda);
        match &self.substitutions {
            Some(path) => p.load_substitutions(path),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Args)]
struct LexiconArgs {
    #[arg(long, value_name = "PATH")]
    lexicon: PathBuf,
    /// Closed POS inventory the lexicon must respect.
    #[arg(long, value_name = "PATH")]
    pos_inventory: Option<PathBuf>,
}

impl LexiconArgs {
    fn load(&self, profile: &NormProfile) -> Result<Lexicon> {
        let inventory = self.pos_inventory.as_deref().map(PosInventory::load).transpose()?;
        Lexicon::load(&self.lexicon, profile.clone(), SpecialTags::default(), inventory.as_ref())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Args)]
struct SyncArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the report as TSV here; the text report goes to stderr.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Lemma, POS and gloss weights.
    #[arg(long, value_name = "L,P,G", default_value = "1,1,1", value_parser = parse_weights)]
    weights: [f64; 3],
    /// Compare lemmas without diacritics.
    #[arg(long)]
    dediacritized: bool,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Additive smoothing constant.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Args)]
struct LemmatizeArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long, value_name = "PATH")]
    pipeline: PathBuf,
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// External predictions, repeatable: pos_topset, s2s_lemma, lexc_lpg, cluster_id.
    #[arg(long, value_name = "KIND=PATH", value_parser = parse_prediction_flag)]
    predictions: Vec<(PredictionKind, PathBuf)>,
    #[arg(long, value_name = "PATH")]
    vectors: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    translations: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    clusters: Option<PathBuf>,
    /// Give LPGs missing from the cluster model their nearest cluster by gloss.
    #[arg(long)]
    assign_unknown: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Per-token stage trace.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long, value_name = "PATH")]
    instance_vectors: PathBuf,
    /// Word vectors for tokens without an instance vector and for gloss assignment.
    #[arg(long, value_name = "PATH")]
    vectors: Option<PathBuf>,
    /// Candidate cluster counts.
    #[arg(long, value_name = "K,..", value_delimiter = ',', required = true)]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    /// CCR slack within which the smaller k wins.
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    /// Weight word types by corpus frequency in the CCR.
    #[arg(long)]
    token_weighted: bool,
    /// Assign candidate LPGs without embeddings by gloss similarity.
    #[arg(long)]
    assign_unknown: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// CCR per candidate k; defaults to stderr.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Gold corpus.
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Annotated output, repeatable, optionally as NAME=PATH.
    #[arg(long, value_name = "[NAME=]PATH", required = true)]
    pred: Vec<String>,
    /// Lexicon for the error-type breakdown.
    #[arg(long, value_name = "PATH")]
    lexicon: Option<PathBuf>,
    /// Require identical gloss sets at LPG granularity.
    #[arg(long)]
    exact_gloss: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GranularityArg {
    L,
    Lp,
    Lpg,
}

#[derive(Debug, Args)]
struct McnemarArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Exactly two annotated outputs, optionally as NAME=PATH.
    #[arg(long, value_name = "[NAME=]PATH", num_args = 1, required = true)]
    pred: Vec<String>,
    #[arg(long, value_enum, default_value = "lpg")]
    granularity: GranularityArg,
    #[arg(long)]
    exact_gloss: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    norm: NormArgs,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[command(flatten)]
    lexicon: LexiconArgs,
    /// POS top-set predictions, as pos_topset=PATH.
    #[arg(long, value_name = "KIND=PATH", value_parser = parse_prediction_flag)]
    predictions: Vec<(PredictionKind, PathBuf)>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    norm: NormArgs,
}

fn parse_prediction_flag(s: &str) -> std::result::Result<(PredictionKind, PathBuf), String> {
    let (kind, path) = s.split_once('=').ok_or_else(|| format!("expected KIND=PATH, found {s:?}"))?;
    let kind = kind.parse::<PredictionKind>().map_err(|e| e.to_string())?;
    if path.is_empty() {
        return Err("empty path".into());
    }
    Ok((kind, PathBuf::from(path)))
}

fn parse_weights(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad weight {p:?}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated weights".to_owned())
}

/// Flags naming where output goes or how many workers run; they never
/// change output content, so headers leave them out.
const UNRECORDED: [&str; 4] = ["--out", "--jobs", "--trace", "--report"];

/// Comment header: the invocation minus output-location and worker flags.
fn invocation_header(args: &[OsString]) -> Vec<String> {
    let mut kept = vec!["lpg".to_owned()];
    let mut skip_next = false;
    for a in args.iter().skip(1) {
        let a = a.to_string_lossy();
        if skip_next {
            skip_next = false;
            continue;
        }
        if UNRECORDED.contains(&a.as_ref()) {
            skip_next = true;
            continue;
        }
        if UNRECORDED.iter().any(|f| a.starts_with(&format!("{f}="))) {
            continue;
        }
        kept.push(a.into_owned());
    }
    vec![kept.join(" ")]
}

fn with_seed(mut header: Vec<String>, seed: u64) -> Vec<String> {
    header.push(format!("seed = {seed}"));
    header
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => crate::corpus::write_text(path, content),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_predictions(flags: &[(PredictionKind, PathBuf)]) -> Result<HashMap<PredictionKind, crate::corpus::PredictionFile>> {
    let mut out = HashMap::new();
    for (kind, path) in flags {
        if out.insert(*kind, read_predictions(path, *kind)?).is_some() {
            return Err(Error::Config(format!("--predictions {} given twice", kind.name())));
        }
    }
    Ok(out)
}

fn split_named(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => (name.to_owned(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map_or_else(|| spec.to_owned(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

fn normalize(args: NormalizeArgs, header: Vec<String>) -> Result<()> {
    let corpus = read_corpus(&args.corpus, &args.norm.profile()?)?;
    emit(args.out.as_deref(), &format_corpus(&corpus, &header))
}

fn sync(args: SyncArgs, header: Vec<String>) -> Result<()> {
    let profile = args.norm.profile()?;
    let corpus = read_corpus(&args.corpus, &profile)?;
    let lexicon = args.lexicon.load(&profile)?;
    let config = SyncConfig {
        weights: args.weights,
        lemma_level: if args.dediacritized {
            LemmaLevel::Dediacritized
        } else {
            LemmaLevel::Diacritized
        },
    };
    let (synced, report) = synchronize_corpus(&corpus, &lexicon, &config)?;
    emit(args.out.as_deref(), &format_corpus(&synced, &header))?;
    if let Some(path) = &args.report {
        crate::corpus::write_text(path, &(comment_header(&header) + &report.to_tsv()))?;
    }
    eprint!("{}", report.to_text());
    Ok(())
}

fn train(args: TrainArgs, header: Vec<String>) -> Result<()> {
    let corpus = read_corpus(&args.corpus, &args.norm.profile()?)?;
    let model = UnigramModel::train(&corpus, args.alpha)?;
    emit(args.out.as_deref(), &model.to_tsv(&header))
}

fn lemmatize(args: LemmatizeArgs, header: Vec<String>) -> Result<()> {
    let spec = PipelineSpec::load(&args.pipeline)?;
    let profile = args.norm.profile()?;
    let lexicon = args.lexicon.load(&profile)?;
    let mut corpus: Vec<Sentence> = read_corpus(&args.corpus, &profile)?;
    if let Some(path) = &args.translations {
        attach_translations(&mut corpus, &read_translations(path)?);
    }
    for s in &corpus {
        s.validate()?;
    }
    let model = args.model.as_deref().map(UnigramModel::load).transpose()?;
    let provider = match &args.vectors {
        Some(path) => EmbeddingProvider::load(path, args.seed)?,
        None => EmbeddingProvider::hashing(DEFAULT_DIM, args.seed)?,
    };
    let mut clusters = args.clusters.as_deref().map(ClusterModel::load).transpose()?;
    if args.assign_unknown {
        if let Some(m) = &clusters {
            let entries = lexicon.all_entries();
            clusters = Some(complete_assignments(m, entries.values(), &provider)?);
        }
    }
    let predictions = load_predictions(&args.predictions)?;
    let res = Resources {
        lexicon: &lexicon,
        model: model.as_ref(),
        provider: Some(&provider),
        clusters: clusters.as_ref(),
        predictions: &predictions,
        translations: args.translations.is_some(),
    };
    let header = with_seed(header, args.seed);
    let run = run_corpus(&spec, &corpus, &res, args.jobs)?;
    if let Some(path) = &args.trace {
        crate::corpus::write_text(path, &run.traces_tsv(&header))?;
    }
    emit(args.out.as_deref(), &format_annotated(&run.sentences, &header))
}

fn cluster(args: ClusterArgs, header: Vec<String>) -> Result<()> {
    let profile = args.norm.profile()?;
    let lexicon = args.lexicon.load(&profile)?;
    let corpus = read_corpus(&args.corpus, &profile)?;
    let instances = read_instance_vectors(&args.instance_vectors)?;
    let provider = args
        .vectors
        .as_deref()
        .map(|p| EmbeddingProvider::load(p, args.seed))
        .transpose()?;
    let points = lpg_embeddings(&corpus, &instances, provider.as_ref())?;
    let params = SelectKParams {
        kmeans: KMeansParams {
            seed: args.seed,
            max_iter: args.max_iter,
            tol: args.tol,
            n_init: args.n_init,
        },
        tolerance: args.tolerance,
        weighting: if args.token_weighted {
            CcrWeighting::Token
        } else {
            CcrWeighting::Type
        },
    };
    let completion = if args.assign_unknown {
        Some(match provider {
            Some(p) => p,
            None => EmbeddingProvider::hashing(DEFAULT_DIM, args.seed)?,
        })
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let selection = pool.install(|| select_k(&points, &args.ks, &corpus, &lexicon, &params, completion.as_ref()))?;
    let header = with_seed(header, args.seed);
    let mut report = comment_header(&header);
    report.push_str("k\tccr\tselected\n");
    for (k, ccr) in &selection.table {
        let _ = writeln!(report, "{k}\t{ccr:.6}\t{}", if *k == selection.k { "*" } else { "" });
    }
    let words = ambiguous_words(&corpus, &lexicon, params.weighting)?;
    let _ = writeln!(report, "# ambiguous word types = {}", words.len());
    match &args.report {
        Some(path) => crate::corpus::write_text(path, &report)?,
        None => eprint!("{report}"),
    }
    emit(args.out.as_deref(), &selection.model.to_tsv(&header))
}

fn eval(args: EvalArgs, header: Vec<String>) -> Result<()> {
    let profile = args.norm.profile()?;
    let gold = read_corpus(&args.corpus, &profile)?;
    let lexicon = args
        .lexicon
        .as_deref()
        .map(|p| Lexicon::load(p, profile.clone(), SpecialTags::default(), None))
        .transpose()?;
    let gloss = if args.exact_gloss {
        GlossMatch::Exact
    } else {
        GlossMatch::Intersect
    };
    let mut rows = Vec::new();
    let mut breakdowns = Vec::new();
    for spec in &args.pred {
        let (name, path) = split_named(spec);
        let preds = annotated_index(&read_annotated(&path)?);
        rows.push(accuracy_row(&name, &preds, &gold, gloss)?);
        if let Some(lex) = &lexicon {
            breakdowns.push((name, error_breakdown(&preds, &gold, lex)?));
        }
    }
    let mut out = comment_header(&header);
    out.push_str(&match args.format {
        Format::Text => accuracy_text(&rows),
        Format::Tsv => accuracy_tsv(&rows),
    });
    if !breakdowns.is_empty() {
        out.push_str("\nsystem\tdiacritization\tplausible\thallucination\n");
        for (name, counts) in breakdowns {
            let _ = writeln!(out, "{name}\t{}\t{}\t{}", counts[0].1, counts[1].1, counts[2].1);
        }
    }
    emit(args.out.as_deref(), &out)
}

fn mcnemar_cmd(args: McnemarArgs, header: Vec<String>) -> Result<()> {
    if args.pred.len() != 2 {
        return Err(Error::Config(format!("mcnemar needs exactly two --pred, got {}", args.pred.len())));
    }
    let gold = read_corpus(&args.corpus, &args.norm.profile()?)?;
    let g = match args.granularity {
        GranularityArg::L => Granularity::L,
        GranularityArg::Lp => Granularity::LP,
        GranularityArg::Lpg => Granularity::LPG,
    };
    let gloss = if args.exact_gloss {
        GlossMatch::Exact
    } else {
        GlossMatch::Intersect
    };
    let (name_a, path_a) = split_named(&args.pred[0]);
    let (name_b, path_b) = split_named(&args.pred[1]);
    let a = correctness(&annotated_index(&read_annotated(&path_a)?), &gold, g, gloss)?;
    let b = correctness(&annotated_index(&read_annotated(&path_b)?), &gold, g, gloss)?;
    let test = mcnemar(&a, &b)?;
    let mut out = comment_header(&header);
    let _ = writeln!(out, "granularity\t{}", g.name());
    let _ = writeln!(out, "tokens\t{}", a.len());
    out.push_str(&test.to_text(&name_a, &name_b));
    emit(args.out.as_deref(), &out)
}

fn stats(args: StatsArgs, header: Vec<String>) -> Result<()> {
    let profile = args.norm.profile()?;
    let lexicon = args.lexicon.load(&profile)?;
    let corpus = read_corpus(&args.corpus, &profile)?;
    let predictions = load_predictions(&args.predictions)?;
    if let Some(kind) = predictions.keys().find(|k| **k != PredictionKind::PosTopset) {
        return Err(Error::Config(format!("stats reads only pos_topset predictions, got {}", kind.name())));
    }
    let table = ambiguity_stats(&corpus, &lexicon, predictions.get(&PredictionKind::PosTopset))?;
    let mut out = comment_header(&header);
    out.push_str(&match args.format {
        Format::Text => table.to_text(),
        Format::Tsv => table.to_tsv(),
    });
    emit(args.out.as_deref(), &out)
}

/// Run the command line and return the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let header = invocation_header(&args);
    let result = match cli.command {
        Command::Normalize(a) => normalize(a, header),
        Command::Sync(a) => sync(a, header),
        Command::Train(a) => train(a, header),
        Command::Lemmatize(a) => lemmatize(a, header),
        Command::Cluster(a) => cluster(a, header),
        Command::Eval(a) => eval(a, header),
        Command::Mcnemar(a) => mcnemar_cmd(a, header),
        Command::Stats(a) => stats(a, header),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lpg: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}
