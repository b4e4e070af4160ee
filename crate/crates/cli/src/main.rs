//! Pipeline driver: reformat a corpus, train embeddings, extract
//! markables, split a dataset, fit classifiers and compare them.
//!
//! Every stage reads and writes plain files, so each one can be re-run
//! in isolation, and all randomness flows from explicit `--seed` flags.

mod config;
mod repr;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mcembed_core::clf::{fit, ClassWeights, FitConfig, LinearModel};
use mcembed_core::coref::{
    build_dataset, extract_examples, parse_conll_file, read_markables_tsv, write_markables_tsv,
    AnimacyLabel, ConllConfig, SplitConfig,
};
use mcembed_core::corpus::{build_vocab, reformat_corpus, tokenize_line, GapConfig, Token};
use mcembed_core::embed::{directed_pairs, train, EmbeddingStore, SaveFilter, TrainConfig};
use mcembed_core::eval::{compare_systems, gen_synthetic, SynthConfig};
use mcembed_core::feats::{enclosing_word_vocab, OovPolicy};

use config::Settings;
use repr::{Repr, Resources};

#[derive(Parser)]
#[command(
    name = "mcembed",
    version,
    about = "Minimal-context embeddings and markable animacy classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a one-sentence-per-line corpus as two-token pair lines.
    Reformat(ReformatArgs),
    /// Train minimal-context embeddings on a pair corpus.
    TrainMc(TrainArgs),
    /// Train word embeddings on the original corpus.
    TrainWords(TrainArgs),
    /// Extract labeled markables from coreference-annotated files.
    Extract(ExtractArgs),
    /// Split markables into train and balanced test sets.
    Dataset(DatasetArgs),
    /// Fit a linear classifier on one representation.
    Fit(FitArgs),
    /// Evaluate and compare fitted systems on a test set.
    Eval(EvalArgs),
    /// Generate the synthetic benchmark corpus and gold splits.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ReformatArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Pair corpus for train-mc, plain corpus for train-words.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Embedding file to write.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    min_lr: Option<f64>,
    #[arg(long)]
    unigram_power: Option<f64>,
    #[arg(long)]
    table_size: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// For train-mc: keep the word rows instead of saving only the
    /// encoded minimal contexts.
    #[arg(long)]
    keep_words: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// A coreference-annotated file, or a directory to walk.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Markables TSV to write.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    word_col: Option<usize>,
    /// Default: the last column.
    #[arg(long)]
    coref_col: Option<usize>,
    /// Filename suffix selecting files when --input is a directory.
    #[arg(long)]
    ext: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Markables TSV from `extract`.
    #[arg(long)]
    markables: Option<PathBuf>,
    /// Trained MC embedding file; examples without an embedded context
    /// are dropped before splitting.
    #[arg(long)]
    mc_embeddings: Option<PathBuf>,
    #[arg(long)]
    train_out: Option<PathBuf>,
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Training markables TSV.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, value_enum)]
    repr: Option<Repr>,
    /// Embedding file (mc and concat representations).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the enclosing-word vocabulary (bow); defaults to
    /// the model path plus ".vocab".
    #[arg(long)]
    bow_vocab_out: Option<PathBuf>,
    #[arg(long, value_enum)]
    oov: Option<CliOov>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c_animate: Option<f64>,
    #[arg(long)]
    c_inanimate: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Test markables TSV.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Repeatable system spec: NAME,REPR,MODEL,RESOURCE where RESOURCE
    /// is the embedding file (mc, concat) or the vocabulary file (bow).
    #[arg(long = "system")]
    systems: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    oov: Option<CliOov>,
    /// Machine-readable report location.
    #[arg(long)]
    tsv_out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    animate_mcs: Option<usize>,
    #[arg(long)]
    inanimate_mcs: Option<usize>,
    #[arg(long)]
    neutral_mcs: Option<usize>,
    #[arg(long)]
    nouns_per_class: Option<usize>,
    #[arg(long)]
    sentences: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    test_mcs_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum CliOov {
    Zero,
    Strict,
}

impl std::str::FromStr for CliOov {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(CliOov::Zero),
            "strict" => Ok(CliOov::Strict),
            other => Err(format!("unknown oov policy {other:?}")),
        }
    }
}

impl From<CliOov> for OovPolicy {
    fn from(v: CliOov) -> Self {
        match v {
            CliOov::Zero => OovPolicy::Zero,
            CliOov::Strict => OovPolicy::Strict,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reformat(args) => cmd_reformat(args),
        Command::TrainMc(args) => cmd_train(args, TrainMode::Mc),
        Command::TrainWords(args) => cmd_train(args, TrainMode::Words),
        Command::Extract(args) => cmd_extract(args),
        Command::Dataset(args) => cmd_dataset(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    if let Err(err) = result {
        eprintln!("mcembed: {err:#}");
        std::process::exit(1);
    }
}

fn cmd_reformat(args: ReformatArgs) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let input: PathBuf = cfg.resolve_required(args.input, "input")?;
    let output: PathBuf = cfg.resolve_required(args.output, "output")?;
    let k_min = cfg.resolve(args.k_min, "k-min", 2)?;
    let k_max = cfg.resolve(args.k_max, "k-max", k_min)?;
    let gaps = GapConfig::new(k_min, k_max)?;
    let pairs = reformat_corpus(&input, &output, &gaps)?;
    println!("wrote {pairs} pairs to {}", output.display());
    Ok(())
}

enum TrainMode {
    Mc,
    Words,
}

fn cmd_train(args: TrainArgs, mode: TrainMode) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let input: PathBuf = cfg.resolve_required(args.input, "input")?;
    let output: PathBuf = cfg.resolve_required(args.output, "output")?;
    let min_count = cfg.resolve(args.min_count, "min-count", 5)?;
    let defaults = TrainConfig::default();
    let initial_lr = cfg.resolve(args.lr, "lr", defaults.initial_lr)?;
    let train_config = TrainConfig {
        dim: cfg.resolve(args.dim, "dim", defaults.dim)?,
        epochs: cfg.resolve(args.epochs, "epochs", defaults.epochs)?,
        negatives: cfg.resolve(args.negatives, "negatives", defaults.negatives)?,
        initial_lr,
        min_lr: cfg.resolve(args.min_lr, "min-lr", initial_lr * 1e-4)?,
        seed: cfg.resolve(args.seed, "seed", defaults.seed)?,
        unigram_power: cfg.resolve(args.unigram_power, "unigram-power", defaults.unigram_power)?,
        table_size: cfg.resolve(args.table_size, "table-size", defaults.table_size)?,
        window: cfg.resolve(args.window, "window", defaults.window)?,
        workers: cfg.resolve(args.workers, "workers", defaults.workers)?,
    };

    let sentences: Vec<Vec<Token>> = match mode {
        TrainMode::Mc => mcembed_core::corpus::read_pair_corpus(&input)?
            .into_iter()
            .map(|(mc, word)| vec![mc, word])
            .collect(),
        TrainMode::Words => read_sentences(&input)?,
    };
    let vocab = build_vocab(sentences.iter().flatten().cloned(), min_count);
    let pairs = directed_pairs(sentences, &vocab, train_config.window);
    let (store, report) = train(vocab, &pairs, &train_config)?;

    let filter = match mode {
        TrainMode::Mc if !args.keep_words => SaveFilter::EncodedMcOnly,
        _ => SaveFilter::All,
    };
    let rows = store.save(&output, filter)?;
    println!(
        "trained dim {} on {} directed pairs for {} epochs (mean loss {:.4} -> {:.4}); wrote {} rows to {}",
        store.dim(),
        report.pairs,
        train_config.epochs,
        report.epoch_mean_loss.first().unwrap_or(&f64::NAN),
        report.epoch_mean_loss.last().unwrap_or(&f64::NAN),
        rows,
        output.display()
    );
    Ok(())
}

fn read_sentences(path: &Path) -> Result<Vec<Vec<Token>>> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut sentences = Vec::new();
    for line in reader.lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        let sentence = tokenize_line(&line);
        if !sentence.is_empty() {
            sentences.push(sentence);
        }
    }
    Ok(sentences)
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let input: PathBuf = cfg.resolve_required(args.input, "input")?;
    let output: PathBuf = cfg.resolve_required(args.output, "output")?;
    let conll_config = ConllConfig {
        word_col: cfg.resolve(args.word_col, "word-col", ConllConfig::default().word_col)?,
        coref_col: cfg.resolve_optional(args.coref_col, "coref-col")?,
    };
    let ext: String = cfg.resolve(args.ext, "ext", "conll".to_owned())?;

    let mut files = Vec::new();
    if input.is_dir() {
        for entry in walkdir::WalkDir::new(&input).sort_by_file_name() {
            let entry = entry.with_context(|| format!("walking {}", input.display()))?;
            if entry.file_type().is_file()
                && entry.file_name().to_string_lossy().ends_with(&ext)
            {
                files.push(entry.into_path());
            }
        }
        if files.is_empty() {
            bail!("no *{ext} files under {}", input.display());
        }
    } else {
        files.push(input.clone());
    }

    let mut documents = Vec::new();
    for file in &files {
        documents.extend(parse_conll_file(file, &conll_config)?);
    }
    let examples = extract_examples(&documents);
    write_markables_tsv(&output, &examples)?;
    println!(
        "extracted {} examples from {} documents ({} files) to {}",
        examples.len(),
        documents.len(),
        files.len(),
        output.display()
    );
    Ok(())
}

fn cmd_dataset(args: DatasetArgs) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let markables: PathBuf = cfg.resolve_required(args.markables, "markables")?;
    let mc_embeddings: PathBuf = cfg.resolve_required(args.mc_embeddings, "mc-embeddings")?;
    let train_out: PathBuf = cfg.resolve_required(args.train_out, "train-out")?;
    let test_out: PathBuf = cfg.resolve_required(args.test_out, "test-out")?;
    let split = SplitConfig {
        test_per_class: cfg.resolve_required(args.test_per_class, "test-per-class")?,
        seed: cfg.resolve(args.seed, "seed", 1)?,
    };

    let examples = read_markables_tsv(&markables)?;
    let store = EmbeddingStore::load(&mc_embeddings)?;
    let (train_set, test_set) = build_dataset(examples, store.vocab(), &split)?;
    write_markables_tsv(&train_out, &train_set)?;
    write_markables_tsv(&test_out, &test_set)?;
    println!(
        "dataset: {} train, {} test ({} per class)",
        train_set.len(),
        test_set.len(),
        split.test_per_class
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let train_path: PathBuf = cfg.resolve_required(args.train, "train")?;
    let repr = match args.repr {
        Some(r) => r,
        None => Repr::parse_name(&cfg.resolve_required(None::<String>, "repr")?)?,
    };
    let model_out: PathBuf = cfg.resolve_required(args.model_out, "model-out")?;
    let oov: OovPolicy = cfg.resolve(args.oov, "oov", CliOov::Zero)?.into();

    let examples = read_markables_tsv(&train_path)?;
    if examples.is_empty() {
        bail!("{}: no training examples", train_path.display());
    }

    let resources = match repr {
        Repr::Mc | Repr::Concat => {
            let embeddings: PathBuf = cfg.resolve_required(args.embeddings, "embeddings")?;
            Resources::load(repr, &embeddings, oov)?
        }
        Repr::Bow => {
            let vocab = enclosing_word_vocab(&examples);
            let vocab_out = match cfg.resolve_optional(args.bow_vocab_out, "bow-vocab-out")? {
                Some(path) => path,
                None => PathBuf::from(format!("{}.vocab", model_out.display())),
            };
            vocab.save(&vocab_out)?;
            println!(
                "wrote bow vocabulary ({} words) to {}",
                vocab.len(),
                vocab_out.display()
            );
            Resources::Bow(vocab)
        }
    };

    let features = resources.featurize(&examples)?;
    let data: Vec<_> = features
        .into_iter()
        .zip(examples.iter().map(|ex| ex.label))
        .collect();
    let defaults = FitConfig::default();
    let fit_config = FitConfig {
        c: cfg.resolve(args.c, "c", defaults.c)?,
        weights: ClassWeights {
            c_inanimate: cfg.resolve(args.c_inanimate, "c-inanimate", 3.0)?,
            c_animate: cfg.resolve(args.c_animate, "c-animate", 1.0)?,
        },
        tolerance: cfg.resolve(args.tolerance, "tolerance", defaults.tolerance)?,
        max_sweeps: cfg.resolve(args.max_sweeps, "max-sweeps", defaults.max_sweeps)?,
        seed: cfg.resolve(args.seed, "seed", defaults.seed)?,
    };

    let (model, report) = fit(&data, &fit_config)?;
    model.save(&model_out)?;

    let correct = data
        .iter()
        .filter(|(x, label)| model.predict(x).expect("dims match") == *label)
        .count();
    println!(
        "fit {}: n={} dim={} sweeps={} violation={:.3e} train_accuracy={:.4}; model at {}",
        repr.as_str(),
        data.len(),
        model.dim(),
        report.sweeps,
        report.final_violation,
        correct as f64 / data.len() as f64,
        model_out.display()
    );
    Ok(())
}

struct SystemSpec {
    name: String,
    repr: Repr,
    model: PathBuf,
    resource: PathBuf,
}

fn parse_system_spec(spec: &str) -> Result<SystemSpec> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 4 {
        bail!("bad --system {spec:?}: expected NAME,REPR,MODEL,RESOURCE");
    }
    Ok(SystemSpec {
        name: parts[0].to_owned(),
        repr: Repr::parse_name(parts[1])?,
        model: PathBuf::from(parts[2]),
        resource: PathBuf::from(parts[3]),
    })
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let test_path: PathBuf = cfg.resolve_required(args.test, "test")?;
    let alpha = cfg.resolve(args.alpha, "alpha", 0.05)?;
    let oov: OovPolicy = cfg.resolve(args.oov, "oov", CliOov::Zero)?.into();
    if args.systems.is_empty() {
        bail!("at least one --system NAME,REPR,MODEL,RESOURCE is required");
    }

    let examples = read_markables_tsv(&test_path)?;
    let golds: Vec<AnimacyLabel> = examples.iter().map(|ex| ex.label).collect();

    let mut names = Vec::new();
    let mut predictions = Vec::new();
    for raw in &args.systems {
        let spec = parse_system_spec(raw)?;
        let model = LinearModel::load(&spec.model)?;
        let resources = Resources::load(spec.repr, &spec.resource, oov)?;
        let features = resources.featurize(&examples)?;
        let preds: Vec<AnimacyLabel> = features
            .iter()
            .map(|x| model.predict(x))
            .collect::<Result<_, _>>()
            .with_context(|| format!("predicting with system {}", spec.name))?;
        names.push(spec.name);
        predictions.push(preds);
    }

    let comparison = compare_systems(&names, &predictions, &golds, alpha)?;
    print!("{}", comparison.format_table());
    if let Some(tsv_out) = args.tsv_out {
        std::fs::write(&tsv_out, comparison.to_tsv())
            .with_context(|| format!("writing {}", tsv_out.display()))?;
        println!("report written to {}", tsv_out.display());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let cfg = Settings::load(args.config.as_deref())?;
    let out_dir: PathBuf = cfg.resolve_required(args.out_dir, "out-dir")?;
    let defaults = SynthConfig::default();
    let synth_config = SynthConfig {
        n_animate_mcs: cfg.resolve(args.animate_mcs, "animate-mcs", defaults.n_animate_mcs)?,
        n_inanimate_mcs: cfg.resolve(
            args.inanimate_mcs,
            "inanimate-mcs",
            defaults.n_inanimate_mcs,
        )?,
        n_neutral_mcs: cfg.resolve(args.neutral_mcs, "neutral-mcs", defaults.n_neutral_mcs)?,
        nouns_per_class: cfg.resolve(
            args.nouns_per_class,
            "nouns-per-class",
            defaults.nouns_per_class,
        )?,
        sentences: cfg.resolve(args.sentences, "sentences", defaults.sentences)?,
        noise: cfg.resolve(args.noise, "noise", defaults.noise)?,
        test_mcs_per_class: cfg.resolve(
            args.test_mcs_per_class,
            "test-mcs-per-class",
            defaults.test_mcs_per_class,
        )?,
        seed: cfg.resolve(args.seed, "seed", defaults.seed)?,
    };

    let bench = gen_synthetic(&synth_config)?;
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let corpus_path = out_dir.join("corpus.txt");
    let mut corpus = bench.corpus_lines.join("\n");
    corpus.push('\n');
    std::fs::write(&corpus_path, corpus)
        .with_context(|| format!("writing {}", corpus_path.display()))?;
    write_markables_tsv(&out_dir.join("train.tsv"), &bench.train)?;
    write_markables_tsv(&out_dir.join("test.tsv"), &bench.test)?;
    println!(
        "synthetic benchmark: {} sentences, {} train examples, {} test examples in {}",
        bench.corpus_lines.len(),
        bench.train.len(),
        bench.test.len(),
        out_dir.display()
    );
    Ok(())
}
