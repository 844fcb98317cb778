use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emodyn::config::{Mode, PipelineConfig, Sweep};
use emodyn::corpus::{self, Emotion};
use emodyn::lexicons::LexiconSet;
use emodyn::pipeline::{
    self, align_with_gold, apply_ssm, attach_gold, fit_em_params, williams_csv, FoldRecord,
    PipelineOutput,
};
use emodyn::plot::{emit_plot, parse_dynamics_csv, plot_csv, PlotFormat};
use emodyn::ssm::{ParamSubset, SsmParams};
use emodyn::verse_model::{parse_predictions, write_predictions, RidgeOptions, VerseModel};
use emodyn::{Error, Result};

const WORKERS_ENV: &str = "EMODYN_WORKERS";

/// Verse-level emotion scores and their dynamics across a song.
#[derive(Debug, Parser)]
#[command(name = "emodyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the ridge verse model on a scored source corpus.
    TrainVerse(TrainVerse),
    /// Score every verse of a songs file with a trained model.
    PredictVerse(PredictVerse),
    /// Filter or smooth verse predictions song by song.
    Smooth(Smooth),
    /// Correlate predictions with gold; optionally compare two systems.
    Evaluate(Evaluate),
    /// Render a dynamics CSV as CSV or SVG.
    Plot(Plot),
    /// Every stage in one run, with song-level cross-validation for EM.
    Pipeline(Pipeline),
}

#[derive(Debug, Args)]
struct TrainVerse {
    #[arg(long)]
    lexicons: PathBuf,
    /// Headlines TSV.
    #[arg(long)]
    source: PathBuf,
    /// Polynomial degree, or `none` for raw features.
    #[arg(long, default_value = "3")]
    poly_degree: String,
    /// Comma separated ridge penalties.
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictVerse {
    #[arg(long)]
    lexicons: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    songs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Smooth {
    /// Verse predictions TSV.
    #[arg(long)]
    predictions: PathBuf,
    /// filter, smoother, filter-em or smoother-em.
    #[arg(long, default_value = "smoother-em")]
    mode: String,
    #[arg(short = 'A', default_value_t = 1.0)]
    a: f64,
    #[arg(short = 'C', default_value_t = 1.0)]
    c: f64,
    #[arg(short = 'Q', default_value_t = 1.0)]
    q: f64,
    #[arg(short = 'R', default_value_t = 5.0)]
    r: f64,
    #[arg(long, default_value_t = 10)]
    n_iter: usize,
    /// Parameters EM may update, e.g. `A,Q,R` or `all`.
    #[arg(long, default_value = "all")]
    em_params: String,
    /// Songs file; its gold series are added to the dynamics output.
    #[arg(long)]
    songs: Option<PathBuf>,
    /// Dynamics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the SSM means as a predictions TSV.
    #[arg(long)]
    predictions_out: Option<PathBuf>,
    /// Also write the fitted parameters.
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Evaluate {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    songs: PathBuf,
    #[arg(long)]
    per_song: bool,
    /// Second predictions TSV; runs the Williams test of `--predictions` against it.
    #[arg(long, requires = "williams_out")]
    compare: Option<PathBuf>,
    #[arg(long)]
    williams_out: Option<PathBuf>,
    /// Evaluation CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Plot {
    #[arg(long)]
    dynamics: PathBuf,
    #[arg(long, default_value = "svg")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Pipeline {
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run once per value, e.g. `A=0.5,1,2`.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    songs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    poly_degree: Option<String>,
    #[arg(short = 'A')]
    a: Option<f64>,
    #[arg(short = 'C')]
    c: Option<f64>,
    #[arg(short = 'Q')]
    q: Option<f64>,
    #[arg(short = 'R')]
    r: Option<f64>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    plot: Option<String>,
    #[arg(long)]
    per_song: bool,
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn parse_degree(value: &str) -> Result<Option<usize>> {
    let mut c = PipelineConfig::default();
    c.set("poly_degree", value)?;
    Ok(c.poly_degree)
}

fn train_verse(args: TrainVerse) -> Result<()> {
    let mut config = PipelineConfig {
        poly_degree: parse_degree(&args.poly_degree)?,
        ..PipelineConfig::default()
    };
    if let Some(l) = &args.lambdas {
        config.set("lambdas", l)?;
    }
    let lexicons = LexiconSet::load_dir(&args.lexicons)?;
    let source = corpus::load_headlines(&args.source)?;
    let documents: Vec<Vec<String>> = source.iter().map(|r| corpus::tokenize(&r.text)).collect();
    let matrix = pipeline::feature_matrix(&lexicons, &documents, config.poly_degree)?;
    let opts = RidgeOptions {
        lambdas: config.lambdas,
        folds: args.folds,
        seed: args.seed,
    };
    let model = pipeline::train_verse_model(&source, &matrix, &opts)?;
    for m in &model.models {
        log::info!("{}: lambda {} cv r {:?}", m.emotion, m.lambda, m.cv_r);
    }
    write_file(&args.out, &model.to_tsv())
}

fn predict_verse(args: PredictVerse) -> Result<()> {
    let model = VerseModel::parse_tsv(&read_text(&args.model)?, &args.model.display().to_string())?;
    let lexicons = LexiconSet::load_dir(&args.lexicons)?;
    let songs = corpus::load_songs(&args.songs)?;
    let documents: Vec<Vec<String>> = songs
        .iter()
        .flat_map(|s| s.verses.iter().map(|v| corpus::tokenize(&v.text)))
        .collect();
    let matrix = pipeline::feature_matrix(&lexicons, &documents, model.poly_degree)?;
    let predictions = pipeline::predict_songs(&model, &matrix, &songs)?;
    write_file(&args.out, &write_predictions(&predictions))
}

fn smooth(args: Smooth) -> Result<()> {
    let mode: Mode = args.mode.parse()?;
    if !mode.uses_ssm() {
        return Err(Error::Invalid(format!("mode {mode} does not run the SSM")));
    }
    let which: ParamSubset = args.em_params.parse()?;
    let base = SsmParams::scalar(args.a, args.c, args.q, args.r)?;
    let name = args.predictions.display().to_string();
    let predictions = parse_predictions(&read_text(&args.predictions)?, &name)?;
    if predictions.is_empty() {
        return Err(Error::Empty(format!("{name}: no predictions")));
    }
    let ids: Vec<String> = predictions.iter().map(|p| p.song_id.clone()).collect();
    let all: Vec<_> = predictions.iter().collect();
    let folds = Emotion::ALL
        .iter()
        .map(|&emotion| {
            let (params, loglik_trace, train_songs) = if mode.uses_em() {
                let fit = fit_em_params(&all, emotion, &base, args.n_iter, which)
                    .map_err(|e| e.context(format!("EM for {emotion}")))?;
                (fit.params, fit.loglik_trace, ids.clone())
            } else {
                (base.clone(), Vec::new(), Vec::new())
            };
            Ok(FoldRecord {
                fold: 0,
                emotion,
                train_songs,
                held_out: ids.clone(),
                params,
                loglik_trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (smoothed, mut traces) = apply_ssm(&predictions, &folds, mode.smooths())?;
    if let Some(path) = &args.songs {
        attach_gold(&mut traces, &corpus::load_songs(path)?);
    }
    write_file(&args.out, &plot_csv(&traces)?)?;
    if let Some(path) = &args.predictions_out {
        write_file(path, &write_predictions(&smoothed))?;
    }
    if let Some(path) = &args.params_out {
        write_file(path, &pipeline::params_csv(&folds))?;
    }
    Ok(())
}

fn evaluate(args: Evaluate) -> Result<()> {
    let songs = corpus::load_songs(&args.songs)?;
    let load = |path: &Path| {
        parse_predictions(&read_text(path)?, &path.display().to_string())
            .and_then(|p| align_with_gold(&p, &songs))
            .map_err(|e| e.context(format!("aligning {}", path.display())))
    };
    let system = load(&args.predictions)?;
    let report = system.evaluate(args.per_song)?;
    match &args.out {
        Some(path) => write_file(path, &report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    if let (Some(other), Some(out)) = (&args.compare, &args.williams_out) {
        let rows = pipeline::williams_table(&system, &load(other)?)?;
        write_file(out, &williams_csv(&rows))?;
    }
    Ok(())
}

fn plot(args: Plot) -> Result<()> {
    let format: PlotFormat = args.format.parse()?;
    let name = args.dynamics.display().to_string();
    let traces = parse_dynamics_csv(&read_text(&args.dynamics)?, &name)?;
    emit_plot(&traces, format, &args.out)
}

fn pipeline_config(args: &Pipeline) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--set `{kv}` is not KEY=VALUE")))?;
        config.set(k, v)?;
    }
    if let Some(p) = &args.lexicons {
        config.lexicon_dir = p.clone();
    }
    if let Some(p) = &args.source {
        config.source = p.clone();
    }
    if let Some(p) = &args.songs {
        config.songs = p.clone();
    }
    if let Some(p) = &args.out {
        config.output_dir = p.clone();
    }
    let strings = [
        ("mode", &args.mode),
        ("poly_degree", &args.poly_degree),
        ("plot", &args.plot),
    ];
    for (key, value) in strings {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    let numbers = [("A", args.a), ("C", args.c), ("Q", args.q), ("R", args.r)];
    for (key, value) in numbers {
        if let Some(v) = value {
            config.set(key, &v.to_string())?;
        }
    }
    if let Some(n) = args.n_iter {
        config.n_iter = n;
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.per_song {
        config.per_song = true;
    }
    config.validate()?;
    Ok(config)
}

fn summary(out: &PipelineOutput) {
    println!("emotion\tr_verse\tr_ssm");
    for e in Emotion::ALL {
        let fmt = |r: Option<f64>| r.map_or("NA".to_string(), |r| format!("{r:.4}"));
        let ssm = out.ssm_eval.as_ref().and_then(|s| s.r(e));
        println!("{e}\t{}\t{}", fmt(out.verse_eval.r(e)), fmt(ssm));
    }
}

fn run_pipeline(args: Pipeline) -> Result<()> {
    let base = pipeline_config(&args)?;
    let configs = match &args.sweep {
        Some(s) => s.parse::<Sweep>()?.configs(&base)?,
        None => vec![base],
    };
    let inputs = pipeline::PipelineInputs::load(&configs[0])?;
    for config in &configs {
        let out = pipeline::run_pipeline_with(&inputs, config)?;
        let written = pipeline::write_outputs(&out, &config.output_dir, config.plot)?;
        for path in written {
            log::info!("wrote {}", path.display());
        }
        if configs.len() > 1 {
            println!("# {}", config.output_dir.display());
        }
        summary(&out);
    }
    Ok(())
}

fn init_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Error::Invalid(format!(
                "{WORKERS_ENV} must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_workers()?;
    match cli.command {
        Command::TrainVerse(a) => train_verse(a),
        Command::PredictVerse(a) => predict_verse(a),
        Command::Smooth(a) => smooth(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Plot(a) => plot(a),
        Command::Pipeline(a) => run_pipeline(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
