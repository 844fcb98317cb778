//! End-to-end run: verse model, per-song SSM dynamics, evaluation.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::corpus::{self, Emotion, SongSequence, SourceRecord, GOLD_SCORE_MAX, SOURCE_SCORE_MAX};
use crate::error::{Error, Result};
use crate::evalstats::{
    evaluate, kfold_songs, pearson, williams_test, EvalReport, SongScores, WilliamsResult,
};
use crate::lexicons::{build_vocabulary, LexiconSet, WordFeatureMatrix};
use crate::plot::{emit_plot, plot_csv, DynamicsTrace, PlotFormat};
use crate::ssm::{
    em_fit, filter, smooth, EmFit, EmSequence, GaussianBelief, ParamSubset, SsmParams,
    DEFAULT_INITIAL_VARIANCE,
};
use crate::verse_model::{
    train_ridge_multi, verse_features, write_predictions, RidgeOptions, SongPredictions, VerseModel,
};

#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub lexicons: LexiconSet,
    pub source: Vec<SourceRecord>,
    pub songs: Vec<SongSequence>,
}

impl PipelineInputs {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        Ok(PipelineInputs {
            lexicons: LexiconSet::load_dir(&config.lexicon_dir)?,
            source: corpus::load_headlines(&config.source)?,
            songs: corpus::load_songs(&config.songs)?,
        })
    }
}

/// Parameters used for one emotion on one fold's held-out songs.
#[derive(Debug, Clone)]
pub struct FoldRecord {
    pub fold: usize,
    pub emotion: Emotion,
    /// Songs whose sequences entered EM, in the order they were passed.
    pub train_songs: Vec<String>,
    pub held_out: Vec<String>,
    pub params: SsmParams,
    /// Empty for fixed-parameter modes.
    pub loglik_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilliamsRow {
    pub emotion: Emotion,
    pub r_ssm: Option<f64>,
    pub r_verse: Option<f64>,
    /// Between the SSM and verse-level predictions.
    pub r_between: Option<f64>,
    pub n: usize,
    /// `None` when any correlation is undefined or the test is not applicable.
    pub test: Option<WilliamsResult>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: VerseModel,
    /// On the gold scale.
    pub predictions: Vec<SongPredictions>,
    pub verse_eval: EvalReport,
    pub ssm_eval: Option<EvalReport>,
    pub williams: Vec<WilliamsRow>,
    pub folds: Vec<FoldRecord>,
    pub traces: Vec<DynamicsTrace>,
}

/// Word feature matrix over every token of the given documents.
pub fn feature_matrix(
    lexicons: &LexiconSet,
    documents: &[Vec<String>],
    degree: Option<usize>,
) -> Result<WordFeatureMatrix> {
    let vocab = build_vocabulary(documents.iter().map(Vec::as_slice))?;
    Ok(WordFeatureMatrix::build(vocab, lexicons, degree))
}

/// Ridge models for all six emotions on the source sentences.
pub fn train_verse_model(
    source: &[SourceRecord],
    matrix: &WordFeatureMatrix,
    opts: &RidgeOptions,
) -> Result<VerseModel> {
    if source.is_empty() {
        return Err(Error::Empty("no source sentences".into()));
    }
    let x: Vec<Vec<f64>> = source
        .iter()
        .map(|r| verse_features(&corpus::tokenize(&r.text), matrix))
        .collect();
    let labels: Vec<Vec<f64>> = source
        .iter()
        .map(|r| {
            r.scores
                .to_array()
                .iter()
                .map(|v| v / SOURCE_SCORE_MAX)
                .collect()
        })
        .collect();
    let models = train_ridge_multi(&x, &labels, &Emotion::ALL, SOURCE_SCORE_MAX, opts)?;
    Ok(VerseModel {
        poly_degree: matrix.degree(),
        models,
    })
}

/// Verse-level scores for every song, mapped from the [0, 1] training scale
/// onto the [0, 10] gold scale.
pub fn predict_songs(
    model: &VerseModel,
    matrix: &WordFeatureMatrix,
    songs: &[SongSequence],
) -> Result<Vec<SongPredictions>> {
    if matrix.degree() != model.poly_degree {
        return Err(Error::Invalid(format!(
            "model expects poly degree {:?}, features use {:?}",
            model.poly_degree,
            matrix.degree()
        )));
    }
    songs
        .iter()
        .map(|song| {
            let rows: Vec<Vec<f64>> = song
                .verses
                .iter()
                .map(|v| verse_features(&corpus::tokenize(&v.text), matrix))
                .collect();
            let mut scores = model
                .predict_all(&rows, false)
                .map_err(|e| e.context(format!("song {}", song.song_id)))?;
            for row in &mut scores {
                for v in row.iter_mut() {
                    *v *= GOLD_SCORE_MAX;
                }
            }
            Ok(SongPredictions {
                song_id: song.song_id.clone(),
                verse_ids: song.verses.iter().map(|v| v.verse_id.clone()).collect(),
                scores,
            })
        })
        .collect()
}

/// First observation as mean, variance [`DEFAULT_INITIAL_VARIANCE`].
pub fn initial_belief(ys: &[f64]) -> Result<GaussianBelief> {
    let first = ys
        .first()
        .ok_or_else(|| Error::Empty("empty observation sequence".into()))?;
    GaussianBelief::anchored(&[*first], DEFAULT_INITIAL_VARIANCE)
}

/// Posterior means and standard deviations of a univariate sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn track(ys: &[f64], params: &SsmParams, smoother: bool) -> Result<Track> {
    let init = initial_belief(ys)?;
    let beliefs = if smoother {
        smooth(ys, params, &init)?.smoothed
    } else {
        filter(ys, params, &init)?.filtered
    };
    Ok(Track {
        means: beliefs.iter().map(|b| b.mean.value()).collect(),
        stds: beliefs.iter().map(|b| b.std_devs()[0]).collect(),
    })
}

/// EM over the given songs' series for one emotion, each song anchored on
/// its first score.
pub fn fit_em_params(
    songs: &[&SongPredictions],
    emotion: Emotion,
    start: &SsmParams,
    n_iter: usize,
    which: ParamSubset,
) -> Result<EmFit> {
    let series: Vec<Vec<f64>> = songs.iter().map(|p| p.series(emotion)).collect();
    let sequences = series
        .iter()
        .map(|ys| {
            Ok(EmSequence {
                ys,
                init: initial_belief(ys)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    em_fit(&sequences, start, n_iter, which)
}

fn check_unique_ids(songs: &[SongSequence]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in songs {
        if !seen.insert(s.song_id.as_str()) {
            return Err(Error::Invalid(format!("duplicate song id {}", s.song_id)));
        }
    }
    Ok(())
}

/// Per-emotion, per-fold parameters. Fixed modes produce a single fold 0
/// covering every song.
fn fold_params(
    predictions: &[SongPredictions],
    config: &PipelineConfig,
) -> Result<Vec<FoldRecord>> {
    let base = config.ssm_params()?;
    let ids: Vec<String> = predictions.iter().map(|p| p.song_id.clone()).collect();
    if !config.mode.uses_em() {
        return Ok(Emotion::ALL
            .iter()
            .map(|&emotion| FoldRecord {
                fold: 0,
                emotion,
                train_songs: Vec::new(),
                held_out: ids.clone(),
                params: base.clone(),
                loglik_trace: Vec::new(),
            })
            .collect());
    }
    let folds = kfold_songs(&ids, config.k, config.seed)
        .map_err(|e| e.context("assigning songs to folds"))?;
    let jobs: Vec<(usize, Emotion)> = (0..folds.len())
        .flat_map(|f| Emotion::ALL.iter().map(move |&e| (f, e)))
        .collect();
    jobs.par_iter()
        .map(|&(fold, emotion)| {
            let held: HashSet<&str> = folds[fold].iter().map(String::as_str).collect();
            let train: Vec<&SongPredictions> = predictions
                .iter()
                .filter(|p| !held.contains(p.song_id.as_str()))
                .collect();
            let fit = fit_em_params(&train, emotion, &base, config.n_iter, config.em_params)
                .map_err(|e| e.context(format!("EM for {emotion}, fold {fold}")))?;
            for d in &fit.diagnostics {
                log::debug!("fold {fold} {emotion}: {d}");
            }
            Ok(FoldRecord {
                fold,
                emotion,
                train_songs: train.iter().map(|p| p.song_id.clone()).collect(),
                held_out: folds[fold].clone(),
                params: fit.params,
                loglik_trace: fit.loglik_trace,
            })
        })
        .collect()
}

/// Annotated songs with their predictions, in song-file order.
#[derive(Debug, Clone)]
pub struct Aligned {
    pub song_ids: Vec<String>,
    pub predicted: Vec<Vec<[f64; 6]>>,
    pub gold: Vec<Vec<[f64; 6]>>,
}

/// Pairs every annotated song with its predictions by song id. Verse ids
/// must match one to one.
pub fn align_with_gold(predictions: &[SongPredictions], songs: &[SongSequence]) -> Result<Aligned> {
    let by_id: HashMap<&str, &SongPredictions> = predictions
        .iter()
        .map(|p| (p.song_id.as_str(), p))
        .collect();
    let mut out = Aligned {
        song_ids: Vec::new(),
        predicted: Vec::new(),
        gold: Vec::new(),
    };
    for song in songs.iter().filter(|s| s.has_gold()) {
        let pred = by_id.get(song.song_id.as_str()).ok_or_else(|| {
            Error::Invalid(format!(
                "no predictions for annotated song {}",
                song.song_id
            ))
        })?;
        let same = pred.verse_ids.len() == song.verses.len()
            && pred
                .verse_ids
                .iter()
                .zip(&song.verses)
                .all(|(a, v)| *a == v.verse_id);
        if !same {
            return Err(Error::Invalid(format!(
                "song {}: predicted verses do not match the gold verses",
                song.song_id
            )));
        }
        out.song_ids.push(song.song_id.clone());
        out.predicted.push(pred.scores.clone());
        out.gold.push(
            song.verses
                .iter()
                .filter_map(|v| v.gold.map(|g| g.to_array()))
                .collect(),
        );
    }
    Ok(out)
}

impl Aligned {
    pub fn evaluate(&self, per_song: bool) -> Result<EvalReport> {
        let songs: Vec<SongScores<'_>> = self
            .song_ids
            .iter()
            .zip(&self.predicted)
            .zip(&self.gold)
            .map(|((id, p), g)| SongScores {
                song_id: id,
                predicted: p,
                gold: g,
            })
            .collect();
        evaluate(&songs, per_song)
    }
}

/// Williams test per emotion: does system 1 correlate with gold better than
/// system 2? Both must be aligned against the same gold.
pub fn williams_table(system1: &Aligned, system2: &Aligned) -> Result<Vec<WilliamsRow>> {
    if system1.gold != system2.gold {
        return Err(Error::Invalid(
            "systems are aligned to different gold".into(),
        ));
    }
    let eval1 = system1.evaluate(false)?;
    let eval2 = system2.evaluate(false)?;
    let n: usize = system1.gold.iter().map(Vec::len).sum();
    let pooled = |rows: &[Vec<[f64; 6]>], i: usize| -> Vec<f64> {
        rows.iter()
            .flat_map(|r| r.iter().map(move |s| s[i]))
            .collect()
    };
    Ok(Emotion::ALL
        .iter()
        .map(|&e| {
            let r_between = pearson(
                &pooled(&system1.predicted, e.index()),
                &pooled(&system2.predicted, e.index()),
            )
            .ok();
            let (r_ssm, r_verse) = (eval1.r(e), eval2.r(e));
            let test = match (r_ssm, r_verse, r_between) {
                (Some(a), Some(b), Some(c)) => match williams_test(a, b, c, n) {
                    Ok(t) => Some(t),
                    Err(err) => {
                        log::info!("williams test for {e} not applicable: {err}");
                        None
                    }
                },
                _ => None,
            };
            WilliamsRow {
                emotion: e,
                r_ssm,
                r_verse,
                r_between,
                n,
                test,
            }
        })
        .collect())
}

/// Filters or smooths every song × emotion with the parameters of the fold
/// record holding that song out. Returns the SSM means as predictions plus
/// one trace per song × emotion (without gold).
pub fn apply_ssm(
    predictions: &[SongPredictions],
    folds: &[FoldRecord],
    smoother: bool,
) -> Result<(Vec<SongPredictions>, Vec<DynamicsTrace>)> {
    let mut jobs: Vec<(usize, Emotion, usize)> = Vec::new();
    for (si, pred) in predictions.iter().enumerate() {
        for e in Emotion::ALL {
            let ri = folds
                .iter()
                .position(|f| f.emotion == e && f.held_out.contains(&pred.song_id))
                .ok_or_else(|| Error::Invalid(format!("song {} is in no fold", pred.song_id)))?;
            jobs.push((si, e, ri));
        }
    }
    let tracks: Vec<Track> = jobs
        .par_iter()
        .map(|&(si, e, ri)| {
            let p = &predictions[si];
            track(&p.series(e), &folds[ri].params, smoother)
                .map_err(|err| err.context(format!("song {}, {e}", p.song_id)))
        })
        .collect::<Result<_>>()?;

    let mut smoothed: Vec<SongPredictions> = predictions
        .iter()
        .map(|p| SongPredictions {
            scores: vec![[0.0; 6]; p.scores.len()],
            ..p.clone()
        })
        .collect();
    let mut traces = Vec::with_capacity(jobs.len());
    for (&(si, e, _), t) in jobs.iter().zip(tracks) {
        let p = &predictions[si];
        for (row, m) in smoothed[si].scores.iter_mut().zip(&t.means) {
            row[e.index()] = *m;
        }
        traces.push(DynamicsTrace {
            song_id: p.song_id.clone(),
            emotion: e,
            verse_ids: p.verse_ids.clone(),
            gold: None,
            verse: p.series(e),
            ssm_mean: t.means,
            ssm_std: t.stds,
        });
    }
    Ok((smoothed, traces))
}

/// Fills trace gold series from the songs that carry annotations.
pub fn attach_gold(traces: &mut [DynamicsTrace], songs: &[SongSequence]) {
    let by_id: HashMap<&str, &SongSequence> =
        songs.iter().map(|s| (s.song_id.as_str(), s)).collect();
    for t in traces {
        if let Some(song) = by_id.get(t.song_id.as_str()) {
            t.gold = song.gold_series(t.emotion).filter(|g| g.len() == t.len());
        }
    }
}

/// Runs every stage on already-loaded inputs.
pub fn run_pipeline_with(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if inputs.songs.is_empty() {
        return Err(Error::Empty("no songs".into()));
    }
    check_unique_ids(&inputs.songs)?;

    let mut documents: Vec<Vec<String>> = inputs
        .source
        .iter()
        .map(|r| corpus::tokenize(&r.text))
        .collect();
    for song in &inputs.songs {
        documents.extend(song.verses.iter().map(|v| corpus::tokenize(&v.text)));
    }
    let matrix = feature_matrix(&inputs.lexicons, &documents, config.poly_degree)?;
    let opts = RidgeOptions {
        lambdas: config.lambdas.clone(),
        folds: config.ridge_folds,
        seed: config.seed,
    };
    let model = train_verse_model(&inputs.source, &matrix, &opts)
        .map_err(|e| e.context("training verse model"))?;
    let predictions = predict_songs(&model, &matrix, &inputs.songs)?;

    // annotated songs only, identical alignment for both systems
    let verse_aligned = align_with_gold(&predictions, &inputs.songs)?;
    let verse_eval = verse_aligned.evaluate(config.per_song)?;

    if !config.mode.uses_ssm() {
        return Ok(PipelineOutput {
            model,
            predictions,
            verse_eval,
            ssm_eval: None,
            williams: Vec::new(),
            folds: Vec::new(),
            traces: Vec::new(),
        });
    }

    let folds = fold_params(&predictions, config)?;
    let (ssm_predictions, mut traces) = apply_ssm(&predictions, &folds, config.mode.smooths())?;
    attach_gold(&mut traces, &inputs.songs);
    let ssm_aligned = align_with_gold(&ssm_predictions, &inputs.songs)?;
    let ssm_eval = ssm_aligned.evaluate(config.per_song)?;
    let williams = williams_table(&ssm_aligned, &verse_aligned)?;

    Ok(PipelineOutput {
        model,
        predictions,
        verse_eval,
        ssm_eval: Some(ssm_eval),
        williams,
        folds,
        traces,
    })
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let inputs = PipelineInputs::load(config)?;
    run_pipeline_with(&inputs, config)
}

fn opt(v: Option<f64>) -> String {
    v.map_or("undefined".to_string(), |v| v.to_string())
}

pub fn williams_csv(rows: &[WilliamsRow]) -> String {
    let mut out = String::from("emotion,r_ssm,r_verse,r_ssm_verse,n,t,df,p\n");
    for r in rows {
        let (t, df, p) = match r.test {
            Some(w) => (Some(w.t), Some(w.df), Some(w.p)),
            None => (None, None, None),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.emotion,
            opt(r.r_ssm),
            opt(r.r_verse),
            opt(r.r_between),
            r.n,
            opt(t),
            opt(df),
            opt(p)
        ));
    }
    out
}

pub fn params_csv(folds: &[FoldRecord]) -> String {
    let mut out = String::from("fold,emotion,A,C,Q,R,final_loglik,train_songs,held_out\n");
    for f in folds {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            f.fold,
            f.emotion,
            f.params.a().value(),
            f.params.c().value(),
            f.params.q().value(),
            f.params.r().value(),
            opt(f.loglik_trace.last().copied()),
            f.train_songs.join(";"),
            f.held_out.join(";")
        ));
    }
    out
}

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes every artifact of `out` under `dir`; returns the paths written.
pub fn write_outputs(
    out: &PipelineOutput,
    dir: &Path,
    plot: Option<PlotFormat>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    write(dir, "model.tsv", &out.model.to_tsv(), &mut written)?;
    write(
        dir,
        "predictions.tsv",
        &write_predictions(&out.predictions),
        &mut written,
    )?;
    write(
        dir,
        "eval_verse.csv",
        &out.verse_eval.to_csv(),
        &mut written,
    )?;
    if let Some(ssm) = &out.ssm_eval {
        write(dir, "eval_ssm.csv", &ssm.to_csv(), &mut written)?;
        write(
            dir,
            "williams.csv",
            &williams_csv(&out.williams),
            &mut written,
        )?;
        write(dir, "params.csv", &params_csv(&out.folds), &mut written)?;
        write(dir, "dynamics.csv", &plot_csv(&out.traces)?, &mut written)?;
        if plot == Some(PlotFormat::Svg) {
            let path = dir.join("dynamics.svg");
            emit_plot(&out.traces, PlotFormat::Svg, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}
