//! Verse-level intensity regressor: pooled lexicon features and one closed-form
//! ridge model per emotion, with λ chosen by cross-validated Pearson r.

use crate::corpus::Emotion;
use crate::error::{Error, Result};
use crate::evalstats::{kfold, pearson};
use crate::lexicons::WordFeatureMatrix;
use crate::linalg::cholesky_solve;

use rayon::prelude::*;

/// `{1e-3, 1e-2, …, 1e3}`
pub const DEFAULT_LAMBDAS: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

/// Mean-pool ⧺ max-pool over the rows of in-vocabulary tokens.
/// A verse without known tokens maps to zeros.
pub fn verse_features(tokens: &[String], matrix: &WordFeatureMatrix) -> Vec<f64> {
    let d = matrix.cols();
    let mut sum = vec![0.0; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    let mut count = 0usize;
    for row in tokens.iter().filter_map(|t| matrix.lookup(t)) {
        for ((s, m), v) in sum.iter_mut().zip(max.iter_mut()).zip(row) {
            *s += v;
            *m = m.max(*v);
        }
        count += 1;
    }
    if count == 0 {
        return vec![0.0; 2 * d];
    }
    let inv = 1.0 / count as f64;
    sum.iter().map(|s| s * inv).chain(max).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub emotion: Emotion,
    pub lambda: f64,
    pub feature_dim: usize,
    /// Source labels were divided by this before fitting.
    pub label_scale: f64,
    /// Mean cross-validated Pearson r of the chosen λ, if defined.
    pub cv_r: Option<f64>,
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl RidgeModel {
    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_dim {
            return Err(Error::Dimension(format!(
                "{} features for a model of dimension {}",
                x.len(),
                self.feature_dim
            )));
        }
        Ok(self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    /// Unclamped `w·x + b` for each row; `clamp` restricts to [0, 1].
    pub fn predict(&self, rows: &[Vec<f64>], clamp: bool) -> Result<Vec<f64>> {
        rows.iter()
            .map(|x| {
                self.predict_one(x)
                    .map(|v| if clamp { v.clamp(0.0, 1.0) } else { v })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RidgeOptions {
    pub lambdas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            folds: 10,
            seed: 0,
        }
    }
}

/// Centred training data for the rows `idx`, shared by every λ.
///
/// With at least as many rows as features the primal system
/// `(XᵀX + λI) w = Xᵀy` is solved; otherwise the dual
/// `(XXᵀ + λI) α = y`, `w = Xᵀα`, which has the same solution.
struct RidgeProblem {
    d: usize,
    k: usize,
    mean_x: Vec<f64>,
    mean_y: Vec<f64>,
    /// n × d, centred
    xc: Vec<f64>,
    /// n × k, centred
    yc: Vec<f64>,
    /// d × d (primal) or n × n (dual), without λ
    gram: Vec<f64>,
    dual: bool,
}

impl RidgeProblem {
    fn new(x: &[Vec<f64>], labels: &[Vec<f64>], targets: &[usize], idx: &[usize]) -> Self {
        let (n, d, k) = (idx.len(), x[0].len(), targets.len());
        let nf = n as f64;
        let mut mean_x = vec![0.0; d];
        let mut mean_y = vec![0.0; k];
        for &i in idx {
            for (m, v) in mean_x.iter_mut().zip(&x[i]) {
                *m += v;
            }
            for (m, &t) in mean_y.iter_mut().zip(targets) {
                *m += labels[i][t];
            }
        }
        mean_x.iter_mut().for_each(|m| *m /= nf);
        mean_y.iter_mut().for_each(|m| *m /= nf);
        let mut xc = Vec::with_capacity(n * d);
        let mut yc = Vec::with_capacity(n * k);
        for &i in idx {
            xc.extend(x[i].iter().zip(&mean_x).map(|(v, m)| v - m));
            yc.extend(targets.iter().zip(&mean_y).map(|(&t, m)| labels[i][t] - m));
        }
        let dual = n < d;
        let gram = if dual {
            let mut g = vec![0.0; n * n];
            for a in 0..n {
                let ra = &xc[a * d..(a + 1) * d];
                for b in a..n {
                    let v: f64 = ra
                        .iter()
                        .zip(&xc[b * d..(b + 1) * d])
                        .map(|(p, q)| p * q)
                        .sum();
                    g[a * n + b] = v;
                    g[b * n + a] = v;
                }
            }
            g
        } else {
            let mut g = vec![0.0; d * d];
            for r in 0..n {
                let row = &xc[r * d..(r + 1) * d];
                for (i, xi) in row.iter().enumerate() {
                    if *xi == 0.0 {
                        continue;
                    }
                    for (j, xj) in row.iter().enumerate().skip(i) {
                        g[i * d + j] += xi * xj;
                    }
                }
            }
            for i in 0..d {
                for j in 0..i {
                    g[i * d + j] = g[j * d + i];
                }
            }
            g
        };
        RidgeProblem {
            d,
            k,
            mean_x,
            mean_y,
            xc,
            yc,
            gram,
            dual,
        }
    }

    /// Weights (d × k, row-major) and intercepts.
    fn solve(&self, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (d, k) = (self.d, self.k);
        let n = self.yc.len() / k;
        let size = if self.dual { n } else { d };
        let mut system = self.gram.clone();
        for i in 0..size {
            system[i * size + i] += lambda;
        }
        let w = if self.dual {
            let alpha = cholesky_solve(&system, n, &self.yc, k)?;
            let mut w = vec![0.0; d * k];
            for r in 0..n {
                for (j, xv) in self.xc[r * d..(r + 1) * d].iter().enumerate() {
                    for t in 0..k {
                        w[j * k + t] += xv * alpha[r * k + t];
                    }
                }
            }
            w
        } else {
            let mut rhs = vec![0.0; d * k];
            for r in 0..n {
                for (j, xv) in self.xc[r * d..(r + 1) * d].iter().enumerate() {
                    for t in 0..k {
                        rhs[j * k + t] += xv * self.yc[r * k + t];
                    }
                }
            }
            cholesky_solve(&system, d, &rhs, k)?
        };
        let intercepts = (0..k)
            .map(|t| self.mean_y[t] - (0..d).map(|j| self.mean_x[j] * w[j * k + t]).sum::<f64>())
            .collect();
        Ok((w, intercepts))
    }
}

fn check_inputs(
    x: &[Vec<f64>],
    targets: usize,
    labels_len: usize,
    opts: &RidgeOptions,
) -> Result<usize> {
    if opts.lambdas.is_empty() {
        return Err(Error::Invalid("empty λ grid".into()));
    }
    if let Some(bad) = opts.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Invalid(format!("λ must be positive, got {bad}")));
    }
    if opts.folds < 2 || x.len() < opts.folds {
        return Err(Error::Invalid(format!(
            "{} samples cannot form {} folds",
            x.len(),
            opts.folds
        )));
    }
    if labels_len != x.len() || targets == 0 {
        return Err(Error::Dimension("labels do not match feature rows".into()));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged feature rows".into()));
    }
    Ok(d)
}

/// Fits one model per target column (`labels[i][t]`), each with its own λ.
/// Targets are independent: the fit for column t depends only on column t.
pub fn train_ridge_multi(
    x: &[Vec<f64>],
    labels: &[Vec<f64>],
    emotions: &[Emotion],
    label_scale: f64,
    opts: &RidgeOptions,
) -> Result<Vec<RidgeModel>> {
    let k = emotions.len();
    let d = check_inputs(x, k, labels.len(), opts)?;
    if labels.iter().any(|l| l.len() != k) {
        return Err(Error::Dimension(
            "label rows must have one value per emotion".into(),
        ));
    }

    let indices: Vec<usize> = (0..x.len()).collect();
    let folds = kfold(&indices, opts.folds, opts.seed)?;
    let all_targets: Vec<usize> = (0..k).collect();

    // per fold: per λ, None if the system was singular, else per-target r
    let per_fold: Vec<Vec<Option<Vec<Option<f64>>>>> = folds
        .par_iter()
        .map(|held_out| {
            let mut in_fold = vec![false; x.len()];
            held_out.iter().for_each(|&i| in_fold[i] = true);
            let train_idx: Vec<usize> = (0..x.len()).filter(|&i| !in_fold[i]).collect();
            let train = RidgeProblem::new(x, labels, &all_targets, &train_idx);
            opts.lambdas
                .iter()
                .map(|&lambda| {
                    let (w, b) = match train.solve(lambda) {
                        Ok(sol) => sol,
                        Err(e) => {
                            log::warn!("ridge λ={lambda} skipped: {e}");
                            return None;
                        }
                    };
                    let rs = (0..k)
                        .map(|t| {
                            let preds: Vec<f64> = held_out
                                .iter()
                                .map(|&i| {
                                    b[t] + (0..d).map(|j| w[j * k + t] * x[i][j]).sum::<f64>()
                                })
                                .collect();
                            let gold: Vec<f64> = held_out.iter().map(|&i| labels[i][t]).collect();
                            pearson(&preds, &gold).ok()
                        })
                        .collect();
                    Some(rs)
                })
                .collect()
        })
        .collect();

    let usable: Vec<bool> = (0..opts.lambdas.len())
        .map(|li| per_fold.iter().all(|f| f[li].is_some()))
        .collect();
    let mut scores = vec![vec![Vec::new(); k]; opts.lambdas.len()];
    for fold in &per_fold {
        for (li, rs) in fold.iter().enumerate() {
            for (t, r) in rs.iter().flatten().enumerate() {
                if let Some(r) = r {
                    scores[li][t].push(*r);
                }
            }
        }
    }

    emotions
        .par_iter()
        .enumerate()
        .map(|(t, &emotion)| {
            let mut best: Option<(usize, Option<f64>)> = None;
            for li in (0..opts.lambdas.len()).filter(|&li| usable[li]) {
                let rs = &scores[li][t];
                let mean = (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64);
                let better = match (best, mean) {
                    (None, _) => true,
                    (Some((_, None)), Some(_)) => true,
                    (Some((_, Some(cur))), Some(m)) => m > cur,
                    _ => false,
                };
                if better {
                    best = Some((li, mean));
                }
            }
            let Some((li, cv_r)) = best else {
                return Err(Error::Singular {
                    what: "normal equations for every λ",
                    step: None,
                    cond: f64::INFINITY,
                });
            };
            let lambda = opts.lambdas[li];
            // refit on all rows for this target alone
            let (w, b) = RidgeProblem::new(x, labels, &[t], &indices).solve(lambda)?;
            Ok(RidgeModel {
                emotion,
                lambda,
                feature_dim: d,
                label_scale,
                cv_r,
                intercept: b[0],
                weights: w,
            })
        })
        .collect()
}

/// Single-emotion ridge with cross-validated λ.
pub fn train_ridge(
    x: &[Vec<f64>],
    y: &[f64],
    emotion: Emotion,
    label_scale: f64,
    opts: &RidgeOptions,
) -> Result<RidgeModel> {
    let labels: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
    let mut models = train_ridge_multi(x, &labels, &[emotion], label_scale, opts)?;
    Ok(models.remove(0))
}

/// The six per-emotion models plus the feature configuration they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct VerseModel {
    pub poly_degree: Option<usize>,
    pub models: Vec<RidgeModel>,
}

const MODEL_HEADER: &str = "# emodyn ridge v1";

impl VerseModel {
    pub fn model(&self, e: Emotion) -> Option<&RidgeModel> {
        self.models.iter().find(|m| m.emotion == e)
    }

    /// Predictions for each row, `[row][emotion]` in fixed emotion order.
    pub fn predict_all(&self, rows: &[Vec<f64>], clamp: bool) -> Result<Vec<[f64; 6]>> {
        let mut out = vec![[0.0; 6]; rows.len()];
        for e in Emotion::ALL {
            let model = self
                .model(e)
                .ok_or_else(|| Error::Invalid(format!("no model for {e}")))?;
            for (slot, v) in out.iter_mut().zip(model.predict(rows, clamp)?) {
                slot[e.index()] = v;
            }
        }
        Ok(out)
    }

    pub fn to_tsv(&self) -> String {
        let degree = self
            .poly_degree
            .map_or("none".to_string(), |p| p.to_string());
        let mut out = format!(
            "{MODEL_HEADER} degree={degree}\nemotion\tlambda\tfeature_dim\tlabel_scale\tcv_r\tintercept\tweights\n"
        );
        for m in &self.models {
            let cv = m.cv_r.map_or("undefined".to_string(), |r| r.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}",
                m.emotion, m.lambda, m.feature_dim, m.label_scale, cv, m.intercept
            ));
            for w in &m.weights {
                out.push_str(&format!("\t{w}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix(MODEL_HEADER))
            .ok_or_else(|| Error::parse(source_name, 1, "missing ridge model header"))?;
        let poly_degree = match header.trim().strip_prefix("degree=") {
            Some("none") => None,
            Some(p) => Some(
                p.parse::<usize>()
                    .map_err(|_| Error::parse(source_name, 1, "bad degree"))?,
            ),
            None => return Err(Error::parse(source_name, 1, "header needs degree=")),
        };
        let num = |field: &str, line: usize, what: &str| -> Result<f64> {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source_name, line, format!("bad {what} `{field}`")))
        };
        let mut models: Vec<RidgeModel> = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.starts_with("emotion\t") || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 6 {
                return Err(Error::parse(source_name, lineno, "too few columns"));
            }
            let emotion: Emotion = fields[0]
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, "unknown emotion"))?;
            let feature_dim: usize = fields[2]
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, "bad feature_dim"))?;
            if fields.len() != 6 + feature_dim {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("expected {feature_dim} weights, found {}", fields.len() - 6),
                ));
            }
            let lambda = num(fields[1], lineno, "lambda")?;
            if lambda <= 0.0 {
                return Err(Error::parse(source_name, lineno, "lambda must be positive"));
            }
            let cv_r = match fields[4] {
                "undefined" => None,
                f => Some(num(f, lineno, "cv_r")?),
            };
            let weights = fields[6..]
                .iter()
                .map(|f| num(f, lineno, "weight"))
                .collect::<Result<Vec<f64>>>()?;
            if models.iter().any(|m| m.emotion == emotion) {
                return Err(Error::parse(source_name, lineno, "duplicate emotion"));
            }
            models.push(RidgeModel {
                emotion,
                lambda,
                feature_dim,
                label_scale: num(fields[3], lineno, "label_scale")?,
                cv_r,
                intercept: num(fields[5], lineno, "intercept")?,
                weights,
            });
        }
        if models.is_empty() {
            return Err(Error::Empty(format!("{source_name}: no models")));
        }
        Ok(VerseModel {
            poly_degree,
            models,
        })
    }
}

/// Verse-level scores of one song, `[verse][emotion]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SongPredictions {
    pub song_id: String,
    pub verse_ids: Vec<String>,
    pub scores: Vec<[f64; 6]>,
}

impl SongPredictions {
    pub fn series(&self, e: Emotion) -> Vec<f64> {
        self.scores.iter().map(|s| s[e.index()]).collect()
    }
}

pub const PREDICTIONS_HEADER: &str =
    "song_id\tverse_id\tanger\tdisgust\tfear\tjoy\tsadness\tsurprise";

pub fn write_predictions(songs: &[SongPredictions]) -> String {
    let mut out = format!("{PREDICTIONS_HEADER}\n");
    for song in songs {
        for (vid, row) in song.verse_ids.iter().zip(&song.scores) {
            out.push_str(&song.song_id);
            out.push('\t');
            out.push_str(vid);
            for v in row {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Rows of one song must be contiguous; songs keep file order.
pub fn parse_predictions(text: &str, source_name: &str) -> Result<Vec<SongPredictions>> {
    let mut songs: Vec<SongPredictions> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == PREDICTIONS_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                source_name,
                lineno,
                format!("expected 8 columns, found {}", fields.len()),
            ));
        }
        let mut row = [0.0; 6];
        for (slot, f) in row.iter_mut().zip(&fields[2..]) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source_name, lineno, format!("bad score `{f}`")))?;
        }
        let (song_id, verse_id) = (fields[0], fields[1]);
        if song_id.is_empty() {
            return Err(Error::parse(source_name, lineno, "empty song_id"));
        }
        match songs.last_mut() {
            Some(last) if last.song_id == song_id => {
                last.verse_ids.push(verse_id.to_string());
                last.scores.push(row);
            }
            _ => {
                if !seen.insert(song_id.to_string()) {
                    return Err(Error::parse(
                        source_name,
                        lineno,
                        format!("rows of song {song_id} are not contiguous"),
                    ));
                }
                songs.push(SongPredictions {
                    song_id: song_id.to_string(),
                    verse_ids: vec![verse_id.to_string()],
                    scores: vec![row],
                });
            }
        }
    }
    Ok(songs)
}
