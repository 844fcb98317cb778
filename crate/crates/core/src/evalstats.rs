//! Correlation metrics, the Williams test and song-level fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Emotion;
use crate::error::{Error, Result};

/// Sample Pearson correlation. Zero variance in either input is an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "pearson over {} and {} values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} paired values",
            x.len()
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilliamsResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Williams' t for two dependent correlations sharing variable 3.
///
/// `r13`, `r23`: each predictor against the gold labels; `r12`: between the
/// two predictors; `n`: number of paired observations.
pub fn williams_test(r13: f64, r23: f64, r12: f64, n: usize) -> Result<WilliamsResult> {
    for (name, r) in [("r13", r13), ("r23", r23), ("r12", r12)] {
        if !(r.abs() < 1.0) {
            return Err(Error::Invalid(format!("{name} = {r} must lie in (-1, 1)")));
        }
    }
    if n < 4 {
        return Err(Error::Invalid(format!(
            "williams test needs n >= 4, got {n}"
        )));
    }
    let k = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
    if !(k > 0.0) {
        return Err(Error::Invalid(format!(
            "inconsistent correlations (determinant {k})"
        )));
    }
    let nf = n as f64;
    let rbar = 0.5 * (r13 + r23);
    let num = (nf - 1.0) * (1.0 + r12);
    let den = 2.0 * k * (nf - 1.0) / (nf - 3.0) + rbar * rbar * (1.0 - r12).powi(3);
    let t = (r13 - r23) * (num / den).sqrt();
    let df = nf - 3.0;
    Ok(WilliamsResult {
        t,
        df,
        p: student_t_two_sided_p(t, df),
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Student-t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Shuffles `items` with `seed` and cuts them into `k` folds whose sizes
/// differ by at most one.
pub fn kfold<T: Clone>(items: &[T], k: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if k == 0 || k > items.len() {
        return Err(Error::Invalid(format!(
            "cannot split {} items into {k} folds",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (items.len() / k, items.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(
            order[pos..pos + size]
                .iter()
                .map(|&i| items[i].clone())
                .collect(),
        );
        pos += size;
    }
    Ok(folds)
}

/// Song-level folds for cross-validated parameter fitting.
pub fn kfold_songs(song_ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    kfold(song_ids, k, seed)
}

/// Correlation against gold for one emotion; `None` when undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionEval {
    pub emotion: Emotion,
    pub r: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: Vec<EmotionEval>,
    /// Per-song rows, `(song_id, evals)`; filled only on request.
    pub per_song: Vec<(String, Vec<EmotionEval>)>,
}

/// Predictions and gold for one song, indexed `[verse][emotion]`.
#[derive(Debug, Clone)]
pub struct SongScores<'a> {
    pub song_id: &'a str,
    pub predicted: &'a [[f64; 6]],
    pub gold: &'a [[f64; 6]],
}

fn correlate(pred: &[f64], gold: &[f64]) -> Result<Option<f64>> {
    match pearson(pred, gold) {
        Ok(r) => Ok(Some(r)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Pooled per-emotion Pearson over every verse of every song.
pub fn evaluate(songs: &[SongScores<'_>], per_song: bool) -> Result<EvalReport> {
    for s in songs {
        if s.predicted.len() != s.gold.len() {
            return Err(Error::Dimension(format!(
                "song {}: {} predictions for {} gold verses",
                s.song_id,
                s.predicted.len(),
                s.gold.len()
            )));
        }
    }
    let column =
        |rows: &[[f64; 6]], e: Emotion| -> Vec<f64> { rows.iter().map(|r| r[e.index()]).collect() };
    let all_pred: Vec<[f64; 6]> = songs
        .iter()
        .flat_map(|s| s.predicted.iter().copied())
        .collect();
    let all_gold: Vec<[f64; 6]> = songs.iter().flat_map(|s| s.gold.iter().copied()).collect();

    let mut overall = Vec::with_capacity(6);
    for e in Emotion::ALL {
        overall.push(EmotionEval {
            emotion: e,
            r: correlate(&column(&all_pred, e), &column(&all_gold, e))?,
            n: all_pred.len(),
        });
    }
    let mut rows = Vec::new();
    if per_song {
        for s in songs {
            let mut evals = Vec::with_capacity(6);
            for e in Emotion::ALL {
                evals.push(EmotionEval {
                    emotion: e,
                    r: correlate(&column(s.predicted, e), &column(s.gold, e))?,
                    n: s.predicted.len(),
                });
            }
            rows.push((s.song_id.to_string(), evals));
        }
    }
    Ok(EvalReport {
        overall,
        per_song: rows,
    })
}

fn fmt_r(r: Option<f64>) -> String {
    r.map_or("undefined".to_string(), |v| v.to_string())
}

impl EvalReport {
    pub fn r(&self, e: Emotion) -> Option<f64> {
        self.overall[e.index()].r
    }

    /// `scope,emotion,r,n` with scope `all` or a song id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scope,emotion,r,n\n");
        for ev in &self.overall {
            out.push_str(&format!("all,{},{},{}\n", ev.emotion, fmt_r(ev.r), ev.n));
        }
        for (song, evals) in &self.per_song {
            for ev in evals {
                out.push_str(&format!("{song},{},{},{}\n", ev.emotion, fmt_r(ev.r), ev.n));
            }
        }
        out
    }
}
