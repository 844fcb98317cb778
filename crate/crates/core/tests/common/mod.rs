#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use emodyn::pipeline::track;
use emodyn::ssm::{simulate, GaussianBelief, Simulation, SsmParams};

/// Univariate problem for the joint-Gaussian oracle.
#[derive(Debug, Clone)]
pub struct Scalar {
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
}

impl Scalar {
    pub fn params(&self) -> SsmParams {
        SsmParams::scalar(self.a, self.c, self.q, self.r).unwrap()
    }

    pub fn init(&self) -> GaussianBelief {
        GaussianBelief::scalar(self.m0, self.p0).unwrap()
    }
}

/// Posterior mean and variance of `z_t` (1-based) given `y_1..y_upto`, by
/// writing `(z_0..z_T, y_1..y_T)` as an affine map of independent standard
/// normals and conditioning the joint Gaussian directly.
pub fn joint_posterior(p: &Scalar, ys: &[f64], t: usize, upto: usize) -> (f64, f64) {
    let big_t = ys.len();
    // noise sources: e_0 (z_0), e_1..e_T (process), d_1..d_T (observation)
    let k = 1 + 2 * big_t;
    let mut z_load = vec![DVector::<f64>::zeros(k); big_t + 1];
    let mut z_mean = vec![0.0; big_t + 1];
    z_load[0][0] = p.p0.sqrt();
    z_mean[0] = p.m0;
    for s in 1..=big_t {
        z_load[s] = &z_load[s - 1] * p.a;
        z_load[s][s] += p.q.sqrt();
        z_mean[s] = p.a * z_mean[s - 1];
    }
    let y_load: Vec<DVector<f64>> = (1..=upto)
        .map(|s| {
            let mut l = &z_load[s] * p.c;
            l[big_t + s] += p.r.sqrt();
            l
        })
        .collect();
    let y_mean: Vec<f64> = (1..=upto).map(|s| p.c * z_mean[s]).collect();

    let syy = DMatrix::from_fn(upto, upto, |i, j| y_load[i].dot(&y_load[j]));
    let szy = DVector::from_fn(upto, |i, _| z_load[t].dot(&y_load[i]));
    let resid = DVector::from_fn(upto, |i, _| ys[i] - y_mean[i]);
    let inv = syy
        .try_inverse()
        .expect("observation covariance invertible");
    let gain = inv * &szy;
    (
        z_mean[t] + gain.dot(&resid),
        z_load[t].dot(&z_load[t]) - szy.dot(&gain),
    )
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// 100 songs of 50 verses: random-walk latent from N(5, 2), Q = 1, R = 5.
/// Song i is simulated with seed 4000 + i.
pub fn benchmark_songs() -> Vec<Simulation> {
    let truth = SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap();
    let start = GaussianBelief::scalar(5.0, 2.0).unwrap();
    (0..100)
        .map(|i| simulate(&truth, &start, 50, 4000 + i).unwrap())
        .collect()
}

/// Per-song (smoothed r, observation r) against the latent.
pub fn benchmark_scores(songs: &[Simulation], params: &SsmParams) -> Vec<(f64, f64)> {
    songs
        .iter()
        .map(|s| {
            let t = track(&s.observed, params, true).unwrap();
            (
                pearson(&t.means, &s.latent),
                pearson(&s.observed, &s.latent),
            )
        })
        .collect()
}

pub fn mean_smoothed_r(scores: &[(f64, f64)]) -> f64 {
    scores.iter().map(|s| s.0).sum::<f64>() / scores.len() as f64
}
