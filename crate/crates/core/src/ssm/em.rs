//! Expectation-maximisation for `(A, C, Q, R)`.
//!
//! The E-step smooths every sequence back to `z_0` and collects the usual
//! first and second moments, including the lag-one cross covariances. The
//! M-step is the closed-form maximiser of the expected complete-data
//! log-likelihood, pooled over sequences. Initial beliefs stay fixed unless
//! [`ParamSubset::initial`] is set.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::kalman::{backward_step, sequence_len, smooth, SmoothOutput};
use super::{check_belief, GaussianBelief, SsmParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Smallest variance EM will produce for Q, R (and updated initial covariances).
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Which parameters the M-step re-estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSubset {
    pub a: bool,
    pub c: bool,
    pub q: bool,
    pub r: bool,
    /// Per-sequence initial beliefs. Off by default.
    pub initial: bool,
}

impl Default for ParamSubset {
    fn default() -> Self {
        ParamSubset {
            a: true,
            c: true,
            q: true,
            r: true,
            initial: false,
        }
    }
}

impl ParamSubset {
    pub fn none() -> Self {
        ParamSubset {
            a: false,
            c: false,
            q: false,
            r: false,
            initial: false,
        }
    }
}

impl FromStr for ParamSubset {
    type Err = Error;

    /// Comma separated names out of `A, C, Q, R, init`, or `all` / `none`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(ParamSubset::default());
        }
        let mut out = ParamSubset::none();
        if s.eq_ignore_ascii_case("none") || s.is_empty() {
            return Ok(out);
        }
        for part in s.split(',') {
            match part.trim().to_ascii_lowercase().as_str() {
                "a" => out.a = true,
                "c" => out.c = true,
                "q" => out.q = true,
                "r" => out.r = true,
                "init" | "initial" => out.initial = true,
                other => {
                    return Err(Error::Invalid(format!("unknown EM parameter `{other}`")));
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ParamSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.a, "A"),
            (self.c, "C"),
            (self.q, "Q"),
            (self.r, "R"),
            (self.initial, "init"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join(","))
        }
    }
}

/// One training sequence with its own initial belief.
#[derive(Debug, Clone)]
pub struct EmSequence<'a> {
    pub ys: &'a [f64],
    pub init: GaussianBelief,
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: SsmParams,
    /// Log-likelihood before each M-step, then once more for the final parameters.
    pub loglik_trace: Vec<f64>,
    /// Initial beliefs after fitting (unchanged unless `initial` was selected).
    pub initial: Vec<GaussianBelief>,
    pub diagnostics: Vec<String>,
}

/// Lag-one posterior cross covariances `Cov(z_t, z_{t−1} | y_{1:T})` for
/// t = 1..T, where `z_0` is the initial-belief state.
///
/// Uses the backward recursion seeded with `(I − K_T C) A Σ_{T−1|T−1}`.
pub fn lag_one_covariances(
    out: &SmoothOutput,
    init: &GaussianBelief,
    params: &SsmParams,
) -> Result<Vec<Matrix>> {
    let steps = out.smoothed.len();
    let a = params.a();
    let n = params.state_dim();

    // filtered covariances with z_0 at index 0
    let filt = |k: usize| -> &Matrix {
        if k == 0 {
            &init.cov
        } else {
            &out.filter.filtered[k - 1].cov
        }
    };
    let (_, j0) = backward_step(init, &out.filter.predicted[0], &out.smoothed[0], params)?;
    let gain = |k: usize| -> &Matrix {
        if k == 0 {
            &j0
        } else {
            &out.gains[k - 1].gain
        }
    };

    let mut cross = vec![Matrix::zeros(n, n); steps + 1];
    let k_last = &out.filter.stats[steps - 1].gain;
    let i_minus_kc = &Matrix::identity(n) - &(k_last * params.c());
    cross[steps] = &(&i_minus_kc * a) * filt(steps - 1);
    for k in (2..=steps).rev() {
        let jt = gain(k - 2).transpose();
        let inner = &cross[k] - &(a * filt(k - 1));
        cross[k - 1] = &(filt(k - 1) * &jt) + &(&(gain(k - 1) * &inner) * &jt);
    }
    cross.remove(0);
    Ok(cross)
}

#[derive(Debug, Clone)]
struct Moments {
    syy: Matrix,
    syz: Matrix,
    /// Σ_{t=1..T} E[z_t z_tᵀ]
    szz: Matrix,
    /// Σ_{t=1..T} E[z_t z_{t−1}ᵀ]
    s10: Matrix,
    /// Σ_{t=0..T−1} E[z_t z_tᵀ]
    s00: Matrix,
    count: usize,
    initial: GaussianBelief,
    loglik: f64,
}

impl Moments {
    fn zero(n: usize, m: usize, initial: GaussianBelief) -> Self {
        Moments {
            syy: Matrix::zeros(m, m),
            syz: Matrix::zeros(m, n),
            szz: Matrix::zeros(n, n),
            s10: Matrix::zeros(n, n),
            s00: Matrix::zeros(n, n),
            count: 0,
            initial,
            loglik: 0.0,
        }
    }

    fn absorb(&mut self, other: &Moments) {
        self.syy = &self.syy + &other.syy;
        self.syz = &self.syz + &other.syz;
        self.szz = &self.szz + &other.szz;
        self.s10 = &self.s10 + &other.s10;
        self.s00 = &self.s00 + &other.s00;
        self.count += other.count;
        self.loglik += other.loglik;
    }
}

fn second_moment(b: &GaussianBelief) -> Matrix {
    &b.cov + &(&b.mean * &b.mean.transpose())
}

fn expectations(ys: &[f64], params: &SsmParams, init: &GaussianBelief) -> Result<Moments> {
    let out = smooth(ys, params, init)?;
    let (z0, _) = backward_step(init, &out.filter.predicted[0], &out.smoothed[0], params)?;
    let cross = lag_one_covariances(&out, init, params)?;

    let (n, m) = (params.state_dim(), params.obs_dim());
    let mut mom = Moments::zero(n, m, z0.clone());
    mom.loglik = out.filter.loglik;
    mom.count = out.smoothed.len();

    let mut prev = &z0;
    for ((y, cur), lag) in ys.chunks_exact(m).zip(&out.smoothed).zip(&cross) {
        let y = Matrix::column(y);
        mom.syy = &mom.syy + &(&y * &y.transpose());
        mom.syz = &mom.syz + &(&y * &cur.mean.transpose());
        mom.szz = &mom.szz + &second_moment(cur);
        mom.s00 = &mom.s00 + &second_moment(prev);
        mom.s10 = &mom.s10 + &(lag + &(&cur.mean * &prev.mean.transpose()));
        prev = cur;
    }
    Ok(mom)
}

fn floor_variances(cov: Matrix, name: &str, diagnostics: &mut Vec<String>) -> Matrix {
    let mut cov = cov.symmetrized();
    let mut floored = false;
    for i in 0..cov.rows() {
        if !(cov[(i, i)] >= VARIANCE_FLOOR) {
            cov[(i, i)] = VARIANCE_FLOOR;
            floored = true;
        }
    }
    if floored {
        diagnostics.push(format!("{name} variance floored at {VARIANCE_FLOOR:e}"));
    }
    cov
}

/// `(S − B Xᵀ − X Bᵀ + B W Bᵀ) / count`: expected residual covariance for
/// the linear map `B` given second moments `S`, cross moments `X` and
/// regressor moments `W`.
fn residual_cov(s: &Matrix, x: &Matrix, w: &Matrix, b: &Matrix, count: usize) -> Matrix {
    let bxt = b * &x.transpose();
    let total = &(&(s - &bxt) - &bxt.transpose()) + &(&(b * w) * &b.transpose());
    total.scale(1.0 / count as f64)
}

fn all_sequences_expectations(
    sequences: &[EmSequence<'_>],
    inits: &[GaussianBelief],
    params: &SsmParams,
) -> Result<Vec<Moments>> {
    sequences
        .par_iter()
        .zip(inits.par_iter())
        .enumerate()
        .map(|(i, (seq, init))| {
            expectations(seq.ys, params, init).map_err(|e| e.context(format!("sequence {i}")))
        })
        .collect()
}

/// Fits the selected parameters by `n_iter` EM iterations.
pub fn em_fit(
    sequences: &[EmSequence<'_>],
    init_params: &SsmParams,
    n_iter: usize,
    which: ParamSubset,
) -> Result<EmFit> {
    if sequences.is_empty() {
        return Err(Error::Empty("no sequences for EM".into()));
    }
    for (i, seq) in sequences.iter().enumerate() {
        check_belief(&seq.init, init_params).map_err(|e| e.context(format!("sequence {i}")))?;
        sequence_len(seq.ys, init_params).map_err(|e| e.context(format!("sequence {i}")))?;
    }

    let (n, m) = (init_params.state_dim(), init_params.obs_dim());
    let mut params = init_params.clone();
    let mut inits: Vec<GaussianBelief> = sequences.iter().map(|s| s.init.clone()).collect();
    let mut trace = Vec::with_capacity(n_iter + 1);
    let mut diagnostics = Vec::new();

    for _ in 0..n_iter {
        let per_seq = all_sequences_expectations(sequences, &inits, &params)?;
        // fixed-order reduction keeps the fit bitwise reproducible
        let mut total = Moments::zero(n, m, per_seq[0].initial.clone());
        for mom in &per_seq {
            total.absorb(mom);
        }
        trace.push(total.loglik);

        let mut a = params.a().clone();
        let mut c = params.c().clone();
        let mut q = params.q().clone();
        let mut r = params.r().clone();

        if which.a {
            match total.s00.inverse() {
                Ok(inv) => a = &total.s10 * &inv.matrix,
                Err(_) => diagnostics.push("A kept: singular state second moment".into()),
            }
        }
        if which.q {
            let est = residual_cov(&total.szz, &total.s10, &total.s00, &a, total.count);
            q = floor_variances(est, "Q", &mut diagnostics);
        }
        if which.c {
            match total.szz.inverse() {
                Ok(inv) => c = &total.syz * &inv.matrix,
                Err(_) => diagnostics.push("C kept: singular state second moment".into()),
            }
        }
        if which.r {
            let est = residual_cov(&total.syy, &total.syz, &total.szz, &c, total.count);
            r = floor_variances(est, "R", &mut diagnostics);
        }
        if which.initial {
            for (init, mom) in inits.iter_mut().zip(&per_seq) {
                *init = GaussianBelief {
                    mean: mom.initial.mean.clone(),
                    cov: floor_variances(mom.initial.cov.clone(), "initial", &mut diagnostics),
                };
            }
        }
        params = SsmParams::new(a, c, q, r)?;
    }

    let final_ll: f64 = sequences
        .par_iter()
        .zip(inits.par_iter())
        .map(|(seq, init)| super::log_likelihood(seq.ys, &params, init))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    trace.push(final_ll);
    diagnostics.dedup();

    Ok(EmFit {
        params,
        loglik_trace: trace,
        initial: inits,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::simulate;

    fn anchored(ys: &[f64]) -> EmSequence<'_> {
        EmSequence {
            ys,
            init: GaussianBelief::anchored(&ys[..1], 2.0).unwrap(),
        }
    }

    #[test]
    fn zero_iterations_return_initial_parameters() {
        let ys = [1.0, 2.0, 1.5];
        let params = SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap();
        let fit = em_fit(&[anchored(&ys)], &params, 0, ParamSubset::default()).unwrap();
        assert_eq!(fit.params, params);
        assert_eq!(fit.loglik_trace.len(), 1);
    }

    #[test]
    fn lag_one_recursion_matches_closed_form() {
        let params = SsmParams::scalar(0.8, 1.3, 0.7, 2.0).unwrap();
        let init = GaussianBelief::scalar(0.5, 2.0).unwrap();
        let ys = [0.3, 1.9, -0.4, 2.2, 0.8, 1.1];
        let out = smooth(&ys, &params, &init).unwrap();
        let cross = lag_one_covariances(&out, &init, &params).unwrap();
        assert_eq!(cross.len(), ys.len());
        // Cov(z_t, z_{t-1} | Y) = Σ_{t|T} J_{t-1}ᵀ
        let (_, j0) =
            backward_step(&init, &out.filter.predicted[0], &out.smoothed[0], &params).unwrap();
        for (t, c) in cross.iter().enumerate() {
            let j = if t == 0 { &j0 } else { &out.gains[t - 1].gain };
            let expect = &out.smoothed[t].cov * &j.transpose();
            assert!((c.value() - expect.value()).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn trace_is_monotone_on_short_sequences() {
        let params = SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap();
        let data = [vec![1.0, 3.0, 2.0, 5.0], vec![2.0], vec![0.0, -1.0, 0.5]];
        let seqs: Vec<_> = data.iter().map(|ys| anchored(ys)).collect();
        let fit = em_fit(&seqs, &params, 15, ParamSubset::default()).unwrap();
        assert_eq!(fit.loglik_trace.len(), 16);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{w:?}");
        }
    }

    #[test]
    fn constant_observations_floor_noise() {
        let ys = [3.0; 6];
        let params = SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap();
        let subset: ParamSubset = "Q,R".parse().unwrap();
        let fit = em_fit(&[anchored(&ys), anchored(&ys)], &params, 200, subset).unwrap();
        assert!(fit.params.q().value() >= VARIANCE_FLOOR);
        assert!(fit.params.r().value() >= VARIANCE_FLOOR);
        assert!(fit.params.q().value() < 1e-2);
    }

    #[test]
    fn initial_beliefs_frozen_by_default() {
        let sim = simulate(
            &SsmParams::scalar(0.9, 1.0, 0.5, 2.0).unwrap(),
            &GaussianBelief::scalar(0.0, 1.0).unwrap(),
            20,
            3,
        )
        .unwrap();
        let seq = anchored(&sim.observed);
        let fit = em_fit(
            std::slice::from_ref(&seq),
            &SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap(),
            3,
            ParamSubset::default(),
        )
        .unwrap();
        assert_eq!(fit.initial[0], seq.init);

        let with_init = ParamSubset {
            initial: true,
            ..ParamSubset::default()
        };
        let fit = em_fit(
            std::slice::from_ref(&seq),
            &SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap(),
            3,
            with_init,
        )
        .unwrap();
        assert_ne!(fit.initial[0], seq.init);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
    }

    #[test]
    fn subset_parsing() {
        let s: ParamSubset = "A, q,R".parse().unwrap();
        assert!(s.a && s.q && s.r && !s.c && !s.initial);
        assert_eq!(s.to_string(), "A,Q,R");
        assert_eq!(
            "all".parse::<ParamSubset>().unwrap(),
            ParamSubset::default()
        );
        assert!("B".parse::<ParamSubset>().is_err());
    }

    #[test]
    fn empty_sequence_list_is_rejected() {
        let params = SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap();
        assert!(em_fit(&[], &params, 1, ParamSubset::default()).is_err());
    }
}
