use std::f64::consts::PI;

use super::{check_belief, FilterStepStats, GaussianBelief, SmoothStepStats, SsmParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// `ẑ_{t|t−1}, Σ_{t|t−1}` for t = 1..T.
    pub predicted: Vec<GaussianBelief>,
    /// `ẑ_{t|t}, Σ_{t|t}` for t = 1..T.
    pub filtered: Vec<GaussianBelief>,
    pub stats: Vec<FilterStepStats>,
    /// Innovation-form log-likelihood of the whole sequence.
    pub loglik: f64,
}

/// Output of a forward-backward pass.
#[derive(Debug, Clone)]
pub struct SmoothOutput {
    /// `ẑ_{t|T}, Σ_{t|T}` for t = 1..T.
    pub smoothed: Vec<GaussianBelief>,
    /// `J_t` for t = 1..T−1.
    pub gains: Vec<SmoothStepStats>,
    pub filter: FilterOutput,
}

/// One-step-ahead prediction.
pub fn predict_step(prior: &GaussianBelief, params: &SsmParams) -> Result<GaussianBelief> {
    check_belief(prior, params)?;
    let a = params.a();
    let mean = a * &prior.mean;
    let cov = &(&(a * &prior.cov) * &a.transpose()) + params.q();
    Ok(GaussianBelief {
        mean,
        cov: cov.symmetrized(),
    })
}

/// Measurement update against observation `y` (length m).
pub fn update_step(
    predicted: &GaussianBelief,
    y: &[f64],
    params: &SsmParams,
) -> Result<(GaussianBelief, FilterStepStats)> {
    check_belief(predicted, params)?;
    if y.len() != params.obs_dim() {
        return Err(Error::Dimension(format!(
            "observation of length {} for observation dimension {}",
            y.len(),
            params.obs_dim()
        )));
    }
    let (belief, stats, _) = update_inner(predicted, y, params)?;
    Ok((belief, stats))
}

/// Update plus the step's log-density contribution.
fn update_inner(
    predicted: &GaussianBelief,
    y: &[f64],
    params: &SsmParams,
) -> Result<(GaussianBelief, FilterStepStats, f64)> {
    let c = params.c();
    let ct = c.transpose();
    let residual = &Matrix::column(y) - &(c * &predicted.mean);
    let cov_ct = &predicted.cov * &ct;
    let innovation_cov = (&(c * &cov_ct) + params.r()).symmetrized();
    let inv = innovation_cov.inverse()?;
    let gain = &cov_ct * &inv.matrix;

    let mean = &predicted.mean + &(&gain * &residual);
    let n = params.state_dim();
    let cov = &(&Matrix::identity(n) - &(&gain * c)) * &predicted.cov;

    let mahalanobis = (&(&residual.transpose() * &inv.matrix) * &residual).value();
    let m = params.obs_dim() as f64;
    let logdens = -0.5 * (m * (2.0 * PI).ln() + inv.log_abs_det + mahalanobis);

    Ok((
        GaussianBelief {
            mean,
            cov: cov.symmetrized(),
        },
        FilterStepStats {
            residual,
            innovation_cov,
            gain,
        },
        logdens,
    ))
}

pub(crate) fn sequence_len(ys: &[f64], params: &SsmParams) -> Result<usize> {
    let m = params.obs_dim();
    if ys.is_empty() {
        return Err(Error::Empty("observation sequence".into()));
    }
    if !ys.len().is_multiple_of(m) {
        return Err(Error::Dimension(format!(
            "{} values do not split into observations of length {m}",
            ys.len()
        )));
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(
            "observation sequence has non-finite values".into(),
        ));
    }
    Ok(ys.len() / m)
}

fn at_step(err: Error, t: usize) -> Error {
    match err {
        Error::Singular {
            what,
            step: None,
            cond,
        } => Error::Singular {
            what,
            step: Some(t),
            cond,
        },
        other => other,
    }
}

/// Kalman filter over a full sequence.
pub fn filter(ys: &[f64], params: &SsmParams, init: &GaussianBelief) -> Result<FilterOutput> {
    check_belief(init, params)?;
    let steps = sequence_len(ys, params)?;
    let m = params.obs_dim();

    let mut predicted = Vec::with_capacity(steps);
    let mut filtered = Vec::with_capacity(steps);
    let mut stats = Vec::with_capacity(steps);
    let mut loglik = 0.0;

    let mut belief = init.clone();
    for (t, y) in ys.chunks_exact(m).enumerate() {
        let prior = predict_step(&belief, params)?;
        let (post, step, logdens) = update_inner(&prior, y, params).map_err(|e| {
            at_step(
                match e {
                    Error::Singular { step, cond, .. } => Error::Singular {
                        what: "innovation covariance",
                        step,
                        cond,
                    },
                    other => other,
                },
                t + 1,
            )
        })?;
        loglik += logdens;
        predicted.push(prior);
        stats.push(step);
        belief = post.clone();
        filtered.push(post);
    }

    Ok(FilterOutput {
        predicted,
        filtered,
        stats,
        loglik,
    })
}

/// Log-likelihood of `ys` under the model (innovation decomposition).
pub fn log_likelihood(ys: &[f64], params: &SsmParams, init: &GaussianBelief) -> Result<f64> {
    Ok(filter(ys, params, init)?.loglik)
}

/// One RTS backward step from `next_smoothed` onto `filtered`, given the
/// prediction `next_predicted` made from `filtered`.
pub(crate) fn backward_step(
    filtered: &GaussianBelief,
    next_predicted: &GaussianBelief,
    next_smoothed: &GaussianBelief,
    params: &SsmParams,
) -> Result<(GaussianBelief, Matrix)> {
    let inv = next_predicted.cov.inverse().map_err(|e| match e {
        Error::Singular { step, cond, .. } => Error::Singular {
            what: "predicted covariance",
            step,
            cond,
        },
        other => other,
    })?;
    let gain = &(&filtered.cov * &params.a().transpose()) * &inv.matrix;
    let mean = &filtered.mean + &(&gain * &(&next_smoothed.mean - &next_predicted.mean));
    let cov = &filtered.cov
        + &(&(&gain * &(&next_smoothed.cov - &next_predicted.cov)) * &gain.transpose());
    Ok((
        GaussianBelief {
            mean,
            cov: cov.symmetrized(),
        },
        gain,
    ))
}

/// Rauch–Tung–Striebel smoother: a full forward filter followed by the backward pass.
pub fn smooth(ys: &[f64], params: &SsmParams, init: &GaussianBelief) -> Result<SmoothOutput> {
    let filter_out = filter(ys, params, init)?;
    let steps = filter_out.filtered.len();

    let mut smoothed = filter_out.filtered.clone();
    let mut gains = vec![
        SmoothStepStats {
            gain: Matrix::zeros(params.state_dim(), params.state_dim()),
        };
        steps.saturating_sub(1)
    ];
    for t in (0..steps.saturating_sub(1)).rev() {
        let (belief, gain) = backward_step(
            &filter_out.filtered[t],
            &filter_out.predicted[t + 1],
            &smoothed[t + 1],
            params,
        )
        .map_err(|e| at_step(e, t + 1))?;
        smoothed[t] = belief;
        gains[t] = SmoothStepStats { gain };
    }

    Ok(SmoothOutput {
        smoothed,
        gains,
        filter: filter_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> SsmParams {
        SsmParams::scalar(1.0, 1.0, 1.0, 5.0).unwrap()
    }

    fn belief(m: f64, v: f64) -> GaussianBelief {
        GaussianBelief::scalar(m, v).unwrap()
    }

    #[test]
    fn predict_examples() {
        let p = predict_step(&belief(0.0, 2.0), &defaults()).unwrap();
        assert_eq!((p.mean.value(), p.cov.value()), (0.0, 3.0));

        let params = SsmParams::scalar(0.5, 1.0, 1.0, 5.0).unwrap();
        let p = predict_step(&belief(2.0, 2.0), &params).unwrap();
        assert_eq!((p.mean.value(), p.cov.value()), (1.0, 1.5));
    }

    #[test]
    fn predict_identity_without_noise_is_noop() {
        let params = SsmParams::new(
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            Matrix::identity(2),
        )
        .unwrap();
        let cov = Matrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let prior = GaussianBelief::new(&[1.0, -3.0], cov).unwrap();
        assert_eq!(predict_step(&prior, &params).unwrap(), prior);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let prior = GaussianBelief::new(&[1.0, 2.0], Matrix::identity(2)).unwrap();
        assert!(matches!(
            predict_step(&prior, &defaults()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn update_example() {
        let (post, stats) = update_step(&belief(0.0, 3.0), &[1.0], &defaults()).unwrap();
        assert!((post.mean.value() - 0.375).abs() < 1e-15);
        assert!((post.cov.value() - 1.875).abs() < 1e-15);
        assert_eq!(stats.residual.value(), 1.0);
        assert_eq!(stats.innovation_cov.value(), 8.0);
        assert_eq!(stats.gain.value(), 0.375);
    }

    #[test]
    fn update_trusts_noiseless_observation() {
        let params = SsmParams::scalar(1.0, 1.0, 1.0, 1e-12).unwrap();
        let (post, _) = update_step(&belief(0.0, 3.0), &[7.0], &params).unwrap();
        assert!((post.mean.value() - 7.0).abs() < 1e-9);
        assert!(post.cov.value().abs() < 1e-9);
    }

    #[test]
    fn zero_residual_keeps_mean() {
        let (post, stats) = update_step(&belief(4.0, 3.0), &[4.0], &defaults()).unwrap();
        assert_eq!(post.mean.value(), 4.0);
        let k = stats.gain.value();
        assert!((post.cov.value() - (1.0 - k) * 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_innovation_reports_step() {
        let params = SsmParams::scalar(1.0, 1.0, 0.0, 0.0).unwrap();
        let err = filter(&[1.0, 2.0], &params, &belief(1.0, 0.0)).unwrap_err();
        match err {
            Error::Singular { step, what, .. } => {
                assert_eq!(step, Some(1));
                assert_eq!(what, "innovation covariance");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn filter_hand_trace() {
        let out = filter(&[2.0, 4.0], &defaults(), &belief(2.0, 2.0)).unwrap();
        let means: Vec<f64> = out.filtered.iter().map(|b| b.mean.value()).collect();
        let covs: Vec<f64> = out.filtered.iter().map(|b| b.cov.value()).collect();
        // step 2: prior (2, 2.875), S = 7.875, K = 2.875/7.875
        let k2 = 2.875 / 7.875;
        assert!((means[0] - 2.0).abs() < 1e-12);
        assert!((means[1] - (2.0 + 2.0 * k2)).abs() < 1e-12);
        assert!((covs[0] - 1.875).abs() < 1e-12);
        assert!((covs[1] - (1.0 - k2) * 2.875).abs() < 1e-12);
    }

    #[test]
    fn filter_tracks_noiseless_observations() {
        // Q = 0 pins the latent after the first observation, so a noiseless
        // model only reproduces observations that are themselves constant.
        let params = SsmParams::scalar(1.0, 1.0, 0.0, 1e-12).unwrap();
        let out = filter(&[3.0; 4], &params, &belief(0.0, 2.0)).unwrap();
        for b in &out.filtered {
            assert!((b.mean.value() - 3.0).abs() < 1e-9);
        }
        let ys = [3.0, 3.5, -1.0, 8.0];
        let params = SsmParams::scalar(1.0, 1.0, 1.0, 1e-12).unwrap();
        let out = filter(&ys, &params, &belief(0.0, 2.0)).unwrap();
        for (b, y) in out.filtered.iter().zip(ys) {
            assert!((b.mean.value() - y).abs() < 1e-9);
        }
    }

    #[test]
    fn single_step_filter_is_predict_then_update() {
        let init = belief(1.0, 2.0);
        let out = filter(&[3.0], &defaults(), &init).unwrap();
        let prior = predict_step(&init, &defaults()).unwrap();
        let (post, stats) = update_step(&prior, &[3.0], &defaults()).unwrap();
        assert_eq!(out.filtered[0], post);
        assert_eq!(out.stats[0], stats);
    }

    #[test]
    fn empty_sequence_is_rejected() {
        assert!(matches!(
            filter(&[], &defaults(), &belief(0.0, 2.0)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn smoother_hand_trace() {
        let out = smooth(&[2.0, 4.0], &defaults(), &belief(2.0, 2.0)).unwrap();
        let j = 1.875 / 2.875;
        assert!((out.gains[0].gain.value() - j).abs() < 1e-12);
        let m2 = out.filter.filtered[1].mean.value();
        assert!((out.smoothed[0].mean.value() - (2.0 + j * (m2 - 2.0))).abs() < 1e-12);
        assert_eq!(out.smoothed[1], out.filter.filtered[1]);
    }

    #[test]
    fn smoother_single_step_equals_filter() {
        let out = smooth(&[5.0], &defaults(), &belief(0.0, 2.0)).unwrap();
        assert_eq!(out.smoothed, out.filter.filtered);
        assert!(out.gains.is_empty());
    }

    #[test]
    fn smoother_without_transition_noise_is_flat() {
        let params = SsmParams::scalar(1.0, 1.0, 0.0, 5.0).unwrap();
        let out = smooth(&[1.0, 6.0, -2.0], &params, &belief(0.0, 2.0)).unwrap();
        let first = out.smoothed[0].mean.value();
        for b in &out.smoothed {
            assert!((b.mean.value() - first).abs() < 1e-12);
        }
        // The pinned latent is the precision-weighted average of prior and data.
        let expect = (0.0 / 2.0 + (1.0 + 6.0 - 2.0) / 5.0) / (1.0 / 2.0 + 3.0 / 5.0);
        assert!((first - expect).abs() < 1e-12);
    }

    #[test]
    fn loglik_of_anchored_single_observation() {
        let ll = log_likelihood(&[2.0], &defaults(), &belief(2.0, 2.0)).unwrap();
        let s: f64 = 8.0;
        assert!((ll + 0.5 * ((2.0 * PI).ln() + s.ln())).abs() < 1e-14);
    }

    #[test]
    fn loglik_drops_as_noise_grows_on_flat_sequence() {
        let ys = [1.0, 1.0, 1.0];
        let init = belief(1.0, 2.0);
        let low = log_likelihood(&ys, &defaults(), &init).unwrap();
        let high =
            log_likelihood(&ys, &SsmParams::scalar(1.0, 1.0, 1.0, 50.0).unwrap(), &init).unwrap();
        assert!(high < low);
        assert_eq!(filter(&ys, &defaults(), &init).unwrap().loglik, low);
    }

    #[test]
    fn multivariate_shapes() {
        let params = SsmParams::new(
            Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[&[1.0, 0.0]]).unwrap(),
            Matrix::diagonal(&[0.1, 0.01]),
            Matrix::scalar(1.0),
        )
        .unwrap();
        let init = GaussianBelief::new(&[0.0, 1.0], Matrix::identity(2).scale(2.0)).unwrap();
        let ys = [0.9, 2.1, 2.8, 4.2, 5.1];
        let out = smooth(&ys, &params, &init).unwrap();
        assert_eq!(out.smoothed.len(), 5);
        assert_eq!(out.filter.stats[0].gain.shape(), (2, 1));
        for b in &out.smoothed {
            assert!(b.cov.asymmetry() <= 1e-9);
        }
        // The velocity component should settle near one unit per step.
        assert!((out.smoothed[2].mean[(1, 0)] - 1.0).abs() < 0.3);
    }
}
