use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_belief, GaussianBelief, SsmParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Draws from the model; both series are flat row-major (`T × n`, `T × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub latent: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Lower-triangular factor of a PSD matrix. Columns with a non-positive
/// pivot are left at zero, so degenerate covariances sample deterministically.
fn psd_factor(cov: &Matrix) -> Matrix {
    let n = cov.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-300 {
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    l
}

fn draw(rng: &mut ChaCha8Rng, mean: &Matrix, factor: &Matrix) -> Matrix {
    let noise: Vec<f64> = (0..factor.rows())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    mean + &(factor * &Matrix::column(&noise))
}

/// Samples `z_0` from `init`, then `T` transition/observation pairs.
pub fn simulate(
    params: &SsmParams,
    init: &GaussianBelief,
    steps: usize,
    seed: u64,
) -> Result<Simulation> {
    let sampler = Sampler::new(params, init, steps)?;
    Ok(sampler.run(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// `count` independent sequences drawn from a single random stream.
pub fn simulate_batch(
    params: &SsmParams,
    init: &GaussianBelief,
    count: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Simulation>> {
    let sampler = Sampler::new(params, init, steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sampler.run(&mut rng)).collect())
}

struct Sampler<'a> {
    params: &'a SsmParams,
    init_mean: &'a Matrix,
    init_factor: Matrix,
    q_factor: Matrix,
    r_factor: Matrix,
    steps: usize,
}

impl<'a> Sampler<'a> {
    fn new(params: &'a SsmParams, init: &'a GaussianBelief, steps: usize) -> Result<Self> {
        check_belief(init, params)?;
        if steps == 0 {
            return Err(Error::Empty("simulation length".into()));
        }
        Ok(Sampler {
            params,
            init_mean: &init.mean,
            init_factor: psd_factor(&init.cov),
            q_factor: psd_factor(params.q()),
            r_factor: psd_factor(params.r()),
            steps,
        })
    }

    fn run(&self, rng: &mut ChaCha8Rng) -> Simulation {
        let (n, m) = (self.params.state_dim(), self.params.obs_dim());
        let mut latent = Vec::with_capacity(self.steps * n);
        let mut observed = Vec::with_capacity(self.steps * m);
        let mut z = draw(rng, self.init_mean, &self.init_factor);
        for _ in 0..self.steps {
            z = draw(rng, &(self.params.a() * &z), &self.q_factor);
            let y = draw(rng, &(self.params.c() * &z), &self.r_factor);
            latent.extend_from_slice(z.as_slice());
            observed.extend_from_slice(y.as_slice());
        }
        Simulation { latent, observed }
    }
}
