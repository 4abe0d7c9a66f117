//! Synthetic likelihood workload shared by the throughput benchmark and the
//! `loglik-bench` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::base_dist::BaseFamily;
use crate::error::{Error, Result};
use crate::geometry::center_predictors;
use crate::gp_prior::GpHyper;
use crate::likelihood::Dataset;
use crate::par::Execution;
use crate::sampler::{Posterior, ThetaState};

/// Predictors uniform in the unit ball of ℝ^p, logistic-tailed responses,
/// and a pool of valid parameter states near the least-squares fit.
#[derive(Debug, Clone)]
pub struct LoglikWorkload {
    pub post: Posterior,
    pub states: Vec<ThetaState>,
}

impl LoglikWorkload {
    pub fn new(n: usize, p: usize, mesh: f64, seed: u64, exec: Execution) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r: f64 = rng.random::<f64>().powf(1.0 / p as f64);
                z.iter().map(|v| r * v / norm).collect()
            })
            .collect();
        let y: Vec<f64> = raw
            .iter()
            .map(|x| {
                let u: f64 = rng.random_range(0.001..0.999);
                (u / (1.0 - u)).ln() + x.iter().enumerate().map(|(j, v)| v * (j as f64 - 0.5 * p as f64) * 0.3).sum::<f64>()
            })
            .collect();
        let data = Dataset::new(center_predictors(&raw)?, y, None)?;
        let post = Posterior::new(data, BaseFamily::StudentT, mesh, &GpHyper::default(), exec)?;
        let start = post.initial_state()?;
        let mut states = Vec::new();
        let mut tries = 0;
        while states.len() < 16 {
            tries += 1;
            if tries > 1000 {
                return Err(Error::Numeric("could not find valid benchmark states".into()));
            }
            let mut s = start.clone();
            for w in &mut s.w {
                for v in w.iter_mut() {
                    *v = 0.5 * rng.sample::<f64, _>(StandardNormal);
                }
            }
            s.log_sigma2 += 1.0;
            if post.evaluate(&s)?.1.is_finite() {
                states.push(s);
            }
        }
        Ok(LoglikWorkload { post, states })
    }

    /// Full θ → log-likelihood evaluation (tables plus the search).
    pub fn evaluate(&self, i: usize) -> f64 {
        let s = &self.states[i % self.states.len()];
        let t = self.post.tables(s).expect("workload states are valid");
        self.post.log_likelihood(&t).expect("shapes agree")
    }

    /// Evaluations per second over `evals` calls.
    pub fn throughput(&self, evals: usize) -> f64 {
        let start = std::time::Instant::now();
        let mut acc = 0.0;
        for i in 0..evals {
            acc += self.evaluate(i);
        }
        std::hint::black_box(acc);
        evals as f64 / start.elapsed().as_secs_f64()
    }
}
