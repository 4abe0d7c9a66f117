use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use jointqr::sampler::{self, BlockAdaptState, FitSettings, SamplerConfig};

// Toy model with a proper prior: μ ~ N(0, 1), s ~ N(0, 0.5²), y₁, y₂ ~ N(μ, e^{2s}).
const S_SD: f64 = 0.5;

fn log_prior(t: &[f64]) -> f64 {
    -0.5 * t[0] * t[0] - 0.5 * (t[1] / S_SD).powi(2)
}

fn log_lik(t: &[f64], y: &[f64; 2]) -> f64 {
    y.iter().map(|v| -t[1] - 0.5 * ((v - t[0]) * (-t[1]).exp()).powi(2)).sum()
}

fn draw_y(t: &[f64], rng: &mut ChaCha8Rng) -> [f64; 2] {
    let sd = t[1].exp();
    [t[0] + sd * rng.sample::<f64, _>(StandardNormal), t[0] + sd * rng.sample::<f64, _>(StandardNormal)]
}

/// Successive-conditional simulator: Metropolis steps on θ | y with the
/// adapted proposal frozen, then a fresh y | θ. The θ marginal must match
/// the prior. Returns the largest |z| over the first two moments.
fn successive_conditional(with_prior: bool, cycles: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![rng.sample::<f64, _>(StandardNormal), S_SD * rng.sample::<f64, _>(StandardNormal)];
    let mut y = draw_y(&theta, &mut rng);
    let target = |t: &[f64], y: &[f64; 2]| log_lik(t, y) + if with_prior { log_prior(t) } else { 0.0 };

    // tune on one fixed data set, then freeze
    let mut block = BlockAdaptState::new(&theta, 0.1, 0.234, 100);
    let mut cur = target(&theta, &y);
    for _ in 0..5000 {
        let prop = block.propose(&theta, &mut rng);
        let lp = target(&prop, &y);
        let a = (lp - cur).exp().min(1.0);
        if rng.random::<f64>() < a {
            theta = prop;
            cur = lp;
        }
        block.adapt(&theta, a);
    }

    let mut stats: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(cycles)).collect();
    for _ in 0..cycles {
        cur = target(&theta, &y);
        for _ in 0..3 {
            let prop = block.propose(&theta, &mut rng);
            let lp = target(&prop, &y);
            if rng.random::<f64>() < (lp - cur).exp() {
                theta = prop;
                cur = lp;
            }
        }
        y = draw_y(&theta, &mut rng);
        stats[0].push(theta[0]);
        stats[1].push(theta[1]);
        stats[2].push(theta[0] * theta[0]);
        stats[3].push(theta[1] * theta[1]);
    }
    let expect = [0.0, 0.0, 1.0, S_SD * S_SD];
    stats.iter().zip(expect).map(|(s, e)| batch_z(s, e)).fold(0.0, f64::max)
}

/// |mean − expected| / batch-means standard error.
fn batch_z(v: &[f64], expected: f64) -> f64 {
    let batches = 50;
    let size = v.len() / batches;
    let means: Vec<f64> = v.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (m - expected).abs() / (var / means.len() as f64).sqrt()
}

#[test]
fn frozen_kernel_preserves_the_joint_distribution() {
    // four moments at an overall 1% level
    let z = successive_conditional(true, 200_000, 5);
    assert!(z < 3.02, "max |z| = {z}");
}

#[test]
fn successive_conditional_check_detects_a_wrong_kernel() {
    let z = successive_conditional(false, 200_000, 5);
    assert!(z > 3.02, "max |z| = {z}");
}

fn homoscedastic(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
    let y = x.iter().map(|r| 1.0 + 2.0 * r[0] + rng.sample::<f64, _>(StandardNormal)).collect();
    (x, y)
}

#[test]
fn acceptance_rates_settle_near_target() {
    let (x, y) = homoscedastic(200, 1);
    let settings = FitSettings {
        sampler: SamplerConfig { iters: 4000, thin: 20, ..SamplerConfig::default() },
        ..FitSettings::default()
    };
    let (_, draws) = sampler::fit(&x, y, None, &settings).unwrap();
    for rate in &draws.acceptance[0] {
        assert!((0.15..=0.35).contains(rate), "{:?}", draws.acceptance);
    }
    assert!(draws.draws.iter().all(|d| d.loglik.is_finite() && d.logpost.is_finite()));
}

#[test]
fn chains_are_reproducible_and_distinct() {
    let (x, y) = homoscedastic(80, 2);
    let settings = FitSettings {
        sampler: SamplerConfig { iters: 300, thin: 3, chains: 2, ..SamplerConfig::default() },
        ..FitSettings::default()
    };
    let (_, a) = sampler::fit(&x, y.clone(), None, &settings).unwrap();
    let (_, b) = sampler::fit(&x, y, None, &settings).unwrap();
    let flat = |d: &sampler::PosteriorDraws| d.draws.iter().map(|d| d.theta.to_vec()).collect::<Vec<_>>();
    assert_eq!(flat(&a), flat(&b));
    let (c0, c1): (Vec<_>, Vec<_>) = a.draws.iter().partition(|d| d.chain == 0);
    assert_eq!(c0.len(), c1.len());
    assert_ne!(c0.last().unwrap().theta.to_vec(), c1.last().unwrap().theta.to_vec());
}
