use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use jointqr::inference::{self, decile_taus, ExternalPredictions};
use jointqr::sampler::{self, FitSettings, Posterior, PosteriorDraws, SamplerConfig};

fn quick_settings() -> FitSettings {
    FitSettings {
        sampler: SamplerConfig { iters: 1500, thin: 10, seed: 21, ..SamplerConfig::default() },
        ..FitSettings::default()
    }
}

fn data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)]).collect();
    let y = x
        .iter()
        .map(|r| 0.5 + r[0] - 0.5 * r[1] + (1.0 + 0.4 * r[0]) * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

fn fitted() -> &'static (Posterior, PosteriorDraws) {
    static FIT: OnceLock<(Posterior, PosteriorDraws)> = OnceLock::new();
    FIT.get_or_init(|| {
        let (x, y) = data(150, 3);
        sampler::fit(&x, y, None, &quick_settings()).unwrap()
    })
}

#[test]
fn contrast_of_a_tau_with_itself_is_zero() {
    let (post, draws) = fitted();
    for j in 0..=2 {
        let iv = inference::contrast(post, draws, j, 0.3, 0.3, 0.9).unwrap();
        assert_eq!((iv.mean, iv.lo, iv.hi), (0.0, 0.0, 0.0));
    }
}

#[test]
fn contrast_is_antisymmetric() {
    let (post, draws) = fitted();
    let a = inference::contrast(post, draws, 1, 0.2, 0.7, 0.9).unwrap();
    let b = inference::contrast(post, draws, 1, 0.7, 0.2, 0.9).unwrap();
    assert!((a.mean + b.mean).abs() < 1e-12);
    assert!((a.lo + b.hi).abs() < 1e-12 && (a.hi + b.lo).abs() < 1e-12);
}

#[test]
fn bands_widen_with_level() {
    let (post, draws) = fitted();
    let taus = decile_taus();
    let narrow = inference::summarize(post, draws, &taus, 0.5).unwrap();
    let wide = inference::summarize(post, draws, &taus, 0.95).unwrap();
    for j in 0..3 {
        for t in 0..taus.len() {
            assert!(narrow.lo[j][t] <= narrow.hi[j][t]);
            assert!(wide.lo[j][t] <= narrow.lo[j][t] && narrow.hi[j][t] <= wide.hi[j][t]);
            assert_eq!(narrow.mean[j][t], wide.mean[j][t]);
        }
    }
}

#[test]
fn intercept_band_means_are_increasing_in_tau() {
    let (post, draws) = fitted();
    let taus = decile_taus();
    let bands = inference::summarize(post, draws, &taus, 0.95).unwrap();
    // mean quantile curve at the covariate centroid
    let offset = post.data.domain.offset().to_vec();
    let q: Vec<f64> = (0..taus.len())
        .map(|t| bands.mean[0][t] + offset.iter().enumerate().map(|(j, o)| o * bands.mean[j + 1][t]).sum::<f64>())
        .collect();
    assert!(q.windows(2).all(|w| w[1] > w[0]), "{q:?}");
}

#[test]
fn survival_curves_decrease_within_unit_interval() {
    let (post, draws) = fitted();
    let ys: Vec<f64> = (0..41).map(|k| -6.0 + 0.3 * k as f64).collect();
    let curves = inference::survival_curves(post, draws, &[0.1, 1.2], &ys).unwrap();
    assert_eq!(curves.len(), draws.draws.len());
    for c in &curves {
        assert!(c.iter().all(|s| (0.0..=1.0).contains(s)));
        assert!(c.windows(2).all(|w| w[1] <= w[0]));
    }
    assert!(inference::survival_curves(post, draws, &[0.1], &ys).is_err());
}

#[test]
fn every_draw_is_non_crossing() {
    let (post, draws) = fitted();
    assert!(inference::min_draw_slack(post, draws).unwrap() > 0.0);
}

#[test]
fn folds_partition_the_sample() {
    for (n, k) in [(10, 3), (151, 5), (7, 7)] {
        let folds = inference::fold_partition(n, k, 4).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
    assert!(inference::fold_partition(5, 1, 0).is_err());
}

#[test]
fn check_loss_is_minimized_by_the_sample_quantile() {
    let y: Vec<f64> = (0..101).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    for tau in [0.1, 0.5, 0.8] {
        let q = sorted[(tau * 100.0) as usize];
        let best = inference::check_loss_predictions(&vec![q; y.len()], &y, tau);
        for d in [-0.2, -0.01, 0.01, 0.2] {
            assert!(inference::check_loss_predictions(&vec![q + d; y.len()], &y, tau) >= best);
        }
    }
}

#[test]
fn cross_validation_reports_each_method() {
    let (x, y) = data(90, 8);
    let taus = [0.25, 0.5, 0.75];
    let oracle: Vec<Vec<f64>> = x.iter().map(|r| taus.iter().map(|_| 0.5 + r[0] - 0.5 * r[1]).collect()).collect();
    let ext = [ExternalPredictions { name: "median_truth".into(), values: oracle }];
    let settings = FitSettings {
        sampler: SamplerConfig { iters: 400, thin: 4, ..SamplerConfig::default() },
        ..FitSettings::default()
    };
    let rep = inference::cross_validate(&x, &y, None, 3, 5, &taus, &settings, &ext).unwrap();
    assert_eq!(rep.methods.len(), 3);
    assert_eq!(rep.methods[1].relative, vec![1.0; 3]);
    for m in &rep.methods {
        assert_eq!(m.test.len(), 3);
        assert!(m.train.iter().chain(&m.test).all(|v| v.is_finite() && *v > 0.0));
    }
}
