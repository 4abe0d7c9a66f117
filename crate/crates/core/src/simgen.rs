//! Synthetic designs with known coefficient curves, and replicate scoring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::base_dist::{normal_pdf, normal_quantile};
use crate::error::{Error, Result};
use crate::inference::{self, BandTable};
use crate::par::{self, Execution};
use crate::quadrature;
use crate::sampler::{self, FitSettings};

pub const BALL7_MEDIAN: [f64; 7] = [0.96, -0.38, 0.05, -0.22, -0.80, -0.80, -5.97];
pub const BALL7_A: [[f64; 7]; 3] = [
    [0.0, 0.0, -3.0, -2.0, 0.0, 5.0, -1.0],
    [-3.0, 0.0, 0.0, 2.0, 4.0, 1.0, 0.0],
    [0.0, -2.0, 2.0, 2.0, -4.0, 0.0, 0.0],
];
const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Two predictors uniform on {x ≥ −1 coordinatewise, x₁ + x₂ ≤ 1}.
    Triangle,
    /// One predictor uniform on (−1, 1) with a near-quadratic slope curve.
    #[serde(rename = "uni")]
    Univariate,
    /// Seven predictors in the unit ball, logistic median response.
    Ball7,
}

impl Design {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(Design::Triangle),
            "uni" | "univariate" => Ok(Design::Univariate),
            "ball7" => Ok(Design::Ball7),
            other => Err(Error::InvalidParameter(format!(
                "unknown design '{other}' (expected triangle, uni or ball7)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Design::Triangle => "triangle",
            Design::Univariate => "uni",
            Design::Ball7 => "ball7",
        }
    }

    pub fn p(self) -> usize {
        match self {
            Design::Triangle => 2,
            Design::Univariate => 1,
            Design::Ball7 => 7,
        }
    }

    /// True (β₀(τ), β₁(τ), …, β_p(τ)).
    pub fn coefficients(self, tau: f64) -> Vec<f64> {
        match self {
            Design::Triangle => {
                let z = normal_quantile(tau);
                let b = (1.0 - 0.8 * z) / 3.0;
                vec![2.0 / 3.0 + 1.4 / 3.0 * z, b, b]
            }
            Design::Univariate => {
                let c = tau - 0.5;
                let g = -(tau * (1.0 - tau)).ln();
                vec![3.0 * c * g, 4.0 * c * c * g]
            }
            Design::Ball7 => {
                let mut out = vec![(tau / (1.0 - tau)).ln()];
                out.extend(ball7_slopes(tau));
                out
            }
        }
    }

    /// True derivatives (β̇₀(τ), β̇(τ)).
    pub fn derivatives(self, tau: f64) -> Vec<f64> {
        match self {
            Design::Triangle => {
                let q = 1.0 / normal_pdf(normal_quantile(tau));
                let b = -0.8 / 3.0 * q;
                vec![1.4 / 3.0 * q, b, b]
            }
            Design::Univariate => {
                let c = tau - 0.5;
                let g = -(tau * (1.0 - tau)).ln();
                let dg = -1.0 / tau + 1.0 / (1.0 - tau);
                vec![3.0 * g + 3.0 * c * dg, 8.0 * c * g + 4.0 * c * c * dg]
            }
            Design::Ball7 => {
                let d0 = 1.0 / (tau * (1.0 - tau));
                let mut out = vec![d0];
                out.extend(ball7_direction(tau).iter().map(|h| d0 * h));
                out
            }
        }
    }

    pub fn quantile(self, x: &[f64], tau: f64) -> f64 {
        let c = self.coefficients(tau);
        c[0] + x.iter().zip(&c[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    /// F(y|x) by bisection on the (increasing) conditional quantile.
    pub fn cdf(self, x: &[f64], y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.quantile(x, mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn predictor<R: Rng>(self, rng: &mut R) -> Vec<f64> {
        match self {
            Design::Triangle => {
                // uniform on the unit simplex by reflection, mapped to the triangle
                let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                vec![-1.0 + 3.0 * u, -1.0 + 3.0 * v]
            }
            Design::Univariate => vec![rng.random_range(-1.0..1.0)],
            Design::Ball7 => {
                let z: Vec<f64> = (0..7).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let u: f64 = rng.random();
                z.iter().map(|v| u * v / norm).collect()
            }
        }
    }
}

fn ball7_v(tau: f64) -> [f64; 7] {
    let mut v = [0.0; 7];
    for (l, row) in BALL7_A.iter().enumerate() {
        let phi = 3.0 * normal_pdf(3.0 * (tau - 0.5 * l as f64));
        for j in 0..7 {
            v[j] += row[j] * phi;
        }
    }
    v
}

/// v/√(1+‖v‖²): with a(b, unit ball) = 1 this is the normalized direction.
fn ball7_direction(tau: f64) -> [f64; 7] {
    let v = ball7_v(tau);
    let s = (1.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    v.map(|x| x / s)
}

/// β(τ) = β(0.5) + ∫ β̇, integrated on the logit scale where β̇₀ dτ = du.
fn ball7_slopes(tau: f64) -> Vec<f64> {
    let end = (tau / (1.0 - tau)).ln();
    let inc = quadrature::integrate(
        |u| {
            let t = 1.0 / (1.0 + (-u).exp());
            ball7_direction(t).to_vec()
        },
        0.0,
        end,
        7,
        QUAD_TOL,
    );
    BALL7_MEDIAN.iter().zip(inc).map(|(b, d)| b + d).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub design: Design,
    pub n: usize,
    pub seed: u64,
}

/// Raw predictors and responses from a design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub spec: SimSpec,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl SimData {
    /// True coefficients `[tau][coef]`.
    pub fn truth(&self, taus: &[f64]) -> Vec<Vec<f64>> {
        truth_table(self.spec.design, taus)
    }
}

pub fn truth_table(design: Design, taus: &[f64]) -> Vec<Vec<f64>> {
    taus.iter().map(|&t| design.coefficients(t)).collect()
}

/// Draws X from the design and Y = Q(U|X) with U uniform.
pub fn generate(spec: SimSpec) -> Result<SimData> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let row = spec.design.predictor(&mut rng);
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        y.push(spec.design.quantile(&row, u));
        x.push(row);
    }
    Ok(SimData { spec, x, y })
}

/// Mean absolute error of the posterior mean and band coverage, `[coef][tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub taus: Vec<f64>,
    pub replicates: usize,
    pub mae: Vec<Vec<f64>>,
    pub coverage: Vec<Vec<f64>>,
}

/// Scores replicate band tables against the truth `[tau][coef]`.
pub fn score_replicates(fits: &[BandTable], truth: &[Vec<f64>]) -> Result<ScoreTable> {
    let first = fits.first().ok_or_else(|| Error::InvalidInput("no replicates to score".into()))?;
    let (nt, nc) = (first.taus.len(), first.n_coef());
    if truth.len() != nt || truth.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch("truth table does not match the band tables".into()));
    }
    if fits.iter().any(|f| f.taus != first.taus || f.n_coef() != nc) {
        return Err(Error::DimensionMismatch("replicates use different tau sets".into()));
    }
    let r = fits.len() as f64;
    let mut mae = vec![vec![0.0; nt]; nc];
    // integer hit counts so that full coverage is exactly 1
    let mut hits = vec![vec![0usize; nt]; nc];
    for f in fits {
        for j in 0..nc {
            for t in 0..nt {
                let truth = truth[t][j];
                mae[j][t] += (f.mean[j][t] - truth).abs() / r;
                if f.lo[j][t] <= truth && truth <= f.hi[j][t] {
                    hits[j][t] += 1;
                }
            }
        }
    }
    let coverage = hits.iter().map(|row| row.iter().map(|&h| h as f64 / r).collect()).collect();
    Ok(ScoreTable { taus: first.taus.clone(), replicates: fits.len(), mae, coverage })
}

/// Generates, fits and scores `replicates` datasets. Replicate r uses data
/// seed `seed + r` and sampler seed `settings.sampler.seed + r`.
pub fn study(
    design: Design,
    replicates: usize,
    n: usize,
    seed: u64,
    taus: &[f64],
    settings: &FitSettings,
    exec: Execution,
) -> Result<(ScoreTable, Vec<BandTable>)> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let runs = par::map_range(exec, replicates, |r| -> Result<BandTable> {
        let data = generate(SimSpec { design, n, seed: seed.wrapping_add(r as u64) })?;
        let mut s = settings.clone();
        s.sampler.seed = settings.sampler.seed.wrapping_add(r as u64);
        let (post, draws) = sampler::fit(&data.x, data.y, None, &s)?;
        inference::summarize(&post, &draws, taus, 0.95)
    });
    let fits: Vec<BandTable> = runs.into_iter().collect::<Result<_>>()?;
    let score = score_replicates(&fits, &truth_table(design, taus))?;
    Ok((score, fits))
}
