//! Test-side reference implementations, written against the model
//! definitions rather than the library's grid code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::{Beta, Continuous};

use jointqr::base_dist::BaseQuartet;
use jointqr::gp_prior::GpTables;
use jointqr::sampler::ThetaState;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    for i in 0..k {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..k {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = k as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// Fixed-order Gauss–Legendre rule applied to a vector integrand on [a, b].
pub struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rule {
    pub fn new(k: usize) -> Self {
        let (x, w) = gauss_legendre(k);
        Rule { x, w }
    }

    pub fn apply<F: FnMut(f64) -> Vec<f64>>(&self, mut f: F, a: f64, b: f64, dim: usize) -> Vec<f64> {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut out = vec![0.0; dim];
        for (x, w) in self.x.iter().zip(&self.w) {
            let v = f(c + h * x);
            for d in 0..dim {
                out[d] += w * h * v[d];
            }
        }
        out
    }
}

/// Continuous GP mixture interpolant of one knot vector.
pub struct CurveOracle {
    knots: Vec<f64>,
    lambdas: Vec<f64>,
    weights: Vec<f64>,
    coef: Vec<DVector<f64>>,
}

impl CurveOracle {
    /// Mixture weights from the multivariate-t marginal, computed with dense
    /// determinants and solves.
    pub fn new(w: &[f64], knots: &[f64], lambdas: &[f64], h: f64, ab_lambda: (f64, f64), ab_kappa: (f64, f64)) -> Self {
        let m = knots.len();
        let beta = Beta::new(ab_lambda.0, ab_lambda.1).unwrap();
        let wv = DVector::from_column_slice(w);
        let mut logs = Vec::new();
        let mut coef = Vec::new();
        for &lam in lambdas {
            let c = DMatrix::from_fn(m, m, |i, j| (-(lam * (knots[i] - knots[j])).powi(2)).exp());
            let rho = (-(h * lam).powi(2)).exp();
            let prior = beta.pdf(rho) * 2.0 * h * h * lam * rho;
            let sol = c.clone().lu().solve(&wv).unwrap();
            let q = wv.dot(&sol);
            let det = c.determinant();
            let log_t = -0.5 * det.ln() - (ab_kappa.0 + 0.5 * m as f64) * (1.0 + q / (2.0 * ab_kappa.1)).ln();
            logs.push(prior.ln() + log_t);
            coef.push(sol);
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tot: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        let weights = logs.iter().map(|l| (l - top).exp() / tot).collect();
        CurveOracle { knots: knots.to_vec(), lambdas: lambdas.to_vec(), weights, coef }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, u: f64) -> f64 {
        let mut s = 0.0;
        for ((lam, p), c) in self.lambdas.iter().zip(&self.weights).zip(&self.coef) {
            let mut v = 0.0;
            for (k, t) in self.knots.iter().enumerate() {
                v += (-(lam * (u - t)).powi(2)).exp() * c[k];
            }
            s += p * v;
        }
        s
    }
}

/// Continuous-τ version of the coefficient construction, with high-order
/// quadrature in place of the grid.
pub struct ModelOracle {
    curves: Vec<CurveOracle>,
    points: Vec<Vec<f64>>,
    gamma0: f64,
    gamma: Vec<f64>,
    sigma: f64,
    base: BaseQuartet,
    rule: Rule,
    z_nodes: Vec<f64>,
    z_total: f64,
    b_lo: f64,
    b_step: f64,
    b_nodes: Vec<Vec<f64>>,
    b_anchor: usize,
}

const Z_PANELS: usize = 2000;
const B_PANELS: usize = 980;

impl ModelOracle {
    pub fn new(theta: &ThetaState, gp: &GpTables, points: Vec<Vec<f64>>, base: BaseQuartet) -> Self {
        let hp = &gp.hyper;
        let curves = theta
            .w
            .iter()
            .map(|w| CurveOracle::new(w, &gp.knots, &gp.lambdas, hp.h, (hp.a_lambda, hp.b_lambda), (hp.a_kappa, hp.b_kappa)))
            .collect();
        let mut o = ModelOracle {
            curves,
            points,
            gamma0: theta.gamma0,
            gamma: theta.gamma.clone(),
            sigma: theta.sigma(),
            base,
            rule: Rule::new(20),
            z_nodes: Vec::new(),
            z_total: 0.0,
            b_lo: 0.01,
            b_step: 0.98 / B_PANELS as f64,
            b_nodes: Vec::new(),
            b_anchor: 0,
        };
        let mut cum = vec![0.0];
        for k in 0..Z_PANELS {
            let a = k as f64 / Z_PANELS as f64;
            let b = (k + 1) as f64 / Z_PANELS as f64;
            let v = o.rule.apply(|u| vec![o.curves[0].eval(u).exp()], a, b, 1)[0];
            cum.push(cum[k] + v);
        }
        o.z_total = cum[Z_PANELS];
        o.z_nodes = cum;

        // cumulative (B₀, B) from τ = 0.5 at nodes b_lo + k·b_step
        let p = o.gamma.len();
        o.b_anchor = ((0.5 - o.b_lo) / o.b_step).round() as usize;
        let mut nodes = vec![vec![0.0; p + 1]; B_PANELS + 1];
        for k in o.b_anchor..B_PANELS {
            let (a, b) = (o.node(k), o.node(k + 1));
            let inc = o.rule.apply(|u| o.slopes(u), a, b, p + 1);
            nodes[k + 1] = nodes[k].iter().zip(&inc).map(|(x, d)| x + d).collect();
        }
        for k in (0..o.b_anchor).rev() {
            let (a, b) = (o.node(k), o.node(k + 1));
            let inc = o.rule.apply(|u| o.slopes(u), a, b, p + 1);
            nodes[k] = nodes[k + 1].iter().zip(&inc).map(|(x, d)| x - d).collect();
        }
        o.b_nodes = nodes;
        o
    }

    fn node(&self, k: usize) -> f64 {
        if k == self.b_anchor {
            0.5
        } else {
            self.b_lo + k as f64 * self.b_step
        }
    }

    pub fn zeta(&self, u: f64) -> f64 {
        let k = ((u * Z_PANELS as f64).floor() as usize).min(Z_PANELS - 1);
        let a = k as f64 / Z_PANELS as f64;
        let part = if u > a { self.rule.apply(|s| vec![self.curves[0].eval(s).exp()], a, u, 1)[0] } else { 0.0 };
        (self.z_nodes[k] + part) / self.z_total
    }

    /// (β̇₀(u), β̇(u)).
    pub fn slopes(&self, u: f64) -> Vec<f64> {
        let z = self.zeta(u);
        let dz = self.curves[0].eval(u).exp() / self.z_total;
        let d0 = self.sigma * self.base.quantile_density(z) * dz;
        let v: Vec<f64> = self.curves[1..].iter().map(|c| c.eval(z)).collect();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let mut out = vec![d0];
        if norm2 == 0.0 {
            out.extend(std::iter::repeat_n(0.0, v.len()));
            return out;
        }
        let reach = self
            .points
            .iter()
            .map(|x| -x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        let a = reach / norm2.sqrt();
        let s = a * (1.0 + norm2).sqrt();
        out.extend(v.iter().map(|x| d0 * x / s));
        out
    }

    /// Q(u|x) for u in [0.01, 0.99].
    pub fn quantile(&self, x: &[f64], u: f64) -> f64 {
        let p = self.gamma.len();
        let k = (((u - self.b_lo) / self.b_step).floor() as usize).min(B_PANELS - 1);
        let a = self.node(k);
        let inc = self.rule.apply(|s| self.slopes(s), a, u, p + 1);
        let b: Vec<f64> = self.b_nodes[k].iter().zip(&inc).map(|(x, d)| x + d).collect();
        self.gamma0 + dot(x, &self.gamma) + b[0] + dot(x, &b[1..])
    }

    /// log f(Q(u|x) | x) = −log(β̇₀(u) + x·β̇(u)).
    pub fn log_density_at(&self, x: &[f64], u: f64) -> f64 {
        let s = self.slopes(u);
        -(s[0] + dot(x, &s[1..])).ln()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws a knot vector from the GP prior: λ from the discrete prior,
/// κ² from the inverse gamma, then W ~ N(0, κ² C(λ)).
pub fn prior_knots<R: Rng>(gp: &GpTables, rng: &mut R) -> Vec<f64> {
    let u: f64 = rng.random();
    let mut g = 0;
    let mut acc = 0.0;
    for (i, w) in gp.prior_weights.iter().enumerate() {
        acc += w;
        g = i;
        if u < acc {
            break;
        }
    }
    let gamma = Gamma::new(gp.hyper.a_kappa, 1.0 / gp.hyper.b_kappa).unwrap();
    let kappa2 = 1.0 / gamma.sample(rng);
    let z = DVector::from_fn(gp.m(), |_, _| rng.sample::<f64, _>(StandardNormal));
    (&gp.chol[g] * z * kappa2.sqrt()).iter().copied().collect()
}

/// Uniform points in [-1, 1]^p.
pub fn cube_points(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}
