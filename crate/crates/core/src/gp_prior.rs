//! Squared-exponential GP priors on the latent curves, reduced to knot
//! vectors.
//!
//! Each curve w_j is represented by its values W at m knots. Given the
//! rescaling λ and a scale κ², W ~ N(0, κ² C(λ)); κ² is integrated out
//! against an inverse-gamma hyperprior, leaving a multivariate t, and λ is
//! restricted to a finite grid with Beta-distributed correlation ρ_h(λ).
//! Curves on the τ grid are the posterior-weighted mixture of the per-λ
//! kriging interpolants.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::distribution::{Beta, Continuous};

use crate::error::{Error, Result};

/// exp(−λ²(t−t′)²).
#[inline]
pub fn se_cov(t: f64, t2: f64, lambda: f64) -> f64 {
    let d = lambda * (t - t2);
    (-d * d).exp()
}

/// ρ_h(λ) = exp(−h²λ²), the correlation at lag h.
#[inline]
pub fn rho(lambda: f64, h: f64) -> f64 {
    se_cov(0.0, h, lambda)
}

/// Inverse of [`rho`].
pub fn lambda_for_rho(rho: f64, h: f64) -> f64 {
    (-rho.ln()).sqrt() / h
}

/// Hyperparameters of the latent-curve prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub knots_m: usize,
    pub h: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub a_kappa: f64,
    pub b_kappa: f64,
    /// Diagonal jitter on the knot covariance; escalated on factorization failure.
    pub nugget: f64,
    pub rho_start: f64,
    pub rho_end: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            knots_m: 6,
            h: 0.1,
            a_lambda: 6.0,
            b_lambda: 4.0,
            a_kappa: 1.5,
            b_kappa: 1.5,
            nugget: 0.0,
            rho_start: 0.99,
            rho_end: 0.05,
        }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
            ("a_kappa", self.a_kappa),
            ("b_kappa", self.b_kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.knots_m == 0 {
            return Err(Error::InvalidParameter("knots_m must be at least 1".into()));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::InvalidParameter(format!("nugget must be non-negative, got {}", self.nugget)));
        }
        if !(0.0 < self.rho_end && self.rho_end < self.rho_start && self.rho_start < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < rho_end < rho_start < 1, got {} and {}",
                self.rho_end, self.rho_start
            )));
        }
        Ok(())
    }

    /// Equispaced knots (k−1)/(m−1), or {1/2} when m = 1.
    pub fn knots(&self) -> Vec<f64> {
        equispaced_knots(self.knots_m)
    }
}

pub fn equispaced_knots(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5];
    }
    (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
}

pub fn knot_cov(knots: &[f64], lambda: f64, nugget: f64) -> DMatrix<f64> {
    let m = knots.len();
    DMatrix::from_fn(m, m, |i, j| se_cov(knots[i], knots[j], lambda) + if i == j { nugget } else { 0.0 })
}

const NUGGET_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of C(λ) + nugget·I, escalating the nugget through
/// 1e-10 … 1e-6 when the factorization fails. Returns the nugget used.
pub fn factor_cov(knots: &[f64], lambda: f64, nugget: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let first = std::iter::once(nugget);
    let ladder = NUGGET_LADDER.iter().copied().filter(|&v| v > nugget);
    for eps in first.chain(ladder) {
        if let Some(ch) = Cholesky::new(knot_cov(knots, lambda, eps)) {
            if ch.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok((ch, eps));
            }
        }
    }
    Err(Error::Numeric(format!(
        "knot covariance at lambda = {lambda} is not positive definite even with nugget 1e-6"
    )))
}

fn half_logdet(ch: &Cholesky<f64, Dyn>) -> f64 {
    ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum()
}

/// KL(N(0, C(λ)) ‖ N(0, C(λ′))) over the knots.
pub fn kl_divergence(knots: &[f64], lambda: f64, lambda2: f64, nugget: f64) -> Result<f64> {
    let (c1, _) = factor_cov(knots, lambda, nugget)?;
    let (c2, _) = factor_cov(knots, lambda2, nugget)?;
    let m = knots.len();
    let a = knot_cov(knots, lambda, nugget);
    let trace = c2.solve(&a).trace();
    Ok(0.5 * (trace - m as f64 + 2.0 * half_logdet(&c2) - 2.0 * half_logdet(&c1)))
}

/// λ grid running from ρ_h = `rho_start` to ρ_h = `rho_end`, each step chosen
/// so that the KL divergence from the previous point equals one. The last
/// step closes the grid at `rho_end` once the remaining divergence is ≤ 1.
pub fn build_lambda_grid(knots: &[f64], h: f64, rho_start: f64, rho_end: f64, nugget: f64) -> Result<Vec<f64>> {
    if knots.len() < 2 {
        return Err(Error::InvalidParameter("the lambda grid needs at least two knots".into()));
    }
    let lo = lambda_for_rho(rho_start, h);
    let hi = lambda_for_rho(rho_end, h);
    let mut grid = vec![lo];
    let mut cur = lo;
    loop {
        if kl_divergence(knots, cur, hi, nugget)? <= 1.0 {
            grid.push(hi);
            return Ok(grid);
        }
        // bisect on log λ: KL grows monotonically with the step
        let (mut a, mut b) = (cur.ln(), hi.ln());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if kl_divergence(knots, cur, mid.exp(), nugget)? > 1.0 {
                b = mid;
            } else {
                a = mid;
            }
            if b - a < 1e-13 {
                break;
            }
        }
        let next = (0.5 * (a + b)).exp();
        let kl = kl_divergence(knots, cur, next, nugget)?;
        if !(next > cur) || (kl - 1.0).abs() > 1e-6 {
            return Err(Error::Numeric(format!(
                "unit-KL step from lambda = {cur} failed: bracket [{cur}, {hi}], reached {next} with KL {kl}"
            )));
        }
        grid.push(next);
        cur = next;
        if grid.len() > 10_000 {
            return Err(Error::Numeric("lambda grid did not terminate".into()));
        }
    }
}

/// Precomputed per-λ factors and interpolation matrices.
#[derive(Debug, Clone)]
pub struct GpTables {
    pub hyper: GpHyper,
    pub knots: Vec<f64>,
    pub abscissae: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub prior_weights: Vec<f64>,
    log_prior_weights: Vec<f64>,
    /// A_g = C_{o*}(λ_g) C_{**}(λ_g)⁻¹, one (abscissae × m) matrix per λ.
    pub interp: Vec<DMatrix<f64>>,
    /// Lower Cholesky factors of C_{**}(λ_g) + nugget_g I.
    pub chol: Vec<DMatrix<f64>>,
    pub nuggets: Vec<f64>,
    half_logdet: Vec<f64>,
    log_const: f64,
}

/// Log-density of a knot vector under the λ mixture, with the posterior
/// mixture weights p_g.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrior {
    pub log_density: f64,
    pub weights: Vec<f64>,
}

impl GpTables {
    /// Builds the λ grid and all tables for the given abscissae.
    pub fn build(abscissae: &[f64], hyper: &GpHyper) -> Result<Self> {
        hyper.validate()?;
        let knots = hyper.knots();
        let lambdas = if knots.len() >= 2 {
            build_lambda_grid(&knots, hyper.h, hyper.rho_start, hyper.rho_end, hyper.nugget)?
        } else {
            vec![lambda_for_rho(hyper.rho_start, hyper.h)]
        };
        Self::with_lambdas(abscissae, knots, lambdas, hyper)
    }

    /// Tables for an explicit knot set and λ grid.
    pub fn with_lambdas(abscissae: &[f64], knots: Vec<f64>, lambdas: Vec<f64>, hyper: &GpHyper) -> Result<Self> {
        hyper.validate()?;
        if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidParameter("lambda grid must be non-empty and non-negative".into()));
        }
        let m = knots.len();
        let beta = Beta::new(hyper.a_lambda, hyper.b_lambda)
            .map_err(|e| Error::InvalidParameter(format!("beta hyperprior: {e}")))?;
        let mut interp = Vec::with_capacity(lambdas.len());
        let mut chol = Vec::with_capacity(lambdas.len());
        let mut nuggets = Vec::with_capacity(lambdas.len());
        let mut half_ld = Vec::with_capacity(lambdas.len());
        let mut raw_w = Vec::with_capacity(lambdas.len());
        for &lam in &lambdas {
            let (ch, eps) = factor_cov(&knots, lam, hyper.nugget)?;
            let cross = DMatrix::from_fn(abscissae.len(), m, |i, k| se_cov(abscissae[i], knots[k], lam));
            // A = cross · C⁻¹  ⇔  C Aᵀ = crossᵀ
            let a = ch.solve(&cross.transpose()).transpose();
            half_ld.push(half_logdet(&ch));
            chol.push(ch.l());
            nuggets.push(eps);
            interp.push(a);
            let r = rho(lam, hyper.h);
            let jac = 2.0 * hyper.h * hyper.h * lam * r;
            raw_w.push(beta.ln_pdf(r) + jac.ln());
        }
        let norm = log_sum_exp(&raw_w);
        let log_prior_weights: Vec<f64> = raw_w.iter().map(|w| w - norm).collect();
        let prior_weights = log_prior_weights.iter().map(|w| w.exp()).collect();
        let half_m = 0.5 * m as f64;
        let log_const = libm::lgamma(hyper.a_kappa + half_m)
            - libm::lgamma(hyper.a_kappa)
            - half_m * (2.0 * std::f64::consts::PI * hyper.b_kappa).ln();
        Ok(GpTables {
            hyper: hyper.clone(),
            knots,
            abscissae: abscissae.to_vec(),
            lambdas,
            prior_weights,
            log_prior_weights,
            interp,
            chol,
            nuggets,
            half_logdet: half_ld,
            log_const,
        })
    }

    pub fn m(&self) -> usize {
        self.knots.len()
    }

    pub fn g(&self) -> usize {
        self.lambdas.len()
    }

    /// Per-λ log terms log π_g + log t(W | λ_g).
    pub fn component_log_terms(&self, w: &[f64]) -> Vec<f64> {
        let m = self.m();
        let shape = self.hyper.a_kappa + 0.5 * m as f64;
        let two_b = 2.0 * self.hyper.b_kappa;
        let mut z = vec![0.0; m];
        (0..self.g())
            .map(|g| {
                let q = forward_quadratic(&self.chol[g], w, &mut z);
                self.log_prior_weights[g] - self.half_logdet[g] - shape * (q / two_b).ln_1p() + self.log_const
            })
            .collect()
    }

    pub fn marginal_log_prior(&self, w: &[f64]) -> MixturePrior {
        let terms = self.component_log_terms(w);
        let log_density = log_sum_exp(&terms);
        let weights = terms.iter().map(|t| (t - log_density).exp()).collect();
        MixturePrior { log_density, weights }
    }

    /// W̃ = Σ_g p_g A_g W on the table abscissae.
    pub fn interpolate_curve(&self, w: &[f64], weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.abscissae.len()];
        let wv = DVector::from_column_slice(w);
        for (a, &p) in self.interp.iter().zip(weights) {
            if p == 0.0 {
                continue;
            }
            let col = a * &wv;
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += p * v;
            }
        }
        out
    }

    /// Convenience: mixture weights then interpolation.
    pub fn curve(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let mp = self.marginal_log_prior(w);
        let c = self.interpolate_curve(w, &mp.weights);
        (mp.log_density, c)
    }

    /// Prior mass the discrete λ grid assigns to ρ_h ∈ (lo, hi).
    pub fn prior_rho_mass(&self, lo: f64, hi: f64) -> f64 {
        self.lambdas
            .iter()
            .zip(&self.prior_weights)
            .filter(|(l, _)| {
                let r = rho(**l, self.hyper.h);
                r > lo && r < hi
            })
            .map(|(_, w)| w)
            .sum()
    }
}

/// Wᵀ(LLᵀ)⁻¹W via forward substitution into `z`.
fn forward_quadratic(l: &DMatrix<f64>, w: &[f64], z: &mut [f64]) -> f64 {
    let m = w.len();
    let mut q = 0.0;
    for i in 0..m {
        let mut s = w[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
        q += z[i] * z[i];
    }
    q
}

/// log Σ exp(v), accumulated in decreasing order so the result does not
/// depend on the order of `v`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = sorted[0];
    if top == f64::NEG_INFINITY {
        return top;
    }
    let s: f64 = sorted.iter().map(|x| (x - top).exp()).sum();
    top + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::TauGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, StandardNormal};
    use statrs::distribution::StudentsT;

    fn default_tables() -> GpTables {
        let grid = TauGrid::build(1000, 0.01).unwrap();
        GpTables::build(grid.extended(), &GpHyper::default()).unwrap()
    }

    #[test]
    fn se_cov_values() {
        assert_eq!(se_cov(0.3, 0.3, 4.0), 1.0);
        assert_eq!(se_cov(0.1, 0.9, 0.0), 1.0);
        let l = 3.7;
        assert!((se_cov(0.2, 0.3, l) - (-0.01 * l * l).exp()).abs() < 1e-15);
    }

    #[test]
    fn lambda_grid_start_and_end() {
        let knots = equispaced_knots(6);
        let g = build_lambda_grid(&knots, 0.1, 0.99, 0.05, 0.0).unwrap();
        assert!((g[0] - 1.002513633498).abs() < 1e-10);
        assert!(rho(*g.last().unwrap(), 0.1) <= 0.05 + 1e-12);
        assert!(rho(g[g.len() - 2], 0.1) > 0.05);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        for w in g[..g.len() - 1].windows(2) {
            let kl = kl_divergence(&knots, w[0], w[1], 0.0).unwrap();
            assert!((kl - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn knot_rows_are_unit_vectors() {
        let t = default_tables();
        for a in &t.interp {
            for (k, &kt) in t.knots.iter().enumerate() {
                let row = t.abscissae.iter().position(|&u| (u - kt).abs() < 1e-14).unwrap();
                for c in 0..t.m() {
                    let e = if c == k { 1.0 } else { 0.0 };
                    assert!((a[(row, c)] - e).abs() < 1e-8);
                }
            }
        }
        assert!((t.prior_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_of_constant_matches_dense_solve() {
        let t = default_tables();
        for (g, &lam) in t.lambdas.iter().enumerate() {
            let c = knot_cov(&t.knots, lam, t.nuggets[g]);
            let sol = c.clone().lu().solve(&DVector::from_element(t.m(), 1.0)).unwrap();
            for (i, &u) in t.abscissae.iter().enumerate().step_by(7) {
                let direct: f64 = (0..t.m()).map(|k| se_cov(u, t.knots[k], lam) * sol[k]).sum();
                let a = &t.interp[g];
                let via: f64 = (0..t.m()).map(|k| a[(i, k)]).sum();
                assert!((direct - via).abs() < 1e-9, "g={g} i={i}: {direct} vs {via}");
            }
        }
    }

    #[test]
    fn single_knot_collapses_to_student_t() {
        let hyper = GpHyper { knots_m: 1, ..GpHyper::default() };
        let t = GpTables::with_lambdas(&[0.0, 0.5, 1.0], vec![0.5], vec![2.0], &hyper).unwrap();
        let nu = 2.0 * hyper.a_kappa;
        let st = StudentsT::new(0.0, (hyper.b_kappa / hyper.a_kappa).sqrt(), nu).unwrap();
        for w in [-3.0, -0.2, 0.0, 0.7, 12.0] {
            let got = t.marginal_log_prior(&[w]).log_density;
            assert!((got - st.ln_pdf(w)).abs() < 1e-10, "{got} vs {}", st.ln_pdf(w));
        }
    }

    #[test]
    fn zero_vector_weights_follow_determinants() {
        let t = default_tables();
        let mp = t.marginal_log_prior(&vec![0.0; t.m()]);
        let raw: Vec<f64> = (0..t.g())
            .map(|g| {
                let det = knot_cov(&t.knots, t.lambdas[g], t.nuggets[g]).determinant();
                t.prior_weights[g] / det.sqrt()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        for (p, r) in mp.weights.iter().zip(&raw) {
            assert!((p - r / total).abs() < 1e-6 * (r / total).max(1e-300) + 1e-12);
        }
        assert!((mp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.interpolate_curve(&vec![0.0; t.m()], &mp.weights).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn permutation_invariance() {
        let t = default_tables();
        let w = [0.3, -1.2, 0.8, 0.1, -0.4, 2.0];
        let terms = t.component_log_terms(&w);
        let mut rev = terms.clone();
        rev.reverse();
        rev.swap(0, 3);
        assert!((log_sum_exp(&terms) - log_sum_exp(&rev)).abs() < 1e-12);
    }

    #[test]
    fn interpolant_passes_through_knots() {
        let t = default_tables();
        let w = [0.3, -1.2, 0.8, 0.1, -0.4, 2.0];
        let (_, c) = t.curve(&w);
        for (k, &kt) in t.knots.iter().enumerate() {
            let row = t.abscissae.iter().position(|&u| (u - kt).abs() < 1e-14).unwrap();
            assert!((c[row] - w[k]).abs() < 1e-8);
        }
        let single = GpTables::with_lambdas(&t.abscissae, t.knots.clone(), vec![t.lambdas[3]], &t.hyper).unwrap();
        let (_, c1) = single.curve(&w);
        let direct = &single.interp[0] * DVector::from_column_slice(&w);
        assert_eq!(c1, direct.as_slice());
    }

    #[test]
    fn continuous_beta_mass() {
        // sanity on the hyperprior itself: 95% of Beta(6,4) mass in (0.3, 0.86)
        use statrs::distribution::ContinuousCDF;
        let b = Beta::new(6.0, 4.0).unwrap();
        let mass = b.cdf(0.86) - b.cdf(0.3);
        assert!((mass - 0.95).abs() < 0.005);
    }

    #[test]
    fn monte_carlo_matches_t_density() {
        // W | κ² ~ N(0, κ² C), κ² ~ IG(a, b): compare E[1{W₀ < c}] with the
        // marginal t CDF along the first coordinate, which is t_{2a}(0, b/a·C₀₀).
        let knots = equispaced_knots(3);
        let hyper = GpHyper { knots_m: 3, ..GpHyper::default() };
        let lam = 4.0;
        let t = GpTables::with_lambdas(&[0.0, 1.0], knots.clone(), vec![lam], &hyper).unwrap();
        let l = t.chol[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gamma = Gamma::new(hyper.a_kappa, 1.0 / hyper.b_kappa).unwrap();
        let n = 40_000;
        let mut hits = 0usize;
        let mut mean_logdens_gap = 0.0;
        for _ in 0..n {
            let kappa2 = 1.0 / gamma.sample(&mut rng);
            let z = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let w = (&l * z) * kappa2.sqrt();
            if w[0] < 0.5 {
                hits += 1;
            }
            let lp = t.marginal_log_prior(w.as_slice()).log_density;
            mean_logdens_gap += lp;
        }
        let st = StudentsT::new(0.0, (hyper.b_kappa / hyper.a_kappa).sqrt(), 2.0 * hyper.a_kappa).unwrap();
        use statrs::distribution::ContinuousCDF;
        let expect = st.cdf(0.5);
        let frac = hits as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((frac - expect).abs() < 4.0 * se, "{frac} vs {expect}");
        assert!((mean_logdens_gap / n as f64).is_finite());
    }
}
