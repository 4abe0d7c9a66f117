//! Adaptive blocked random-walk Metropolis over the full parameter θ.
//!
//! Block order within an iteration: (W_j, γ_j) for j = 0..=p with γ₀ paired
//! with W₀, then (γ₀, γ), then (log σ², log ν) (log σ² alone for a Gaussian
//! base). Each block carries its own adapted Gaussian proposal.

use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::base_dist::{BaseFamily, BaseQuartet};
use crate::error::{Error, Result};
use crate::gp_prior::{GpHyper, GpTables};
use crate::likelihood::{self, Dataset, TauGrid};
use crate::par::{self, Execution};
use crate::quantile_model::{self, CoefficientTables, Location};

/// Full sampler state θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaState {
    /// Knot vectors W₀, …, W_p, each of length m.
    pub w: Vec<Vec<f64>>,
    pub gamma0: f64,
    pub gamma: Vec<f64>,
    pub log_sigma2: f64,
    /// NaN when the base family has no shape parameter.
    pub log_nu: f64,
}

impl ThetaState {
    pub fn dim(p: usize, m: usize) -> usize {
        (m + 1) * (p + 1) + 2
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }

    pub fn m(&self) -> usize {
        self.w.first().map_or(0, |w| w.len())
    }

    pub fn sigma(&self) -> f64 {
        (0.5 * self.log_sigma2).exp()
    }

    pub fn nu(&self) -> f64 {
        self.log_nu.exp()
    }

    /// Column names in [`ThetaState::to_vec`] order.
    pub fn names(p: usize, m: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(Self::dim(p, m));
        for j in 0..=p {
            for k in 1..=m {
                names.push(format!("w{j}_{k}"));
            }
        }
        names.push("gamma0".into());
        for j in 1..=p {
            names.push(format!("gamma{j}"));
        }
        names.push("log_sigma2".into());
        names.push("log_nu".into());
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.w.iter().flatten().copied().collect();
        v.push(self.gamma0);
        v.extend(&self.gamma);
        v.push(self.log_sigma2);
        v.push(self.log_nu);
        v
    }

    pub fn from_vec(v: &[f64], p: usize, m: usize) -> Result<Self> {
        if v.len() != Self::dim(p, m) {
            return Err(Error::DimensionMismatch(format!(
                "state vector has {} entries, expected {}",
                v.len(),
                Self::dim(p, m)
            )));
        }
        let w = (0..=p).map(|j| v[j * m..(j + 1) * m].to_vec()).collect();
        let o = (p + 1) * m;
        Ok(ThetaState {
            w,
            gamma0: v[o],
            gamma: v[o + 1..o + 1 + p].to_vec(),
            log_sigma2: v[o + 1 + p],
            log_nu: v[o + 2 + p],
        })
    }

    /// Indices into [`ThetaState::to_vec`] for each update block.
    pub fn blocks(p: usize, m: usize, family: BaseFamily) -> Vec<Vec<usize>> {
        let g0 = (p + 1) * m;
        let mut blocks: Vec<Vec<usize>> = (0..=p)
            .map(|j| {
                let mut b: Vec<usize> = (j * m..(j + 1) * m).collect();
                b.push(g0 + j);
                b
            })
            .collect();
        blocks.push((g0..=g0 + p).collect());
        let mut last = vec![g0 + p + 1];
        if family == BaseFamily::StudentT {
            last.push(g0 + p + 2);
        }
        blocks.push(last);
        blocks
    }
}

/// Standard logistic log-density at ν/6 plus the log-ν Jacobian.
pub fn log_nu_prior(log_nu: f64) -> f64 {
    let u = log_nu.exp() / 6.0;
    if !u.is_finite() {
        return f64::NEG_INFINITY;
    }
    // log[e^{-u} / (1+e^{-u})²] written to stay finite for large u
    let e = (-u).exp();
    -u - 2.0 * e.ln_1p() + u.ln()
}

/// Log prior density of θ: GP mixture terms for every knot vector, flat in
/// (γ₀, γ, log σ²), logistic on ν/6.
pub fn log_prior(theta: &ThetaState, gp: &GpTables, family: BaseFamily) -> f64 {
    let w: f64 = theta.w.iter().map(|w| gp.marginal_log_prior(w).log_density).sum();
    match family {
        BaseFamily::StudentT => w + log_nu_prior(theta.log_nu),
        BaseFamily::Gaussian => w,
    }
}

/// Everything needed to evaluate the posterior of θ.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub data: Dataset,
    pub grid: Arc<TauGrid>,
    pub gp: GpTables,
    pub family: BaseFamily,
    pub exec: Execution,
}

impl Posterior {
    pub fn new(data: Dataset, family: BaseFamily, mesh: f64, hyper: &GpHyper, exec: Execution) -> Result<Self> {
        let grid = Arc::new(TauGrid::build(data.n(), mesh)?);
        let gp = GpTables::build(grid.extended(), hyper)?;
        Ok(Posterior { data, grid, gp, family, exec })
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn m(&self) -> usize {
        self.gp.m()
    }

    pub fn base(&self, log_nu: f64) -> Result<BaseQuartet> {
        match self.family {
            BaseFamily::StudentT => BaseQuartet::student_t(log_nu.exp()),
            BaseFamily::Gaussian => Ok(BaseQuartet::gaussian()),
        }
    }

    /// Coefficient tables for θ.
    pub fn tables(&self, theta: &ThetaState) -> Result<CoefficientTables> {
        self.check_shape(theta)?;
        let curves: Vec<Vec<f64>> = theta.w.iter().map(|w| self.gp.curve(w).1).collect();
        let base = self.base(theta.log_nu)?;
        let loc = Location { gamma0: theta.gamma0, gamma: &theta.gamma, sigma: theta.sigma() };
        quantile_model::build_coefficients(loc, &curves, &base, &self.grid, &self.data.domain)
    }

    pub fn log_likelihood(&self, tables: &CoefficientTables) -> Result<f64> {
        if self.data.any_censored() {
            likelihood::log_likelihood_censored(&self.data, tables, self.exec)
        } else {
            likelihood::log_likelihood(&self.data, tables, self.exec)
        }
    }

    /// (log prior, log likelihood); invalid states give a −∞ likelihood.
    pub fn evaluate(&self, theta: &ThetaState) -> Result<(f64, f64)> {
        self.check_shape(theta)?;
        let lp = log_prior(theta, &self.gp, self.family);
        let ll = match self.tables(theta) {
            Ok(t) => self.log_likelihood(&t)?,
            Err(Error::InvalidState(_)) | Err(Error::InvalidParameter(_)) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        Ok((lp, ll))
    }

    fn check_shape(&self, theta: &ThetaState) -> Result<()> {
        if theta.p() != self.p() || theta.w.len() != self.p() + 1 || theta.w.iter().any(|w| w.len() != self.m()) {
            return Err(Error::DimensionMismatch(format!(
                "state does not match p = {}, m = {}",
                self.p(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Least-squares location, log residual variance, W = 0, ν = 6.
    pub fn initial_state(&self) -> Result<ThetaState> {
        let (coef, resid_var) = least_squares(&self.data)?;
        Ok(ThetaState {
            w: vec![vec![0.0; self.m()]; self.p() + 1],
            gamma0: coef[0],
            gamma: coef[1..].to_vec(),
            log_sigma2: resid_var.ln(),
            log_nu: match self.family {
                BaseFamily::StudentT => 6f64.ln(),
                BaseFamily::Gaussian => f64::NAN,
            },
        })
    }
}

/// Ordinary least squares on centered predictors with an intercept.
/// Returns the coefficients and the residual variance.
pub fn least_squares(data: &Dataset) -> Result<(Vec<f64>, f64)> {
    let (n, p) = (data.n(), data.p());
    if n < p + 1 {
        return Err(Error::TooFewObservations { needed: p + 1, got: n });
    }
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { data.domain.row(i)[j - 1] });
    let y = DVector::from_column_slice(&data.y);
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Numeric(format!("least squares failed: {e}")))?;
    let resid = &y - &x * &coef;
    let dof = (n - p - 1).max(1) as f64;
    let mut var = resid.norm_squared() / dof;
    let mean = data.y.iter().sum::<f64>() / n as f64;
    let total = data.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(2) as f64;
    let floor = 1e-8 * total.max(1e-300);
    if !(var > floor) {
        var = if total > 0.0 { floor } else { 1.0 };
    }
    Ok((coef.iter().copied().collect(), var))
}

/// Sampler tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iters: usize,
    /// Fraction of iterations discarded as burn-in.
    pub burnin: f64,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub target_accept: f64,
    /// Block updates before the proposal covariance starts adapting.
    pub cov_warmup: usize,
    /// Stop adapting once burn-in ends.
    pub freeze_after_burnin: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iters: 10_000,
            burnin: 0.1,
            thin: 45,
            seed: 1,
            chains: 1,
            target_accept: 0.234,
            cov_warmup: 100,
            freeze_after_burnin: false,
        }
    }
}

impl SamplerConfig {
    pub fn burnin_iters(&self) -> usize {
        (self.burnin * self.iters as f64).round() as usize
    }

    pub fn retained(&self) -> usize {
        (self.iters - self.burnin_iters()) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.thin == 0 || self.chains == 0 {
            return Err(Error::InvalidParameter("iters, thin and chains must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burnin) {
            return Err(Error::InvalidParameter(format!("burnin fraction must lie in [0, 1), got {}", self.burnin)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Adapted Gaussian random-walk proposal for one block.
#[derive(Debug, Clone)]
pub struct BlockAdaptState {
    pub cov: DMatrix<f64>,
    pub log_scale: f64,
    pub mean: DVector<f64>,
    pub accept_target: f64,
    pub count: usize,
    pub cov_warmup: usize,
    chol: DMatrix<f64>,
}

/// Step size of the adaptation at update t.
#[inline]
pub fn adapt_step(t: usize) -> f64 {
    (t.max(1) as f64).powf(-0.6)
}

impl BlockAdaptState {
    /// Identity × `init_sd²/dim` proposal centered at `start`.
    pub fn new(start: &[f64], init_sd: f64, accept_target: f64, cov_warmup: usize) -> Self {
        let d = start.len();
        let cov = DMatrix::identity(d, d) * (init_sd * init_sd / d as f64);
        let chol = cov.clone().cholesky().expect("diagonal covariance").l();
        BlockAdaptState {
            cov,
            log_scale: 0.0,
            mean: DVector::from_column_slice(start),
            accept_target,
            count: 0,
            cov_warmup,
            chol,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// current + exp(log_scale/2) · L z.
    pub fn propose<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * z * (0.5 * self.log_scale).exp();
        current.iter().zip(step.iter()).map(|(c, s)| c + s).collect()
    }

    /// Robbins–Monro update after one Metropolis step; `state` is the block
    /// value after the accept/reject decision. Returns the log-scale increment.
    pub fn adapt(&mut self, state: &[f64], accept_prob: f64) -> f64 {
        self.count += 1;
        let g = adapt_step(self.count);
        let inc = g * (accept_prob - self.accept_target);
        self.log_scale += inc;
        let x = DVector::from_column_slice(state);
        let diff = &x - &self.mean;
        self.mean += &diff * g;
        if self.count > self.cov_warmup {
            let outer = &diff * diff.transpose();
            let next = &self.cov + (outer - &self.cov) * g;
            self.set_cov(next);
        }
        inc
    }

    fn set_cov(&mut self, mut cov: DMatrix<f64>) {
        let d = self.dim();
        let scale = cov.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut jitter = 1e-10 * scale;
        for _ in 0..8 {
            if let Some(ch) = cov.clone().cholesky() {
                self.cov = cov;
                self.chol = ch.l();
                return;
            }
            for i in 0..d {
                cov[(i, i)] += jitter;
            }
            jitter *= 100.0;
        }
        // keep the previous proposal if the update cannot be repaired
    }
}

/// One retained draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iter: usize,
    pub chain: usize,
    pub logpost: f64,
    pub loglik: f64,
    pub theta: ThetaState,
}

/// Output of one or more chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<Draw>,
    /// Post burn-in acceptance rate per block, per chain.
    pub acceptance: Vec<Vec<f64>>,
    /// Acceptance rate per block over each thinning window, per chain.
    pub acceptance_trace: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
    pub config: SamplerConfig,
    pub elapsed_secs: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn thetas(&self) -> impl Iterator<Item = &ThetaState> {
        self.draws.iter().map(|d| &d.theta)
    }
}

/// Derived quantities cached alongside θ so a block update only recomputes
/// what it touches.
#[derive(Debug, Clone)]
struct Cached {
    theta: ThetaState,
    curves: Vec<Vec<f64>>,
    w_prior: Vec<f64>,
    zeta: Vec<f64>,
    dzeta: Vec<f64>,
    q0: Vec<f64>,
    directions: Vec<f64>,
    loglik: f64,
    logprior: f64,
}

#[derive(Clone, Copy)]
enum Touched {
    Knots(usize),
    Location,
    ScaleShape,
}

impl Posterior {
    fn nu_prior(&self, log_nu: f64) -> f64 {
        match self.family {
            BaseFamily::StudentT => log_nu_prior(log_nu),
            BaseFamily::Gaussian => 0.0,
        }
    }

    fn fresh(&self, theta: ThetaState) -> Result<Cached> {
        let mut w_prior = Vec::with_capacity(theta.w.len());
        let mut curves = Vec::with_capacity(theta.w.len());
        for w in &theta.w {
            let (lp, c) = self.gp.curve(w);
            w_prior.push(lp);
            curves.push(c);
        }
        let (zeta, dzeta) = quantile_model::logistic_map(&curves[0], self.grid.extended());
        let q0 = match self.base(theta.log_nu) {
            Ok(b) => quantile_model::base_quantile_density(&zeta, &b),
            Err(_) => vec![f64::NAN; zeta.len()],
        };
        let directions =
            quantile_model::direction_table(&curves[1..], self.grid.extended(), &zeta, &self.data.domain);
        let mut c = Cached {
            logprior: w_prior.iter().sum::<f64>() + self.nu_prior(theta.log_nu),
            theta,
            curves,
            w_prior,
            zeta,
            dzeta,
            q0,
            directions,
            loglik: 0.0,
        };
        c.loglik = self.cached_loglik(&c)?;
        Ok(c)
    }

    fn cached_loglik(&self, c: &Cached) -> Result<f64> {
        if !(c.theta.log_sigma2.is_finite()) {
            return Ok(f64::NEG_INFINITY);
        }
        let loc = Location { gamma0: c.theta.gamma0, gamma: &c.theta.gamma, sigma: c.theta.sigma() };
        match quantile_model::assemble(loc, &self.grid, c.zeta.clone(), c.dzeta.clone(), &c.q0, &c.directions) {
            Ok(t) => self.log_likelihood(&t),
            Err(Error::InvalidState(_)) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn update(&self, cur: &Cached, theta: ThetaState, touched: Touched) -> Result<Cached> {
        let mut c = Cached { theta, ..cur.clone() };
        match touched {
            Touched::Knots(j) => {
                let (lp, curve) = self.gp.curve(&c.theta.w[j]);
                c.w_prior[j] = lp;
                c.curves[j] = curve;
                if j == 0 {
                    let (z, dz) = quantile_model::logistic_map(&c.curves[0], self.grid.extended());
                    c.zeta = z;
                    c.dzeta = dz;
                    c.q0 = match self.base(c.theta.log_nu) {
                        Ok(b) => quantile_model::base_quantile_density(&c.zeta, &b),
                        Err(_) => vec![f64::NAN; c.zeta.len()],
                    };
                }
                c.directions =
                    quantile_model::direction_table(&c.curves[1..], self.grid.extended(), &c.zeta, &self.data.domain);
            }
            Touched::Location => {}
            Touched::ScaleShape => {
                if self.family == BaseFamily::StudentT && c.theta.log_nu != cur.theta.log_nu {
                    c.q0 = match self.base(c.theta.log_nu) {
                        Ok(b) => quantile_model::base_quantile_density(&c.zeta, &b),
                        Err(_) => vec![f64::NAN; c.zeta.len()],
                    };
                }
            }
        }
        c.logprior = c.w_prior.iter().sum::<f64>() + self.nu_prior(c.theta.log_nu);
        c.loglik = if c.logprior.is_finite() { self.cached_loglik(&c)? } else { f64::NEG_INFINITY };
        Ok(c)
    }
}

const MAX_INIT_INFLATIONS: usize = 20;

/// Runs one chain using stream `chain` of the master seed.
pub fn run_chain(post: &Posterior, config: &SamplerConfig, chain: usize) -> Result<PosteriorDraws> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);

    let mut theta = post.initial_state()?;
    let mut cur = post.fresh(theta.clone())?;
    let mut inflations = 0;
    while cur.loglik == f64::NEG_INFINITY {
        if inflations == MAX_INIT_INFLATIONS {
            return Err(Error::Initialization(
                "log-likelihood is -inf at the least-squares start even after widening sigma; \
                 widen the initial scale or check the scaling of the response"
                    .into(),
            ));
        }
        theta.log_sigma2 += 4f64.ln();
        inflations += 1;
        cur = post.fresh(theta.clone())?;
    }
    if inflations > 0 {
        info!("chain {chain}: initial scale widened {inflations} time(s) to reach a finite likelihood");
    }

    let (p, m) = (post.p(), post.m());
    let blocks = ThetaState::blocks(p, m, post.family);
    let touched: Vec<Touched> = (0..blocks.len())
        .map(|b| {
            if b <= p {
                Touched::Knots(b)
            } else if b == p + 1 {
                Touched::Location
            } else {
                Touched::ScaleShape
            }
        })
        .collect();
    let start_vec = cur.theta.to_vec();
    let mut adapt: Vec<BlockAdaptState> = blocks
        .iter()
        .map(|b| {
            let s: Vec<f64> = b.iter().map(|&i| start_vec[i]).collect();
            BlockAdaptState::new(&s, 0.1, config.target_accept, config.cov_warmup)
        })
        .collect();

    let burn = config.burnin_iters();
    let mut draws = Vec::with_capacity(config.retained());
    let mut accepted = vec![0usize; blocks.len()];
    let mut window = vec![0usize; blocks.len()];
    let mut trace = Vec::new();
    for it in 1..=config.iters {
        let adapting = !(config.freeze_after_burnin && it > burn);
        for (b, idx) in blocks.iter().enumerate() {
            let mut v = cur.theta.to_vec();
            let old: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            let new = adapt[b].propose(&old, &mut rng);
            for (&i, x) in idx.iter().zip(&new) {
                v[i] = *x;
            }
            let proposal = ThetaState::from_vec(&v, p, m)?;
            let cand = post.update(&cur, proposal, touched[b])?;
            let log_ratio = (cand.loglik + cand.logprior) - (cur.loglik + cur.logprior);
            let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            let u: f64 = rng.random();
            let took = u < accept_prob;
            if took {
                cur = cand;
                if it > burn {
                    accepted[b] += 1;
                }
                window[b] += 1;
            }
            if adapting {
                let now: Vec<f64> = if took { new } else { old };
                adapt[b].adapt(&now, accept_prob);
            }
        }
        if it > burn && (it - burn).is_multiple_of(config.thin) {
            trace.push(window.iter().map(|a| *a as f64 / config.thin as f64).collect());
            window.iter_mut().for_each(|a| *a = 0);
            draws.push(Draw {
                iter: it,
                chain,
                logpost: cur.loglik + cur.logprior,
                loglik: cur.loglik,
                theta: cur.theta.clone(),
            });
        } else if it == burn {
            window.iter_mut().for_each(|a| *a = 0);
        }
        if it % 1000 == 0 {
            debug!("chain {chain}: iteration {it}, log posterior {}", cur.loglik + cur.logprior);
        }
    }
    let kept = (config.iters - burn).max(1) as f64;
    Ok(PosteriorDraws {
        draws,
        acceptance: vec![accepted.iter().map(|a| *a as f64 / kept).collect()],
        acceptance_trace: vec![trace],
        seed: config.seed,
        config: config.clone(),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `config.chains` chains (in parallel when `exec` allows) and pools
/// their draws in chain order.
pub fn run_chains(post: &Posterior, config: &SamplerConfig, exec: Execution) -> Result<PosteriorDraws> {
    let start = Instant::now();
    let runs = par::map_range(exec, config.chains, |c| run_chain(post, config, c));
    let mut out = PosteriorDraws {
        draws: Vec::new(),
        acceptance: Vec::new(),
        acceptance_trace: Vec::new(),
        seed: config.seed,
        config: config.clone(),
        elapsed_secs: 0.0,
    };
    for r in runs {
        let r = r?;
        out.draws.extend(r.draws);
        out.acceptance.extend(r.acceptance);
        out.acceptance_trace.extend(r.acceptance_trace);
    }
    out.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Model and sampler settings for a complete fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub family: BaseFamily,
    pub mesh: f64,
    pub hyper: GpHyper,
    pub sampler: SamplerConfig,
    pub exec: Execution,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            family: BaseFamily::StudentT,
            mesh: 0.01,
            hyper: GpHyper::default(),
            sampler: SamplerConfig::default(),
            exec: Execution::default(),
        }
    }
}

/// Centers raw predictors, builds the posterior and runs the chains.
pub fn fit(raw_x: &[Vec<f64>], y: Vec<f64>, censored: Option<Vec<bool>>, settings: &FitSettings) -> Result<(Posterior, PosteriorDraws)> {
    let domain = crate::geometry::center_predictors(raw_x)?;
    let data = Dataset::new(domain, y, censored)?;
    let post = Posterior::new(data, settings.family, settings.mesh, &settings.hyper, settings.exec)?;
    let draws = run_chains(&post, &settings.sampler, settings.exec)?;
    Ok((post, draws))
}
