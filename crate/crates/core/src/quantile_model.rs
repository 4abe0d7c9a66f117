//! The constraint-free reparametrization of joint linear quantile planes.
//!
//! Given unconstrained curves w₀, w₁, …, w_p tabulated on the τ grid, plus a
//! location (γ₀, γ) and scale σ, this module builds intercept and slope
//! curves whose planes never cross on the predictor domain:
//!
//! * ζ is the normalized running integral of exp(w₀) (a diffeomorphism of [0,1]);
//! * β̇₀(τ) = σ q₀(ζ(τ)) ζ̇(τ);
//! * β̇(τ) = β̇₀(τ) h(τ), with h the normalized direction of v(τ) = w(ζ(τ));
//! * β₀ and β are integrated outward from the grid point nearest τ₀.
//!
//! The inverse direction ([`recover_direction`], [`zeta_from_intercept`])
//! reconstructs the latent curves from any valid set of planes.

use std::sync::Arc;

use crate::base_dist::BaseQuartet;
use crate::error::{Error, Result};
use crate::geometry::PredictorDomain;
use crate::likelihood::TauGrid;

/// Intercept and slope curves tabulated on a [`TauGrid`].
///
/// Row-major `beta`/`dbeta` are L×p. Tables built from explicit curves via
/// [`CoefficientTables::from_curves`] carry the identity for ζ.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTables {
    pub grid: Arc<TauGrid>,
    pub p: usize,
    pub beta0: Vec<f64>,
    pub beta: Vec<f64>,
    pub dbeta0: Vec<f64>,
    pub dbeta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub dzeta: Vec<f64>,
}

impl CoefficientTables {
    pub fn len(&self) -> usize {
        self.beta0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta0.is_empty()
    }

    #[inline]
    pub fn beta_row(&self, l: usize) -> &[f64] {
        &self.beta[l * self.p..(l + 1) * self.p]
    }

    #[inline]
    pub fn dbeta_row(&self, l: usize) -> &[f64] {
        &self.dbeta[l * self.p..(l + 1) * self.p]
    }

    pub fn gamma0(&self) -> f64 {
        self.beta0[self.grid.anchor()]
    }

    pub fn gamma(&self) -> &[f64] {
        self.beta_row(self.grid.anchor())
    }

    /// Slope of the quantile plane at x: β̇₀(t_l) + x·β̇(t_l).
    #[inline]
    pub fn slope_at(&self, l: usize, x: &[f64]) -> f64 {
        self.dbeta0[l] + dot(x, self.dbeta_row(l))
    }

    /// Q(t_l | x) = β₀(t_l) + x·β(t_l).
    pub fn quantile_at(&self, l: usize, x: &[f64]) -> f64 {
        self.beta0[l] + dot(x, self.beta_row(l))
    }

    /// Coefficients (β₀, β₁, …, β_p) at τ, linearly interpolated between
    /// grid points. `None` when τ is outside the grid.
    pub fn coefficients_at(&self, tau: f64) -> Option<Vec<f64>> {
        let pts = self.grid.points();
        let (lo, w) = bracket(pts, tau)?;
        let hi = (lo + 1).min(pts.len() - 1);
        let mut out = Vec::with_capacity(self.p + 1);
        out.push((1.0 - w) * self.beta0[lo] + w * self.beta0[hi]);
        for j in 0..self.p {
            out.push((1.0 - w) * self.beta_row(lo)[j] + w * self.beta_row(hi)[j]);
        }
        Some(out)
    }

    /// Builds tables from explicit curves (used for known truths).
    pub fn from_curves<F0, F, D0, D>(
        grid: Arc<TauGrid>,
        p: usize,
        beta0: F0,
        beta: F,
        dbeta0: D0,
        dbeta: D,
    ) -> Self
    where
        F0: Fn(f64) -> f64,
        F: Fn(f64) -> Vec<f64>,
        D0: Fn(f64) -> f64,
        D: Fn(f64) -> Vec<f64>,
    {
        let pts = grid.points().to_vec();
        let mut t = CoefficientTables {
            p,
            beta0: pts.iter().map(|&u| beta0(u)).collect(),
            beta: Vec::with_capacity(pts.len() * p),
            dbeta0: pts.iter().map(|&u| dbeta0(u)).collect(),
            dbeta: Vec::with_capacity(pts.len() * p),
            zeta: pts.clone(),
            dzeta: vec![1.0; pts.len()],
            grid,
        };
        for &u in &pts {
            t.beta.extend(beta(u));
            t.dbeta.extend(dbeta(u));
        }
        t
    }

    /// Expresses the tables in raw predictor coordinates, where x_raw =
    /// x_centered + offset: β₀ shifts by −offset·β, slopes are unchanged.
    pub fn raw_intercept(&self, offset: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|l| self.beta0[l] - dot(offset, self.beta_row(l)))
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index `lo` and weight `w` with `tau = (1-w) pts[lo] + w pts[lo+1]`.
pub(crate) fn bracket(pts: &[f64], tau: f64) -> Option<(usize, f64)> {
    let last = pts.len().checked_sub(1)?;
    if !(tau >= pts[0] && tau <= pts[last]) {
        return None;
    }
    if last == 0 {
        return Some((0, 0.0));
    }
    let hi = pts.partition_point(|&t| t < tau).clamp(1, last);
    let lo = hi - 1;
    let w = (tau - pts[lo]) / (pts[hi] - pts[lo]);
    Some((lo, w))
}

/// ζ and ζ̇ from w₀ tabulated on the extended abscissae {0, t₁, …, t_L, 1}.
///
/// Returns values at the interior points t₁…t_L. The exponentials are
/// shifted by max(w₀), and ζ(0) = 0, ζ(1) = 1 hold exactly.
pub fn logistic_map(w0_ext: &[f64], ext: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(w0_ext.len(), ext.len(), "w0 must be tabulated on the extended grid");
    let shift = w0_ext.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w0_ext.iter().map(|w| (w - shift).exp()).collect();
    let mut cum = Vec::with_capacity(e.len());
    cum.push(0.0);
    for i in 1..e.len() {
        let prev = cum[i - 1];
        cum.push(prev + 0.5 * (ext[i] - ext[i - 1]) * (e[i - 1] + e[i]));
    }
    let total = *cum.last().unwrap();
    let inner = 1..e.len() - 1;
    let zeta = cum[inner.clone()].iter().map(|c| c / total).collect();
    let dzeta = e[inner].iter().map(|v| v / total).collect();
    (zeta, dzeta)
}

/// h = w / (a(w, 𝒳) √(1 + ‖w‖²)), with h = 0 at w = 0.
pub fn normalize_direction(w: &[f64], domain: &PredictorDomain) -> Vec<f64> {
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    if norm2 == 0.0 {
        return vec![0.0; w.len()];
    }
    let a = domain.support_scale(w);
    let denom = a * (1.0 + norm2).sqrt();
    w.iter().map(|v| v / denom).collect()
}

/// Linear interpolation of a curve tabulated on increasing `xs` at `x`,
/// starting the search at `*cursor` (for monotone sweeps).
#[inline]
fn interp_sweep(xs: &[f64], ys: &[f64], x: f64, cursor: &mut usize) -> f64 {
    let last = xs.len() - 1;
    while *cursor + 1 < last && xs[*cursor + 1] < x {
        *cursor += 1;
    }
    let i = *cursor;
    let w = ((x - xs[i]) / (xs[i + 1] - xs[i])).clamp(0.0, 1.0);
    (1.0 - w) * ys[i] + w * ys[i + 1]
}

/// q₀(ζ(t_l)) for each grid point; the part of β̇₀ that depends on ν.
pub fn base_quantile_density(zeta: &[f64], base: &BaseQuartet) -> Vec<f64> {
    zeta.iter().map(|&z| base.quantile_density(z)).collect()
}

/// Normalized directions h(t_l) = v/(a(v,𝒳)√(1+‖v‖²)) with v = w(ζ(t_l)),
/// where `w_ext[j]` tabulates w_{j+1} on the extended abscissae. Row-major L×p.
pub fn direction_table(
    w_ext: &[Vec<f64>],
    ext: &[f64],
    zeta: &[f64],
    domain: &PredictorDomain,
) -> Vec<f64> {
    let p = w_ext.len();
    let mut out = Vec::with_capacity(zeta.len() * p);
    let mut cursors = vec![0usize; p];
    let mut v = vec![0.0; p];
    for &z in zeta {
        for j in 0..p {
            v[j] = interp_sweep(ext, &w_ext[j], z, &mut cursors[j]);
        }
        out.extend(normalize_direction(&v, domain));
    }
    out
}

/// Location-scale part of the parameter.
#[derive(Debug, Clone, Copy)]
pub struct Location<'a> {
    pub gamma0: f64,
    pub gamma: &'a [f64],
    pub sigma: f64,
}

/// Combines precomputed pieces into coefficient tables: β̇₀ = σ q₀(ζ) ζ̇,
/// β̇ = β̇₀ h, then trapezoidal integration outward from the anchor.
pub fn assemble(
    loc: Location<'_>,
    grid: &Arc<TauGrid>,
    zeta: Vec<f64>,
    dzeta: Vec<f64>,
    q0_at_zeta: &[f64],
    directions: &[f64],
) -> Result<CoefficientTables> {
    let len = grid.len();
    let p = loc.gamma.len();
    if zeta.len() != len || dzeta.len() != len || q0_at_zeta.len() != len || directions.len() != len * p {
        return Err(Error::DimensionMismatch("coefficient pieces do not match the grid".into()));
    }
    let dbeta0: Vec<f64> = (0..len).map(|l| loc.sigma * q0_at_zeta[l] * dzeta[l]).collect();
    let mut dbeta = Vec::with_capacity(len * p);
    for l in 0..len {
        dbeta.extend(directions[l * p..(l + 1) * p].iter().map(|h| dbeta0[l] * h));
    }

    let pts = grid.points();
    let k = grid.anchor();
    let mut beta0 = vec![0.0; len];
    let mut beta = vec![0.0; len * p];
    beta0[k] = loc.gamma0;
    beta[k * p..(k + 1) * p].copy_from_slice(loc.gamma);
    for l in (k + 1)..len {
        let half = 0.5 * (pts[l] - pts[l - 1]);
        beta0[l] = beta0[l - 1] + half * (dbeta0[l - 1] + dbeta0[l]);
        for j in 0..p {
            beta[l * p + j] = beta[(l - 1) * p + j] + half * (dbeta[(l - 1) * p + j] + dbeta[l * p + j]);
        }
    }
    for l in (0..k).rev() {
        let half = 0.5 * (pts[l + 1] - pts[l]);
        beta0[l] = beta0[l + 1] - half * (dbeta0[l + 1] + dbeta0[l]);
        for j in 0..p {
            beta[l * p + j] = beta[(l + 1) * p + j] - half * (dbeta[(l + 1) * p + j] + dbeta[l * p + j]);
        }
    }

    if dbeta0.iter().chain(&beta0).chain(&beta).chain(&dbeta).any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("non-finite coefficient table entry".into()));
    }
    Ok(CoefficientTables {
        grid: Arc::clone(grid),
        p,
        beta0,
        beta,
        dbeta0,
        dbeta,
        zeta,
        dzeta,
    })
}

/// Full map from (γ₀, γ, σ, w̃₀…w̃_p) to coefficient tables.
///
/// `wtilde[j]` tabulates w̃_j on `grid.extended()`.
pub fn build_coefficients(
    loc: Location<'_>,
    wtilde: &[Vec<f64>],
    base: &BaseQuartet,
    grid: &Arc<TauGrid>,
    domain: &PredictorDomain,
) -> Result<CoefficientTables> {
    if wtilde.len() != loc.gamma.len() + 1 || loc.gamma.len() != domain.p() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} curves for p = {}, got {}",
            domain.p() + 1,
            domain.p(),
            wtilde.len()
        )));
    }
    if !(loc.sigma.is_finite() && loc.sigma > 0.0) {
        return Err(Error::InvalidState(format!("scale must be positive, got {}", loc.sigma)));
    }
    let ext = grid.extended();
    if wtilde.iter().any(|w| w.len() != ext.len() || w.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidState("latent curves must be finite and span the extended grid".into()));
    }
    let (zeta, dzeta) = logistic_map(&wtilde[0], ext);
    let q0 = base_quantile_density(&zeta, base);
    let h = direction_table(&wtilde[1..], ext, &zeta, domain);
    assemble(loc, grid, zeta, dzeta, &q0, &h)
}

/// Minimum over grid points and observed predictors of β̇₀ + x·β̇.
/// Positive exactly when the planes are ordered on the data hull.
pub fn check_noncrossing(tables: &CoefficientTables, domain: &PredictorDomain) -> f64 {
    let mut slack = f64::INFINITY;
    for l in 0..tables.len() {
        let db = tables.dbeta_row(l);
        // min over x of x·β̇ is −‖β̇‖ a(β̇, 𝒳)
        let worst = if db.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            -domain.max_negative_projection(db)
        };
        slack = slack.min(tables.dbeta0[l] + worst);
    }
    slack
}

/// Inverse construction: a direction curve v with β̇ = β̇₀ · v/(a(v)√(1+‖v‖²)).
/// Row-major L×p.
pub fn recover_direction(dbeta0: &[f64], dbeta: &[f64], domain: &PredictorDomain) -> Result<Vec<f64>> {
    let p = domain.p();
    if dbeta.len() != dbeta0.len() * p {
        return Err(Error::DimensionMismatch("slope table does not match intercept table".into()));
    }
    let mut out = Vec::with_capacity(dbeta.len());
    for (l, &d0) in dbeta0.iter().enumerate() {
        let db = &dbeta[l * p..(l + 1) * p];
        let norm = db.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if d0 <= 0.0 {
                return Err(Error::InvalidInput(format!("non-positive intercept slope at grid index {l}")));
            }
            out.extend(std::iter::repeat_n(0.0, p));
            continue;
        }
        let reach = domain.max_negative_projection(db);
        let ratio = d0 / reach;
        if !(ratio > 1.0) {
            return Err(Error::InvalidInput(format!(
                "planes cross on the domain at grid index {l} (slack {})",
                d0 - reach
            )));
        }
        let c = 1.0 / (ratio * ratio - 1.0).sqrt();
        out.extend(db.iter().map(|v| c * v / norm));
    }
    Ok(out)
}

/// ζ(τ) = F₀(γ₀ + (β₀(τ) − γ₀)/σ): the diffeomorphism that reproduces a
/// given monotone intercept curve.
pub fn zeta_from_intercept(beta0: &[f64], gamma0: f64, sigma: f64, base: &BaseQuartet) -> Vec<f64> {
    beta0.iter().map(|b| base.cdf(gamma0 + (b - gamma0) / sigma)).collect()
}
