//! τ grid construction and the grid-discretized log-likelihood.
//!
//! For each observation the conditional quantile curve τ ↦ Q(τ|x) is built by
//! trapezoidal accumulation outward from the anchor Q(τ₀|x) = γ₀ + x·γ, until
//! the response is bracketed. The density at y is the reciprocal of the
//! interpolated quantile slope.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::PredictorDomain;
use crate::par::{self, Execution};
use crate::quantile_model::{dot, CoefficientTables};

/// Working probability grid: an equispaced core plus geometrically refined tails.
#[derive(Debug, Clone, PartialEq)]
pub struct TauGrid {
    points: Vec<f64>,
    extended: Vec<f64>,
    mesh: f64,
    anchor: usize,
    n_target: usize,
}

impl TauGrid {
    /// Grid for sample size `n` anchored at τ₀ = 1/2.
    pub fn build(n: usize, mesh: f64) -> Result<Self> {
        Self::build_anchored(n, mesh, 0.5)
    }

    pub fn build_anchored(n: usize, mesh: f64, tau0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("grid sample size must be positive".into()));
        }
        if !(mesh > 0.0 && mesh < 0.5) {
            return Err(Error::InvalidParameter(format!("mesh must lie in (0, 0.5), got {mesh}")));
        }
        if !(tau0 > 0.0 && tau0 < 1.0) {
            return Err(Error::InvalidParameter(format!("tau0 must lie in (0, 1), got {tau0}")));
        }
        // k/steps is exact at 0.5 and friendlier than k*mesh when 1/mesh is whole
        let steps = (1.0 / mesh).round();
        let whole = ((1.0 / mesh) - steps).abs() < 1e-9;
        let mut core = Vec::new();
        let mut k = 1usize;
        loop {
            let t = if whole { k as f64 / steps } else { k as f64 * mesh };
            if t >= 1.0 - 0.5 * mesh {
                break;
            }
            core.push(t);
            k += 1;
        }
        let edge = 0.5 / n as f64;
        const SLACK: f64 = 1e-12;

        let mut lower = Vec::new();
        let mut t = core[0];
        while t > edge + SLACK {
            t *= 0.5;
            lower.push(t);
        }
        lower.reverse();

        let mut upper = Vec::new();
        let mut t = *core.last().unwrap();
        while t < 1.0 - edge - SLACK {
            t = 0.5 * (t + 1.0);
            upper.push(t);
        }

        let mut points = lower;
        points.extend(core);
        points.extend(upper);

        let mut extended = Vec::with_capacity(points.len() + 2);
        extended.push(0.0);
        extended.extend_from_slice(&points);
        extended.push(1.0);

        let anchor = nearest(&points, tau0);
        Ok(TauGrid {
            points,
            extended,
            mesh,
            anchor,
            n_target: n,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Grid points with 0 and 1 appended at either end; latent curves are
    /// tabulated here so ζ can be normalized over the whole unit interval.
    pub fn extended(&self) -> &[f64] {
        &self.extended
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn nearest_index(&self, tau: f64) -> usize {
        nearest(&self.points, tau)
    }
}

fn nearest(points: &[f64], tau: f64) -> usize {
    let mut best = 0;
    for (i, t) in points.iter().enumerate() {
        if (t - tau).abs() < (points[best] - tau).abs() {
            best = i;
        }
    }
    best
}

/// Centered predictors, responses and right-censoring flags.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub domain: PredictorDomain,
    pub y: Vec<f64>,
    pub censored: Vec<bool>,
}

impl Dataset {
    pub fn new(domain: PredictorDomain, y: Vec<f64>, censored: Option<Vec<bool>>) -> Result<Self> {
        if y.len() != domain.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} predictor rows",
                y.len(),
                domain.n()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("response {i} is not finite")));
        }
        let censored = censored.unwrap_or_else(|| vec![false; y.len()]);
        if censored.len() != y.len() {
            return Err(Error::DimensionMismatch("censoring flags do not match responses".into()));
        }
        Ok(Dataset { domain, y, censored })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.domain.p()
    }

    pub fn any_censored(&self) -> bool {
        self.censored.iter().any(|c| *c)
    }

    /// Subset of rows, keeping the centering offset.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let raw: Vec<Vec<f64>> = rows.iter().map(|&i| self.domain.raw_row(i)).collect();
        let domain = PredictorDomain::with_offset(&raw, self.domain.offset().to_vec())?;
        Dataset::new(
            domain,
            rows.iter().map(|&i| self.y[i]).collect(),
            Some(rows.iter().map(|&i| self.censored[i]).collect()),
        )
    }
}

/// Where a response falls on the tabulated quantile curve of its predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// Below the quantile at the first grid point.
    Below,
    /// Above the quantile at the last grid point.
    Above,
    /// Q(t_lo) < y ≤ Q(t_lo+1), with α the linear position inside the cell.
    Inside { lo: usize, alpha: f64, s_lo: f64, s_hi: f64 },
}

/// Trapezoidal search from the anchor. Ties y = Q(t_l) go to the lower cell.
pub fn locate(tables: &CoefficientTables, x: &[f64], y: f64) -> Bracket {
    let pts = tables.grid.points();
    let len = pts.len();
    let k = tables.grid.anchor();
    let q0 = tables.beta0[k] + dot(x, tables.beta_row(k));
    let inside = |lo: usize, ql: f64, qu: f64, s_lo: f64, s_hi: f64| {
        let alpha = if qu > ql { (y - ql) / (qu - ql) } else { 0.0 };
        Bracket::Inside { lo, alpha, s_lo, s_hi }
    };
    if y > q0 {
        let mut qu = q0;
        let mut l = k;
        let mut s_hi = tables.slope_at(k, x);
        loop {
            let ql = qu;
            let s_lo = s_hi;
            if l + 1 >= len {
                return Bracket::Above;
            }
            l += 1;
            s_hi = tables.slope_at(l, x);
            qu = ql + 0.5 * (pts[l] - pts[l - 1]) * (s_lo + s_hi);
            if y <= qu {
                return inside(l - 1, ql, qu, s_lo, s_hi);
            }
        }
    } else {
        let mut ql = q0;
        let mut l = k;
        let mut s_lo = tables.slope_at(k, x);
        loop {
            let qu = ql;
            let s_hi = s_lo;
            if l == 0 {
                return Bracket::Below;
            }
            l -= 1;
            s_lo = tables.slope_at(l, x);
            ql = qu - 0.5 * (pts[l + 1] - pts[l]) * (s_lo + s_hi);
            if y > ql {
                return inside(l, ql, qu, s_lo, s_hi);
            }
        }
    }
}

/// Log-density contribution of an uncensored response.
#[inline]
pub fn density_term(bracket: Bracket) -> f64 {
    match bracket {
        Bracket::Inside { alpha, s_lo, s_hi, .. } => {
            let s = (1.0 - alpha) * s_lo + alpha * s_hi;
            if s > 0.0 {
                -s.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        _ => f64::NEG_INFINITY,
    }
}

/// Log-survival contribution of a right-censored response.
#[inline]
pub fn survival_term(bracket: Bracket, grid: &TauGrid) -> f64 {
    match bracket {
        Bracket::Inside { lo, alpha, .. } => {
            let pts = grid.points();
            let tau = pts[lo] + alpha * (pts[lo + 1] - pts[lo]);
            (-tau).ln_1p()
        }
        Bracket::Above => (-grid.last()).ln_1p(),
        Bracket::Below => (-grid.first()).ln_1p(),
    }
}

/// Result of inverting the conditional quantile curve at a response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSolve {
    Below,
    Above,
    Inside(f64),
}

impl TauSolve {
    /// τ̂ clamped to the grid range.
    pub fn clamped(self, grid: &TauGrid) -> f64 {
        match self {
            TauSolve::Below => grid.first(),
            TauSolve::Above => grid.last(),
            TauSolve::Inside(t) => t,
        }
    }
}

pub fn solve_tau(x: &[f64], y: f64, tables: &CoefficientTables) -> TauSolve {
    match locate(tables, x, y) {
        Bracket::Below => TauSolve::Below,
        Bracket::Above => TauSolve::Above,
        Bracket::Inside { lo, alpha, .. } => {
            let pts = tables.grid.points();
            TauSolve::Inside(pts[lo] + alpha * (pts[lo + 1] - pts[lo]))
        }
    }
}

fn check_compatible(data: &Dataset, tables: &CoefficientTables) -> Result<()> {
    if tables.p != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "tables have {} slopes, data have {} predictors",
            tables.p,
            data.p()
        )));
    }
    let len = tables.grid.len();
    if tables.beta0.len() != len || tables.dbeta0.len() != len || tables.beta.len() != len * tables.p {
        return Err(Error::DimensionMismatch("coefficient tables do not match their grid".into()));
    }
    Ok(())
}

const CHUNK: usize = 64;

fn accumulate<F>(n: usize, exec: Execution, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if !exec.is_parallel() || n <= CHUNK {
        let mut total = 0.0;
        for i in 0..n {
            total += term(i);
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
        return total;
    }
    let chunks = n.div_ceil(CHUNK);
    let parts = par::map_range(exec, chunks, |c| {
        (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&term).collect::<Vec<f64>>()
    });
    // same left-to-right order as the sequential loop
    let mut total = 0.0;
    for v in parts.iter().flatten() {
        total += v;
    }
    total
}

/// Log-likelihood ignoring censoring flags; −∞ if any response is outside
/// the range covered by the grid.
pub fn log_likelihood(data: &Dataset, tables: &CoefficientTables, exec: Execution) -> Result<f64> {
    check_compatible(data, tables)?;
    Ok(accumulate(data.n(), exec, |i| {
        density_term(locate(tables, data.domain.row(i), data.y[i]))
    }))
}

/// Log-likelihood with right-censored observations contributing log(1 − τ̂).
pub fn log_likelihood_censored(data: &Dataset, tables: &CoefficientTables, exec: Execution) -> Result<f64> {
    check_compatible(data, tables)?;
    Ok(accumulate(data.n(), exec, |i| {
        let b = locate(tables, data.domain.row(i), data.y[i]);
        if data.censored[i] {
            survival_term(b, &tables.grid)
        } else {
            density_term(b)
        }
    }))
}

/// Per-observation terms (censoring-aware), in data order.
pub fn log_likelihood_terms(data: &Dataset, tables: &CoefficientTables, exec: Execution) -> Result<Vec<f64>> {
    check_compatible(data, tables)?;
    Ok(par::map_range(exec, data.n(), |i| {
        let b = locate(tables, data.domain.row(i), data.y[i]);
        if data.censored[i] {
            survival_term(b, &tables.grid)
        } else {
            density_term(b)
        }
    }))
}

/// Shared grid handle for callers that build many tables.
pub fn shared_grid(n: usize, mesh: f64) -> Result<Arc<TauGrid>> {
    TauGrid::build(n, mesh).map(Arc::new)
}
