//! Predictor-domain geometry: the support scale a(b, 𝒳) and centering of
//! raw predictors around an interior point of their convex hull.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Number of random unit directions used to confirm that a candidate
/// offset lies strictly inside the predictor hull.
pub const INTERIOR_CHECK_DIRECTIONS: usize = 256;
const INTERIOR_CHECK_SEED: u64 = 0x5eed_c0de;

/// Centered predictors. Row `i` of `points` plus `offset` is raw row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorDomain {
    n: usize,
    p: usize,
    points: Vec<f64>,
    offset: Vec<f64>,
    diameter: f64,
}

impl PredictorDomain {
    /// Wraps predictors that are already centered (offset zero).
    pub fn from_centered(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map(|r| r.len()).unwrap_or(0);
        Self::with_offset(rows, vec![0.0; p])
    }

    /// Builds a domain from raw rows by subtracting `offset`.
    pub fn with_offset(raw: &[Vec<f64>], offset: Vec<f64>) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::TooFewObservations { needed: 1, got: 0 });
        }
        let p = offset.len();
        let mut points = Vec::with_capacity(n * p);
        for (i, row) in raw.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} predictors, expected {p}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a non-finite predictor")));
            }
            points.extend(row.iter().zip(&offset).map(|(x, o)| x - o));
        }
        let diameter = diameter(&points, n, p);
        Ok(PredictorDomain {
            n,
            p,
            points,
            offset,
            diameter,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so p = 0 is handled separately.
        let p = self.p.max(1);
        let take = if self.p == 0 { 0 } else { self.n };
        self.points.chunks_exact(p).take(take)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Maximum pairwise distance between observed points.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Maps a raw predictor vector into the centered coordinates.
    pub fn center(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.offset).map(|(x, o)| x - o).collect()
    }

    pub fn raw_row(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().zip(&self.offset).map(|(x, o)| x + o).collect()
    }

    /// a(b, 𝒳) = max over points of (−x·b)/‖b‖, and +∞ for b = 0.
    pub fn support_scale(&self, b: &[f64]) -> f64 {
        debug_assert_eq!(b.len(), self.p);
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        self.max_negative_projection(b) / norm
    }

    /// max over points of −x·b (unnormalized).
    pub fn max_negative_projection(&self, b: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for row in self.rows() {
            let dot: f64 = row.iter().zip(b).map(|(x, v)| x * v).sum();
            best = best.max(-dot);
        }
        best
    }

    /// True when the origin projects strictly inside the hull along every
    /// one of `directions` random unit vectors.
    pub fn origin_looks_interior(&self, directions: usize) -> bool {
        origin_interior(&self.points, self.n, self.p, directions)
    }
}

fn diameter(points: &[f64], n: usize, p: usize) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let row = |i: usize| &points[i * p..(i + 1) * p];
    let per_row = par::map_range(Execution::Parallel, n, |i| {
        let a = row(i);
        let mut best = 0.0_f64;
        for j in (i + 1)..n {
            let d2: f64 = a.iter().zip(row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.max(d2);
        }
        best
    });
    per_row.into_iter().fold(0.0, f64::max).sqrt()
}

fn origin_interior(points: &[f64], n: usize, p: usize, directions: usize) -> bool {
    if p == 0 || n == 0 {
        return false;
    }
    let scale = points.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(INTERIOR_CHECK_SEED);
    let mut dir = vec![0.0; p];
    for _ in 0..directions {
        loop {
            for d in dir.iter_mut() {
                *d = StandardNormal.sample(&mut rng);
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                dir.iter_mut().for_each(|d| *d /= norm);
                break;
            }
        }
        let reach = points
            .chunks_exact(p)
            .map(|row| row.iter().zip(&dir).map(|(x, u)| x * u).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        if reach <= 1e-12 * scale {
            return false;
        }
    }
    true
}

/// Details of a centering pass.
#[derive(Debug, Clone)]
pub struct CenteringReport {
    pub domain: PredictorDomain,
    /// Raw-row indices of the selected boundary points, in selection order.
    pub selected: Vec<usize>,
    /// Kernel evaluations performed by the pivoted Cholesky scan.
    pub kernel_evaluations: usize,
    /// The selected-point mean failed the interior check and the sample
    /// mean was used instead.
    pub used_fallback: bool,
}

/// Centers raw predictors at the mean of p+1 well-spread boundary points.
pub fn center_predictors(raw: &[Vec<f64>]) -> Result<PredictorDomain> {
    center_predictors_report(raw).map(|r| r.domain)
}

pub fn center_predictors_report(raw: &[Vec<f64>]) -> Result<CenteringReport> {
    let n = raw.len();
    let p = raw.first().map(|r| r.len()).unwrap_or(0);
    if n < p + 1 || n == 0 {
        return Err(Error::TooFewObservations { needed: p + 1, got: n });
    }
    if let Some(i) = raw.iter().position(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!(
            "row {i} has {} predictors, expected {p}",
            raw[i].len()
        )));
    }
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite predictor value".into()));
    }

    let mut ranges = vec![0.0; p];
    for (j, range) in ranges.iter_mut().enumerate() {
        let (lo, hi) = raw
            .iter()
            .map(|r| r[j])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        *range = hi - lo;
        if *range <= 0.0 {
            return Err(Error::DegenerateDomain { column: j });
        }
    }

    let mean: Vec<f64> = (0..p)
        .map(|j| raw.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let order = mahalanobis_order(raw, &mean)?;

    let inv_range: Vec<f64> = ranges.iter().map(|r| 1.0 / r).collect();
    let kernel = |a: &[f64], b: &[f64]| -> f64 {
        let d2: f64 = a
            .iter()
            .zip(b)
            .zip(&inv_range)
            .map(|((x, y), s)| ((x - y) * s).powi(2))
            .sum();
        (-d2).exp()
    };

    // Rank-(p+1) pivoted incomplete Cholesky over the sorted rows.
    let rank = p + 1;
    let mut residual = vec![1.0_f64; n];
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut pivots: Vec<usize> = Vec::with_capacity(rank);
    let mut kernel_evaluations = 0;
    for j in 0..rank {
        let pivot = if j == 0 {
            0
        } else {
            // first maximum wins, so ties go to the lowest sorted index
            let mut best = 0;
            for i in 1..n {
                if residual[i] > residual[best] {
                    best = i;
                }
            }
            best
        };
        if residual[pivot] <= 1e-14 {
            break;
        }
        let pivot_row = &raw[order[pivot]];
        let scale = residual[pivot].sqrt();
        let mut column = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = kernel(&raw[order[i]], pivot_row);
            for f in &factors {
                v -= f[i] * f[pivot];
            }
            column.push(v / scale);
        }
        kernel_evaluations += n;
        for i in 0..n {
            residual[i] = (residual[i] - column[i] * column[i]).max(0.0);
        }
        residual[pivot] = 0.0;
        factors.push(column);
        pivots.push(pivot);
    }

    let selected: Vec<usize> = pivots.iter().map(|&s| order[s]).collect();
    let mut offset = vec![0.0; p];
    for &s in &selected {
        for (o, v) in offset.iter_mut().zip(&raw[s]) {
            *o += v;
        }
    }
    offset.iter_mut().for_each(|o| *o /= selected.len() as f64);

    let mut domain = PredictorDomain::with_offset(raw, offset)?;
    let mut used_fallback = false;
    if selected.len() < rank || !domain.origin_looks_interior(INTERIOR_CHECK_DIRECTIONS) {
        warn!("selected boundary points do not enclose their mean; centering at the sample mean");
        domain = PredictorDomain::with_offset(raw, mean)?;
        used_fallback = true;
    }
    Ok(CenteringReport {
        domain,
        selected,
        kernel_evaluations,
        used_fallback,
    })
}

/// Row indices sorted by decreasing ‖S⁻¹(x − x̄)‖ (stable in the input order).
fn mahalanobis_order(raw: &[Vec<f64>], mean: &[f64]) -> Result<Vec<usize>> {
    let n = raw.len();
    let p = mean.len();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for row in raw {
        let d = DVector::from_iterator(p, row.iter().zip(mean).map(|(x, m)| x - m));
        cov += &d * d.transpose();
    }
    cov /= (n.max(2) - 1) as f64;
    let chol = cov.cholesky().ok_or_else(|| {
        Error::InvalidInput("predictors do not affinely span their space (singular covariance)".into())
    })?;
    let dist: Vec<f64> = raw
        .iter()
        .map(|row| {
            let d = DVector::from_iterator(p, row.iter().zip(mean).map(|(x, m)| x - m));
            chol.solve(&d).norm()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    Ok(order)
}
