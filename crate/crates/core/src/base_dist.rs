//! Reference densities f₀ used to anchor the intercept curve.
//!
//! A [`BaseQuartet`] bundles the distribution function, density, quantile
//! function and quantile density of either a Student-t with `nu` degrees of
//! freedom or the standard Gaussian.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::{erfc, lgamma as ln_gamma};
use statrs::function::{beta::beta_reg, erf::erfc_inv};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseFamily {
    #[serde(rename = "t")]
    StudentT,
    #[serde(rename = "gaussian")]
    Gaussian,
}

impl BaseFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t" | "student" | "student-t" => Ok(BaseFamily::StudentT),
            "gaussian" | "normal" => Ok(BaseFamily::Gaussian),
            other => Err(Error::InvalidParameter(format!(
                "unknown base family '{other}' (expected 't' or 'gaussian')"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BaseFamily::StudentT => "t",
            BaseFamily::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseQuartet {
    family: BaseFamily,
    nu: f64,
    tau0: f64,
    /// log of the Student-t normalizing constant; unused for the Gaussian.
    log_norm: f64,
}

impl BaseQuartet {
    pub fn new(family: BaseFamily, nu: f64) -> Result<Self> {
        match family {
            BaseFamily::StudentT => Self::student_t(nu),
            BaseFamily::Gaussian => Ok(Self::gaussian()),
        }
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must be positive and finite, got {nu}"
            )));
        }
        let log_norm =
            ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu.ln() + PI.ln());
        Ok(BaseQuartet {
            family: BaseFamily::StudentT,
            nu,
            tau0: 0.5,
            log_norm,
        })
    }

    pub fn gaussian() -> Self {
        BaseQuartet {
            family: BaseFamily::Gaussian,
            nu: f64::INFINITY,
            tau0: 0.5,
            log_norm: -LN_SQRT_2PI,
        }
    }

    pub fn family(&self) -> BaseFamily {
        self.family
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// τ₀ = F₀(0).
    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn log_density(&self, y: f64) -> f64 {
        match self.family {
            BaseFamily::Gaussian => self.log_norm - 0.5 * y * y,
            BaseFamily::StudentT => {
                self.log_norm - 0.5 * (self.nu + 1.0) * (y * y / self.nu).ln_1p()
            }
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y.is_nan() {
            return f64::NAN;
        }
        match self.family {
            BaseFamily::Gaussian => 0.5 * erfc(-y / SQRT_2),
            BaseFamily::StudentT => {
                if y >= 0.0 {
                    1.0 - t_upper_tail(y, self.nu)
                } else {
                    t_upper_tail(-y, self.nu)
                }
            }
        }
    }

    /// Q₀(t) = F₀⁻¹(t). Returns ±∞ at the endpoints and NaN outside [0, 1].
    pub fn quantile(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return f64::NAN;
        }
        if t == 0.0 {
            return f64::NEG_INFINITY;
        }
        if t == 1.0 {
            return f64::INFINITY;
        }
        match self.family {
            BaseFamily::Gaussian => {
                // one Newton polish step against the accurate erfc
                let y = -SQRT_2 * erfc_inv(2.0 * t);
                if y.is_finite() {
                    y - (normal_cdf(y) - t) / normal_pdf(y)
                } else {
                    y
                }
            }
            BaseFamily::StudentT => {
                if t == 0.5 {
                    0.0
                } else if t > 0.5 {
                    t_upper_quantile(1.0 - t, self.nu)
                } else {
                    -t_upper_quantile(t, self.nu)
                }
            }
        }
    }

    /// q₀(t) = 1 / f₀(Q₀(t)).
    pub fn quantile_density(&self, t: f64) -> f64 {
        (-self.log_density(self.quantile(t))).exp()
    }
}

/// P(T > y) for y ≥ 0, choosing the incomplete-beta argument that avoids
/// cancellation in the body and in the tail.
fn t_upper_tail(y: f64, nu: f64) -> f64 {
    if y == f64::INFINITY {
        return 0.0;
    }
    let y2 = y * y;
    if y2 < nu {
        let z = y2 / (nu + y2);
        0.5 - 0.5 * beta_reg(0.5, 0.5 * nu, z)
    } else {
        let x = nu / (nu + y2);
        0.5 * beta_reg(0.5 * nu, 0.5, x)
    }
}

/// Solves P(T > y) = p for y > 0, with 0 < p < 1/2.
///
/// Safeguarded Newton iteration on log P(T > y), which is close to linear in
/// log y in the tails, with a bisection fallback inside a maintained bracket.
fn t_upper_quantile(p: f64, nu: f64) -> f64 {
    let log_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu.ln() + PI.ln());
    let log_pdf = |y: f64| log_norm - 0.5 * (nu + 1.0) * (y * y / nu).ln_1p();
    let log_p = p.ln();

    // Gaussian start with a first-order Cornish-Fisher correction.
    let z = -SQRT_2 * erfc_inv(2.0 * p);
    let mut y = (z + (z * z * z + z) / (4.0 * nu)).max(1e-8);

    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..200 {
        let tail = t_upper_tail(y, nu);
        if tail > p {
            lo = lo.max(y);
        } else {
            hi = hi.min(y);
        }
        let g = tail.ln() - log_p;
        if g == 0.0 {
            return y;
        }
        // d/dy log P(T > y) = -f(y) / P(T > y)
        let slope = -(log_pdf(y) - tail.ln()).exp();
        let mut next = y - g / slope;
        if !(next.is_finite() && next > lo && next < hi) {
            next = if hi.is_finite() {
                if lo > 0.0 {
                    (lo * hi).sqrt()
                } else {
                    0.5 * hi
                }
            } else {
                2.0 * y.max(1.0)
            };
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y {
            return next;
        }
        if hi.is_finite() && (hi - lo) <= 4.0 * f64::EPSILON * hi {
            return 0.5 * (lo + hi);
        }
        y = next;
    }
    y
}

/// Standard normal CDF, exposed for oracles and generators.
pub fn normal_cdf(y: f64) -> f64 {
    0.5 * erfc(-y / SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(t: f64) -> f64 {
    BaseQuartet::gaussian().quantile(t)
}

/// Standard normal density.
pub fn normal_pdf(y: f64) -> f64 {
    (-0.5 * y * y - LN_SQRT_2PI).exp()
}
