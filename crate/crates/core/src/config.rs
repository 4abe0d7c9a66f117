//! Run configuration: a flat TOML document whose keys mirror the model and
//! sampler tunables. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base_dist::BaseFamily;
use crate::error::{Error, Result};
use crate::gp_prior::GpHyper;
use crate::par::Execution;
use crate::sampler::{FitSettings, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: f64,
    pub knots_m: usize,
    pub h: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub a_kappa: f64,
    pub b_kappa: f64,
    pub nugget: f64,
    pub rho_start: f64,
    pub rho_end: f64,
    pub base_family: BaseFamily,
    pub iters: usize,
    pub burnin: f64,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub level: f64,
    pub target_accept: f64,
    pub cov_warmup: usize,
    pub freeze_after_burnin: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gp = GpHyper::default();
        let s = SamplerConfig::default();
        RunConfig {
            mesh: 0.01,
            knots_m: gp.knots_m,
            h: gp.h,
            a_lambda: gp.a_lambda,
            b_lambda: gp.b_lambda,
            a_kappa: gp.a_kappa,
            b_kappa: gp.b_kappa,
            nugget: gp.nugget,
            rho_start: gp.rho_start,
            rho_end: gp.rho_end,
            base_family: BaseFamily::StudentT,
            iters: s.iters,
            burnin: s.burnin,
            thin: s.thin,
            seed: s.seed,
            chains: s.chains,
            level: 0.95,
            target_accept: s.target_accept,
            cov_warmup: s.cov_warmup,
            freeze_after_burnin: s.freeze_after_burnin,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn hyper(&self) -> GpHyper {
        GpHyper {
            knots_m: self.knots_m,
            h: self.h,
            a_lambda: self.a_lambda,
            b_lambda: self.b_lambda,
            a_kappa: self.a_kappa,
            b_kappa: self.b_kappa,
            nugget: self.nugget,
            rho_start: self.rho_start,
            rho_end: self.rho_end,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            chains: self.chains,
            target_accept: self.target_accept,
            cov_warmup: self.cov_warmup,
            freeze_after_burnin: self.freeze_after_burnin,
        }
    }

    pub fn fit_settings(&self, exec: Execution) -> FitSettings {
        FitSettings {
            family: self.base_family,
            mesh: self.mesh,
            hyper: self.hyper(),
            sampler: self.sampler(),
            exec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.hyper().validate().map_err(wrap)?;
        self.sampler().validate().map_err(wrap)?;
        if !(self.mesh > 0.0 && self.mesh < 0.5) {
            return Err(Error::Config(format!("mesh must lie in (0, 0.5), got {}", self.mesh)));
        }
        if !(0.0..1.0).contains(&self.level) {
            return Err(Error::Config(format!("level must lie in [0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.a_lambda, c.b_lambda, c.a_kappa, c.b_kappa), (6.0, 4.0, 1.5, 1.5));
        assert_eq!((c.knots_m, c.h, c.mesh, c.iters, c.burnin), (6, 0.1, 0.01, 10_000, 0.1));
        assert_eq!(c.sampler().retained(), 200);
        assert_eq!(c.base_family, BaseFamily::StudentT);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig { h: 0.1 + 0.2, seed: u64::MAX / 3, base_family: BaseFamily::Gaussian, ..Default::default() };
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = RunConfig::from_toml("mesh = 0.01\nknots = 6\n").unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("knots")), "{e}");
        let ok = RunConfig::from_toml("knots_m = 11\nbase_family = \"gaussian\"\n").unwrap();
        assert_eq!(ok.knots_m, 11);
        assert!(RunConfig::from_toml("mesh = 0.7").is_err());
    }
}
