use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, DirichletHyper};
use crate::random::{sample_inverse_gamma, sample_normal, uniform_open};
use crate::stick::StateHyper;
use rand::Rng;

/// Prior hyperparameters: symmetric Dirichlet `a`, `mu ~ N(mu0, sigma2_mu0)`,
/// `phi ~ U(-1, 1)`, `sigma2_eps ~ IG(m_eps/2, s_eps/2)`, `sigma2_eta ~ IG(m_eta/2, s_eta/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub dirichlet_a: f64,
    pub mu0: f64,
    pub sigma2_mu0: f64,
    pub m_eps: f64,
    pub s_eps: f64,
    pub m_eta: f64,
    pub s_eta: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            dirichlet_a: 1.0,
            mu0: 0.0,
            sigma2_mu0: 1.0,
            m_eps: 5.0,
            s_eps: 0.05,
            m_eta: 5.0,
            s_eta: 0.05,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dirichlet_a", self.dirichlet_a),
            ("sigma2_mu0", self.sigma2_mu0),
            ("m_eps", self.m_eps),
            ("s_eps", self.s_eps),
            ("m_eta", self.m_eta),
            ("s_eta", self.s_eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("prior {name} must be positive, got {v}")));
            }
        }
        if !self.mu0.is_finite() {
            return Err(Error::validation("prior mu0 must be finite"));
        }
        Ok(())
    }

    pub fn dirichlet(&self, schema: &CategoricalSchema) -> Result<DirichletHyper> {
        DirichletHyper::symmetric(schema, self.dirichlet_a)
    }

    /// Prior mean where it exists, else a central value; the chain's starting point.
    pub fn central_hyper(&self) -> StateHyper {
        let centre = |m: f64, s: f64| if m > 2.0 { s / (m - 2.0) } else { s / m };
        StateHyper {
            mu: self.mu0,
            phi: 0.0,
            sigma2_eps: centre(self.m_eps, self.s_eps),
            sigma2_eta: centre(self.m_eta, self.s_eta),
        }
    }

    pub fn sample_mu<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_normal(rng, self.mu0, self.sigma2_mu0.sqrt())
    }

    pub fn sample_phi<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        2.0 * uniform_open(rng) - 1.0
    }

    pub fn sample_sigma2_eps<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample_inverse_gamma(rng, self.m_eps / 2.0, self.s_eps / 2.0)
    }

    pub fn sample_sigma2_eta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample_inverse_gamma(rng, self.m_eta / 2.0, self.s_eta / 2.0)
    }

    /// One draw of all four state hyperparameters from the prior.
    pub fn sample_hyper<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StateHyper> {
        let mu = self.sample_mu(rng);
        let phi = self.sample_phi(rng);
        let sigma2_eps = self.sample_sigma2_eps(rng)?;
        let sigma2_eta = self.sample_sigma2_eta(rng)?;
        StateHyper::new(mu, phi, sigma2_eps, sigma2_eta)
    }
}

/// Schedule and settings for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub link: LinkFunction,
    pub prior: PriorConfig,
    /// Labels start uniform over this many components.
    pub initial_components: usize,
    /// Hard cap on instantiated components.
    pub max_components: usize,
    /// Recorded ladders are extended until every remainder is below this.
    pub record_tolerance: f64,
    /// Starting hyperparameters; the prior centre when absent.
    pub initial_hyper: Option<StateHyper>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 6000,
            burn_in: 2000,
            thin: 5,
            seed: 1,
            link: LinkFunction::Probit,
            prior: PriorConfig::default(),
            initial_components: 10,
            max_components: 2000,
            record_tolerance: 1e-6,
            initial_hyper: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::validation(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::validation("thinning must be at least 1"));
        }
        if self.initial_components == 0 || self.initial_components > self.max_components {
            return Err(Error::validation(
                "initial_components must be in 1..=max_components",
            ));
        }
        if !(self.record_tolerance > 0.0 && self.record_tolerance < 1.0) {
            return Err(Error::validation("record_tolerance must lie in (0, 1)"));
        }
        if let Some(h) = &self.initial_hyper {
            h.validate().map_err(|e| Error::validation(e.to_string()))?;
        }
        self.prior.validate()
    }

    /// Number of retained draws: `(iterations - burn_in) / thin`.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// Whether 1-based sweep `sweep` is kept.
    pub fn keeps(&self, sweep: usize) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in) % self.thin == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retained_count_matches_schedule() {
        let c = ChainConfig {
            iterations: 103,
            burn_in: 20,
            thin: 4,
            ..Default::default()
        };
        assert_eq!(c.retained(), 20);
        assert_eq!((1..=103).filter(|&s| c.keeps(s)).count(), 20);
    }

    #[test]
    fn rejects_bad_schedule() {
        let mut c = ChainConfig::default();
        c.burn_in = c.iterations;
        assert!(c.validate().is_err());
        let c = ChainConfig { thin: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let mut c = ChainConfig::default();
        c.prior.s_eta = 0.0;
        assert!(c.validate().is_err());
        assert!(ChainConfig::default().validate().is_ok());
    }

    #[test]
    fn default_variance_prior_is_ig_2_5_0_025() {
        let p = PriorConfig::default();
        assert_eq!(p.m_eps / 2.0, 2.5);
        assert_eq!(p.s_eps / 2.0, 0.025);
    }
}
