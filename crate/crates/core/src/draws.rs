//! Retained posterior draws and their derived summaries.

use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, ParafacMixture, ProbabilityVector, WeightLadder};
use crate::stick::StateHyper;

/// One retained sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub chain: usize,
    /// Index among the chain's retained draws.
    pub index: usize,
    /// State hyperparameters; absent for static fits.
    pub hyper: Option<StateHyper>,
    pub kstar: usize,
    /// One ladder per time point, all of the same length.
    pub ladders: Vec<WeightLadder<f64>>,
    /// `atoms[h][j]`.
    pub atoms: Vec<Vec<ProbabilityVector<f64>>>,
    /// `alpha_{T,h}` for each recorded component; empty for static fits.
    pub alpha_last: Vec<f64>,
}

impl Draw {
    pub fn num_components(&self) -> usize {
        self.atoms.len()
    }
}

/// Shared description of a set of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsMeta {
    pub schema: CategoricalSchema,
    pub times: usize,
    pub link: LinkFunction,
    pub dirichlet_a: f64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    meta: DrawsMeta,
    draws: Vec<Draw>,
}

/// Posterior summary of one `rho_{t j j'}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSummary {
    pub t: usize,
    pub j: usize,
    pub k: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PosteriorDraws {
    pub fn new(meta: DrawsMeta, draws: Vec<Draw>) -> Result<Self> {
        for d in &draws {
            if d.ladders.len() != meta.times {
                return Err(Error::validation(format!(
                    "draw {} of chain {} has {} ladders for {} times",
                    d.index,
                    d.chain,
                    d.ladders.len(),
                    meta.times
                )));
            }
            if d.ladders.iter().any(|l| l.len() != d.atoms.len()) {
                return Err(Error::validation("ladder length must match the atom count"));
            }
            if !d.alpha_last.is_empty() && d.alpha_last.len() != d.atoms.len() {
                return Err(Error::validation("alpha_last length must match the atom count"));
            }
            for per_var in &d.atoms {
                if per_var.len() != meta.schema.num_vars()
                    || per_var.iter().zip(meta.schema.levels()).any(|(a, &l)| a.len() != l)
                {
                    return Err(Error::validation("atom shapes do not match the schema"));
                }
            }
        }
        Ok(PosteriorDraws { meta, draws })
    }

    pub fn meta(&self) -> &DrawsMeta {
        &self.meta
    }

    pub fn schema(&self) -> &CategoricalSchema {
        &self.meta.schema
    }

    pub fn num_times(&self) -> usize {
        self.meta.times
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Appends another set with the same metadata, keeping chain ids.
    pub fn concat(mut self, other: PosteriorDraws) -> Result<Self> {
        if self.meta != other.meta {
            return Err(Error::validation("cannot concatenate draws with different metadata"));
        }
        self.draws.extend(other.draws);
        Ok(self)
    }

    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &Draw> {
        self.draws.iter().filter(move |d| d.chain == chain)
    }

    pub fn mixture(&self, i: usize) -> Result<ParafacMixture<f64>> {
        let d = &self.draws[i];
        ParafacMixture::new(self.meta.schema.clone(), d.atoms.clone(), d.ladders.clone())
    }

    /// Posterior mean of `pi_t(cell)`.
    pub fn cell_probability_mean(&self, t: usize, cell: &[usize]) -> Result<f64> {
        self.mean_over_draws(|m| Ok(m.cell_probability(t, cell)?.value))
    }

    /// Per-draw `rho_{t j k}`.
    pub fn rho_samples(&self, t: usize, j: usize, k: usize) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|i| self.mixture(i)?.dependence_measure(t, j, k))
            .collect()
    }

    /// Posterior mean and 95% interval of every `rho_{t j k}` with `j < k`.
    pub fn rho_summary(&self) -> Result<Vec<RhoSummary>> {
        if self.is_empty() {
            return Err(Error::validation("no draws to summarise"));
        }
        let p = self.meta.schema.num_vars();
        let mixtures: Vec<ParafacMixture<f64>> =
            (0..self.len()).map(|i| self.mixture(i)).collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for t in 0..self.meta.times {
            for j in 0..p {
                for k in j + 1..p {
                    let mut xs = mixtures
                        .iter()
                        .map(|m| m.dependence_measure(t, j, k))
                        .collect::<Result<Vec<f64>>>()?;
                    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                    xs.sort_by(f64::total_cmp);
                    rows.push(RhoSummary {
                        t,
                        j,
                        k,
                        mean,
                        q025: quantile_sorted(&xs, 0.025),
                        q975: quantile_sorted(&xs, 0.975),
                    });
                }
            }
        }
        Ok(rows)
    }

    fn mean_over_draws(&self, f: impl Fn(&ParafacMixture<f64>) -> Result<f64>) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::validation("no draws to summarise"));
        }
        let mut total = 0.0;
        for i in 0..self.len() {
            total += f(&self.mixture(i)?)?;
        }
        Ok(total / self.len() as f64)
    }
}
