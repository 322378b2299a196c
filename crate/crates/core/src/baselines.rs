//! Per-time static baselines: the Dirichlet-process mixture of product
//! multinomials with `beta(1, alpha)` sticks, and the independence product.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ObservationBlock};
use crate::draws::{Draw, DrawsMeta, PosteriorDraws};
use crate::error::{Error, Result};
use crate::experiments::evaluate::CountTable;
use crate::experiments::simulate::RhoValue;
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, DirichletHyper, ParafacMixture, ProbabilityVector, WeightLadder};
use crate::random::{sample_beta, sample_categorical, sample_categorical_ln, uniform_open, SeededRng, GENERATOR_ALGORITHM};
use crate::sampler::steps::{component_counts, draw_atoms};
use crate::sampler::ChainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticDxConfig {
    /// Schedule, seed, Dirichlet `a` and component limits; the state prior is unused.
    pub chain: ChainConfig,
    /// DP concentration.
    pub alpha: f64,
}

impl Default for StaticDxConfig {
    fn default() -> Self {
        StaticDxConfig {
            chain: ChainConfig::default(),
            alpha: 1.0,
        }
    }
}

impl StaticDxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation(format!("DP concentration must be positive, got {}", self.alpha)));
        }
        self.chain.validate()
    }
}

/// `ln nu_h` from stick fractions.
fn ln_weights(sticks: &[f64]) -> (Vec<f64>, f64) {
    let mut rest = 0.0;
    let mut out = Vec::with_capacity(sticks.len());
    for &v in sticks {
        out.push(rest + v.ln());
        rest += (-v).ln_1p();
    }
    (out, rest)
}

struct DxState {
    labels: Vec<usize>,
    ln_slice: Vec<f64>,
    sticks: Vec<f64>,
    atoms: Vec<Vec<ProbabilityVector<f64>>>,
}

impl DxState {
    fn push_prior_component(&mut self, alpha: f64, dirichlet: &DirichletHyper, rng: &mut SeededRng) -> Result<()> {
        self.sticks.push(sample_beta(rng, 1.0, alpha)?);
        let counts = vec![dirichlet.all().iter().map(|a| vec![0; a.len()]).collect()];
        self.atoms.extend(draw_atoms(&counts, dirichlet, rng)?);
        Ok(())
    }

    /// Extends until the remainder is below `exp(ln_tol)`; returns the level reached.
    fn extend(&mut self, ln_tol: f64, alpha: f64, dirichlet: &DirichletHyper, max: usize, rng: &mut SeededRng) -> Result<usize> {
        let mut rest = 0.0;
        for (h, &v) in self.sticks.iter().enumerate() {
            rest += (-v).ln_1p();
            if rest < ln_tol {
                return Ok(h + 1);
            }
        }
        while rest >= ln_tol {
            if self.sticks.len() >= max {
                return Err(Error::Invariant(format!("truncation level exceeds {max} components")));
            }
            self.push_prior_component(alpha, dirichlet, rng)?;
            rest += (-self.sticks[self.sticks.len() - 1]).ln_1p();
        }
        Ok(self.sticks.len())
    }
}

/// Slice-sampled DP mixture for one time point. Sweep order: atoms, sticks
/// `V_h ~ beta(1 + n_h, alpha + sum_{l>h} n_l)`, slice variables, labels.
pub fn fit_static_dx(block: &ObservationBlock, schema: &CategoricalSchema, config: &StaticDxConfig, stream: u64) -> Result<PosteriorDraws> {
    config.validate()?;
    let chain = &config.chain;
    let dirichlet = chain.prior.dirichlet(schema)?;
    let mut rng = SeededRng::new(chain.seed, stream);
    let n = block.num_subjects();
    let k0 = chain.initial_components;
    let mut st = DxState {
        labels: (0..n).map(|_| ((uniform_open(&mut rng) * k0 as f64) as usize).min(k0 - 1)).collect(),
        ln_slice: vec![f64::NEG_INFINITY; n],
        sticks: Vec::new(),
        atoms: Vec::new(),
    };
    for _ in 0..k0 {
        st.push_prior_component(config.alpha, &dirichlet, &mut rng)?;
    }
    let blocks = std::slice::from_ref(block);
    let mut draws = Vec::with_capacity(chain.retained());
    for sweep in 1..=chain.iterations {
        let kt = st.sticks.len();
        let counts = component_counts(blocks, std::slice::from_ref(&st.labels), schema.levels(), kt);
        st.atoms = draw_atoms(&counts, &dirichlet, &mut rng)?;
        let mut occupancy = vec![0usize; kt];
        for &s in &st.labels {
            occupancy[s] += 1;
        }
        let mut above: usize = n;
        for h in 0..kt {
            above -= occupancy[h];
            st.sticks[h] = sample_beta(&mut rng, 1.0 + occupancy[h] as f64, config.alpha + above as f64)?;
        }
        if n > 0 {
            let (lw, _) = ln_weights(&st.sticks);
            for i in 0..n {
                st.ln_slice[i] = lw[st.labels[i]] + uniform_open(&mut rng).ln();
            }
            let ln_u_min = st.ln_slice.iter().cloned().fold(f64::INFINITY, f64::min);
            let level = st.extend(ln_u_min, config.alpha, &dirichlet, chain.max_components, &mut rng)?;
            let (lw, _) = ln_weights(&st.sticks);
            let ln_atoms: Vec<Vec<Vec<f64>>> = st.atoms[..level]
                .iter()
                .map(|pv| pv.iter().map(|a| a.as_slice().iter().map(|x| x.ln()).collect()).collect())
                .collect();
            let mut w = vec![f64::NEG_INFINITY; level];
            for (i, subject) in block.subjects().enumerate() {
                for h in 0..level {
                    w[h] = if lw[h] > st.ln_slice[i] {
                        subject
                            .iter()
                            .enumerate()
                            .filter_map(|(j, x)| x.map(|l| ln_atoms[h][j][l as usize]))
                            .sum()
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                st.labels[i] = sample_categorical_ln(&mut rng, &w)
                    .map_err(|e| Error::Invariant(format!("label draw for subject {i}: {e}")))?;
            }
        }
        if chain.keeps(sweep) {
            let level = st.extend(chain.record_tolerance.ln(), config.alpha, &dirichlet, chain.max_components, &mut rng)?;
            let kstar = st.labels.iter().max().map_or(0, |&s| s + 1);
            let k = level.max(kstar);
            let (lw, _) = ln_weights(&st.sticks[..k]);
            let weights: Vec<f64> = lw.iter().map(|x| x.exp()).collect();
            let rest = st.sticks[..k].iter().map(|v| 1.0 - v).product::<f64>();
            draws.push(Draw {
                chain: stream as usize,
                index: draws.len(),
                hyper: None,
                kstar,
                ladders: vec![WeightLadder::new(weights, rest)?],
                atoms: st.atoms[..k].to_vec(),
                alpha_last: Vec::new(),
            });
        }
    }
    PosteriorDraws::new(
        DrawsMeta {
            schema: schema.clone(),
            times: 1,
            link: LinkFunction::Probit,
            dirichlet_a: chain.prior.dirichlet_a,
            generator: GENERATOR_ALGORITHM.to_string(),
        },
        draws,
    )
}

/// Static fits at every time point; fit `t` uses generator stream `t`.
pub fn fit_static_dx_per_time(data: &Dataset, config: &StaticDxConfig) -> Result<Vec<PosteriorDraws>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..data.num_times())
            .map(|t| scope.spawn(move || fit_static_dx(data.block(t), data.schema(), config, t as u64)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("baseline thread panicked".into()))))
            .collect()
    })
}

/// Posterior-mean `rho` from per-time static fits, labelled with the fit's time index.
pub fn dx_rho_estimates(fits: &[PosteriorDraws]) -> Result<Vec<RhoValue>> {
    let mut out = Vec::new();
    for (t, fit) in fits.iter().enumerate() {
        for r in fit.rho_summary()? {
            out.push(RhoValue {
                t,
                j: r.j,
                k: r.k,
                value: r.mean,
            });
        }
    }
    Ok(out)
}

/// Per-variable marginals with add-one smoothing.
pub fn independence_baseline(block: &ObservationBlock, schema: &CategoricalSchema) -> Result<Vec<ProbabilityVector<f64>>> {
    if block.num_vars() != schema.num_vars() {
        return Err(Error::validation("block does not match the schema"));
    }
    (0..schema.num_vars())
        .map(|j| {
            let counts = block.level_counts(j, schema.level_count(j));
            ProbabilityVector::normalized(counts.iter().map(|&c| c as f64 + 1.0).collect())
        })
        .collect()
}

/// The independence product as a one-component mixture over `times` time points.
pub fn independence_mixture(marginals: Vec<ProbabilityVector<f64>>, schema: &CategoricalSchema, times: usize) -> Result<ParafacMixture<f64>> {
    ParafacMixture::new(
        schema.clone(),
        vec![marginals],
        (0..times).map(|_| WeightLadder::new(vec![1.0], 0.0)).collect::<Result<_>>()?,
    )
}

/// Replicated tables of `n` subjects from the independence product.
pub fn independence_replicates(
    marginals: &[ProbabilityVector<f64>],
    n: usize,
    margin: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<CountTable>> {
    let mut rng = SeededRng::new(seed, 0);
    let mut subject = vec![None; marginals.len()];
    (0..replicates)
        .map(|_| {
            let mut table = CountTable::new(margin.to_vec());
            for _ in 0..n {
                for &j in margin {
                    subject[j] = Some(sample_categorical(&mut rng, marginals[j].as_slice())? as u16);
                }
                table.add(&subject);
            }
            Ok(table)
        })
        .collect()
}
