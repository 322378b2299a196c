//! Joint-distribution check of the full sweep.
//!
//! The marginal-conditional simulator draws parameters from the prior and
//! data given parameters. The successive-conditional simulator alternates a
//! sampler sweep with a fresh draw of labels and data given the current
//! parameters. Both target the same joint law, so monitored scalars must
//! agree in mean up to Monte Carlo error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ObservationBlock};
use crate::error::{Error, Result};
use crate::gof::{batch_means, mean_se};
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, DirichletHyper};
use crate::random::{sample_categorical, uniform_open, SeededRng};
use crate::stick::StateTrajectory;

use super::chain::Sampler;
use super::config::{ChainConfig, PriorConfig};
use super::state::{sample_prior_atoms, SamplerState};

/// Names of the monitored scalars, in the order they are reported. States
/// enter through the link because `mu / (1 - phi)` has no prior mean.
pub const MONITORED: [&str; 10] = [
    "mu",
    "phi",
    "sigma2_eps",
    "sigma2_eta",
    "g_alpha_first",
    "g_w_last",
    "nu_first",
    "psi_first",
    "level_frequency",
    "kstar",
];

/// Columns instantiated while drawing one label before giving up.
const MAX_LABEL_COMPONENTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GewekeConfig {
    pub levels: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    /// `(t, j)` pairs whose variable is not measured in that wave.
    pub absent: Vec<(usize, usize)>,
    pub cycles: usize,
    /// Batches for the successive-conditional standard errors.
    pub batches: usize,
    pub link: LinkFunction,
    /// Proper priors with finite variances are required for the comparison.
    pub prior: PriorConfig,
    pub seed: u64,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            levels: vec![2, 2],
            sample_sizes: vec![4, 3, 5],
            absent: vec![(1, 1)],
            cycles: 10_000,
            batches: 50,
            link: LinkFunction::Probit,
            // A tight positive mu keeps mu / (1 - phi) away from large negative
            // values, where stick weights vanish and labels need unbounded columns.
            prior: PriorConfig {
                mu0: 0.5,
                sigma2_mu0: 0.01,
                m_eps: 6.0,
                s_eps: 4.0,
                m_eta: 6.0,
                s_eta: 4.0,
                ..PriorConfig::default()
            },
            seed: 11,
        }
    }
}

/// Comparison of one monitored scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct GewekeStat {
    pub name: &'static str,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
    pub z: f64,
}

/// Draws labels and responses given parameters, extending the state with
/// prior columns whenever a label lands past the instantiated ones.
fn regenerate<R: Rng + ?Sized>(
    state: &mut SamplerState,
    schema: &CategoricalSchema,
    dirichlet: &DirichletHyper,
    config: &GewekeConfig,
    link: LinkFunction,
    rng: &mut R,
) -> Result<Dataset> {
    let p = schema.num_vars();
    let mut blocks = Vec::with_capacity(config.sample_sizes.len());
    for (t, &n) in config.sample_sizes.iter().enumerate() {
        let mut block = ObservationBlock::empty(p);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u = uniform_open(rng);
            let (mut cum, mut rest, mut h) = (0.0, 1.0, 0);
            let label = loop {
                if h == MAX_LABEL_COMPONENTS {
                    return Err(Error::Invariant("label draw ran past the component cap".into()));
                }
                if h == state.num_components() {
                    let hyper = state.hyper;
                    state.states.push_prior_column(&hyper, rng);
                    state.atoms.push(sample_prior_atoms(dirichlet, rng)?);
                }
                let w = state.states.w(t, h);
                cum += rest * link.eval(w);
                rest *= link.survival(w);
                if u < cum {
                    break h;
                }
                h += 1;
            };
            let row: Vec<Option<u16>> = (0..p)
                .map(|j| {
                    if config.absent.contains(&(t, j)) {
                        Ok(None)
                    } else {
                        sample_categorical(rng, state.atoms[label][j].as_slice()).map(|l| Some(l as u16))
                    }
                })
                .collect::<Result<_>>()?;
            block.push_subject(&row)?;
            labels.push(label);
        }
        state.ln_slice[t] = vec![f64::NEG_INFINITY; n];
        state.latents[t] = vec![Vec::new(); n];
        state.labels[t] = labels;
        blocks.push(block);
    }
    Dataset::from_blocks(schema.clone(), blocks)
}

fn prior_state<R: Rng + ?Sized>(
    config: &GewekeConfig,
    dirichlet: &DirichletHyper,
    rng: &mut R,
) -> Result<SamplerState> {
    let times = config.sample_sizes.len();
    let hyper = config.prior.sample_hyper(rng)?;
    let mut states = StateTrajectory::empty(times);
    states.push_prior_column(&hyper, rng);
    Ok(SamplerState {
        labels: vec![Vec::new(); times],
        ln_slice: vec![Vec::new(); times],
        latents: vec![Vec::new(); times],
        states,
        atoms: vec![sample_prior_atoms(dirichlet, rng)?],
        hyper,
    })
}

fn monitor(state: &SamplerState, data: &Dataset, link: LinkFunction) -> [f64; 10] {
    let h = state.hyper;
    let last = state.num_times() - 1;
    let (mut hits, mut seen) = (0usize, 0usize);
    for b in data.blocks() {
        for s in b.subjects() {
            if let Some(l) = s[0] {
                seen += 1;
                hits += (l == 0) as usize;
            }
        }
    }
    [
        h.mu,
        h.phi,
        h.sigma2_eps,
        h.sigma2_eta,
        link.eval(state.states.alpha(0, 0)),
        link.eval(state.states.w(last, 0)),
        link.eval(state.states.w(0, 0)),
        state.atoms[0][0].get(0),
        if seen == 0 { 0.0 } else { hits as f64 / seen as f64 },
        state.kstar() as f64,
    ]
}

/// Runs both simulators for `config.cycles` draws each.
pub fn run_geweke(config: &GewekeConfig) -> Result<Vec<GewekeStat>> {
    if config.sample_sizes.is_empty() || config.cycles < 2 * config.batches || config.batches < 2 {
        return Err(Error::validation("geweke run needs waves, cycles >= 2 * batches and batches >= 2"));
    }
    config.prior.validate()?;
    let schema = CategoricalSchema::new(config.levels.clone())?;
    let dirichlet = config.prior.dirichlet(&schema)?;
    let link = config.link;

    let mut rng = SeededRng::new(config.seed, 0);
    let mut marginal: Vec<[f64; 10]> = Vec::with_capacity(config.cycles);
    for _ in 0..config.cycles {
        let mut state = prior_state(config, &dirichlet, &mut rng)?;
        let data = regenerate(&mut state, &schema, &dirichlet, config, link, &mut rng)?;
        marginal.push(monitor(&state, &data, link));
    }

    let mut rng = SeededRng::new(config.seed, 1);
    let mut state = prior_state(config, &dirichlet, &mut rng)?;
    let mut data = regenerate(&mut state, &schema, &dirichlet, config, link, &mut rng)?;
    let chain = ChainConfig {
        iterations: 1,
        burn_in: 0,
        thin: 1,
        seed: config.seed,
        link,
        prior: config.prior,
        initial_components: 1,
        ..ChainConfig::default()
    };
    let mut sampler = Sampler::with_state(&data, chain, 2, state)?;
    let mut successive: Vec<[f64; 10]> = Vec::with_capacity(config.cycles);
    for _ in 0..config.cycles {
        sampler.sweep(&data)?;
        let (st, rng) = sampler.state_and_rng();
        data = regenerate(st, &schema, &dirichlet, config, link, rng)?;
        successive.push(monitor(sampler.state(), &data, link));
    }

    Ok(MONITORED
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let a: Vec<f64> = marginal.iter().map(|m| m[k]).collect();
            let b: Vec<f64> = successive.iter().map(|m| m[k]).collect();
            let (ma, sa) = mean_se(&a);
            let (mb, sb) = batch_means(&b, config.batches);
            GewekeStat {
                name,
                marginal_mean: ma,
                marginal_se: sa,
                successive_mean: mb,
                successive_se: sb,
                z: (ma - mb) / (sa * sa + sb * sb).sqrt(),
            }
        })
        .collect())
}
