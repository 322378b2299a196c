use crate::data::Dataset;
use crate::draws::{Draw, DrawsMeta, PosteriorDraws};
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::DirichletHyper;
use crate::random::{SeededRng, GENERATOR_ALGORITHM};
use crate::stick::{extend_to_truncation, LogLadder};

use super::config::ChainConfig;
use super::ffbs::update_states_ffbs;
use super::hyper::{refresh_unoccupied, update_hyper};
use super::state::SamplerState;
use super::steps::{
    update_atoms, update_labels, update_probit_latents, update_slice, update_w,
    update_w_generic_link, Acceptance,
};

/// Per-sweep trace and MH acceptance for one chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    pub chain: usize,
    /// `k*` after each sweep.
    pub kstar: Vec<usize>,
    /// Instantiated components after each sweep.
    pub instantiated: Vec<usize>,
    pub phi_acceptance: Acceptance,
    pub w_acceptance: Acceptance,
}

/// One chain: configuration, state and generator.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: ChainConfig,
    dirichlet: DirichletHyper,
    state: SamplerState,
    rng: SeededRng,
    sweeps: usize,
    diagnostics: ChainDiagnostics,
}

fn numeric(sweep: usize, e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::NonFinite {
            sweep,
            quantity: msg,
        },
        other => other,
    }
}

impl Sampler {
    /// Chain `chain` draws from generator stream `chain` of `config.seed`.
    pub fn new(data: &Dataset, config: ChainConfig, chain: usize) -> Result<Self> {
        config.validate()?;
        let dirichlet = config.prior.dirichlet(data.schema())?;
        let mut rng = SeededRng::new(config.seed, chain as u64);
        let hyper = config.initial_hyper.unwrap_or_else(|| config.prior.central_hyper());
        let state = SamplerState::initialize(data, &dirichlet, hyper, config.initial_components, &mut rng)?;
        Ok(Sampler {
            config,
            dirichlet,
            state,
            rng,
            sweeps: 0,
            diagnostics: ChainDiagnostics {
                chain,
                ..Default::default()
            },
        })
    }

    /// Resume from an explicit state.
    pub fn with_state(data: &Dataset, config: ChainConfig, chain: usize, state: SamplerState) -> Result<Self> {
        let mut s = Self::new(data, config, chain)?;
        s.state = state;
        Ok(s)
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SamplerState {
        &mut self.state
    }

    pub fn rng_mut(&mut self) -> &mut SeededRng {
        &mut self.rng
    }

    /// State and generator borrowed together, for external moves between sweeps.
    pub fn state_and_rng(&mut self) -> (&mut SamplerState, &mut SeededRng) {
        (&mut self.state, &mut self.rng)
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn dirichlet(&self) -> &DirichletHyper {
        &self.dirichlet
    }

    pub fn diagnostics(&self) -> &ChainDiagnostics {
        &self.diagnostics
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// One full sweep, steps 1 to 10 in order.
    pub fn sweep(&mut self, data: &Dataset) -> Result<()> {
        self.sweeps += 1;
        let n = self.sweeps;
        let link = self.config.link;
        let st = &mut self.state;
        let rng = &mut self.rng;
        update_atoms(st, data, &self.dirichlet, rng).map_err(|e| numeric(n, e))?;
        if link == LinkFunction::Probit {
            update_probit_latents(st, link, rng)?;
            update_w(st, rng);
        } else {
            update_w_generic_link(st, link, rng, &mut self.diagnostics.w_acceptance);
        }
        update_slice(st, link, rng)?;
        update_labels(st, data, &self.dirichlet, link, self.config.max_components, rng)
            .map_err(|e| numeric(n, e))?;
        update_states_ffbs(st, rng);
        update_hyper(st, &self.config.prior, rng, &mut self.diagnostics.phi_acceptance)
            .map_err(|e| numeric(n, e))?;
        refresh_unoccupied(st, &self.dirichlet, rng).map_err(|e| numeric(n, e))?;
        self.check_finite()?;
        self.diagnostics.kstar.push(self.state.kstar());
        self.diagnostics.instantiated.push(self.state.num_components());
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let sweep = self.sweeps;
        let h = &self.state.hyper;
        for (name, v) in [
            ("mu", h.mu),
            ("phi", h.phi),
            ("sigma2_eps", h.sigma2_eps),
            ("sigma2_eta", h.sigma2_eta),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    sweep,
                    quantity: name.into(),
                });
            }
        }
        let s = &self.state.states;
        for c in 0..s.num_components() {
            if s.alpha_column(c).iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    sweep,
                    quantity: format!("alpha column {c}"),
                });
            }
            if s.w_column(c).iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    sweep,
                    quantity: format!("W column {c}"),
                });
            }
        }
        Ok(())
    }

    /// Snapshot of the current state as a draw. Unoccupied prior columns are
    /// appended first until every ladder's remainder is below the record tolerance.
    pub fn record(&mut self, index: usize) -> Result<Draw> {
        let link = self.config.link;
        let st = &mut self.state;
        let mut ladders: Vec<LogLadder> = (0..st.num_times()).map(|t| st.log_ladder(t, link)).collect();
        let hyper = st.hyper;
        let level = extend_to_truncation(
            &mut st.states,
            &mut ladders,
            &hyper,
            link,
            self.config.record_tolerance.ln(),
            self.config.max_components,
            &mut self.rng,
        )
        .map_err(|e| numeric(self.sweeps, e))?;
        st.fill_atoms(&self.dirichlet, &mut self.rng)?;
        let k = level.max(st.kstar()).max(1);
        let times = st.num_times();
        let ladders = (0..times)
            .map(|t| {
                let mut l = st.states.ladder(t, link);
                l.truncate(k);
                l
            })
            .collect();
        Ok(Draw {
            chain: self.diagnostics.chain,
            index,
            hyper: Some(st.hyper),
            kstar: st.kstar(),
            ladders,
            atoms: st.atoms[..k].to_vec(),
            alpha_last: (0..k).map(|h| st.states.alpha(times - 1, h)).collect(),
        })
    }
}

/// Output of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: PosteriorDraws,
    pub diagnostics: ChainDiagnostics,
}

pub fn draws_meta(data: &Dataset, config: &ChainConfig) -> DrawsMeta {
    DrawsMeta {
        schema: data.schema().clone(),
        times: data.num_times(),
        link: config.link,
        dirichlet_a: config.prior.dirichlet_a,
        generator: GENERATOR_ALGORITHM.to_string(),
    }
}

/// Runs the configured schedule for chain `chain`.
pub fn run_chain(data: &Dataset, config: &ChainConfig, chain: usize) -> Result<ChainOutput> {
    let mut sampler = Sampler::new(data, config.clone(), chain)?;
    let mut draws = Vec::with_capacity(config.retained());
    for sweep in 1..=config.iterations {
        sampler.sweep(data)?;
        if config.keeps(sweep) {
            let index = draws.len();
            draws.push(sampler.record(index)?);
        }
    }
    Ok(ChainOutput {
        draws: PosteriorDraws::new(draws_meta(data, config), draws)?,
        diagnostics: sampler.diagnostics,
    })
}

/// Runs `chains` chains on separate threads with streams `0..chains` and
/// concatenates their draws in chain order.
pub fn run_chains(data: &Dataset, config: &ChainConfig, chains: usize) -> Result<(PosteriorDraws, Vec<ChainDiagnostics>)> {
    if chains == 0 {
        return Err(Error::validation("at least one chain is required"));
    }
    let outputs: Vec<Result<ChainOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| scope.spawn(move || run_chain(data, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("chain thread panicked".into()))))
            .collect()
    });
    let mut all: Option<PosteriorDraws> = None;
    let mut diags = Vec::with_capacity(chains);
    for out in outputs {
        let out = out?;
        diags.push(out.diagnostics);
        all = Some(match all {
            None => out.draws,
            Some(acc) => acc.concat(out.draws)?,
        });
    }
    Ok((all.expect("at least one chain"), diags))
}
