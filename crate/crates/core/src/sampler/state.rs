use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{DirichletHyper, ParafacMixture, ProbabilityVector};
use crate::random::{sample_dirichlet, uniform_open};
use crate::stick::{LogLadder, StateHyper, StateTrajectory};

/// All latent quantities of one chain.
///
/// Components are zero-based; `labels[t][i] = h` means subject `i` at time
/// `t` belongs to component `h`. `latents[t][i]` holds `z_{tih}` for
/// `h <= labels[t][i]` (probit link only). `ln_slice[t][i]` is `ln u_ti`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub labels: Vec<Vec<usize>>,
    pub ln_slice: Vec<Vec<f64>>,
    pub latents: Vec<Vec<Vec<f64>>>,
    pub states: StateTrajectory,
    pub atoms: Vec<Vec<ProbabilityVector<f64>>>,
    pub hyper: StateHyper,
}

impl SamplerState {
    /// Labels uniform over `k0` components, atoms from the prior, `alpha` at
    /// the stationary mean and `W = alpha`.
    pub fn initialize<R: Rng + ?Sized>(
        data: &Dataset,
        dirichlet: &DirichletHyper,
        hyper: StateHyper,
        k0: usize,
        rng: &mut R,
    ) -> Result<Self> {
        hyper.validate()?;
        let times = data.num_times();
        let labels: Vec<Vec<usize>> = data
            .blocks()
            .iter()
            .map(|b| {
                (0..b.num_subjects())
                    .map(|_| ((uniform_open(rng) * k0 as f64) as usize).min(k0 - 1))
                    .collect()
            })
            .collect();
        let mut states = StateTrajectory::empty(times);
        let m = hyper.stationary_mean();
        let mut atoms = Vec::with_capacity(k0);
        for _ in 0..k0 {
            states.push_column(vec![m; times], vec![m; times]);
            atoms.push(sample_prior_atoms(dirichlet, rng)?);
        }
        let ln_slice = labels.iter().map(|l| vec![f64::NEG_INFINITY; l.len()]).collect();
        let latents = labels.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        Ok(SamplerState {
            labels,
            ln_slice,
            latents,
            states,
            atoms,
            hyper,
        })
    }

    pub fn num_times(&self) -> usize {
        self.states.num_times()
    }

    /// Instantiated components `k~`.
    pub fn num_components(&self) -> usize {
        self.states.num_components()
    }

    /// Occupied components `k* = max label + 1` (zero without subjects).
    pub fn kstar(&self) -> usize {
        self.labels
            .iter()
            .flatten()
            .max()
            .map_or(0, |&h| h + 1)
    }

    pub fn log_ladder(&self, t: usize, link: LinkFunction) -> LogLadder {
        LogLadder::from_states(&self.states.w_row(t), link)
    }

    /// Mixture over the instantiated components.
    pub fn mixture(&self, link: LinkFunction, schema: crate::model::CategoricalSchema) -> Result<ParafacMixture<f64>> {
        let ladders = (0..self.num_times()).map(|t| self.states.ladder(t, link)).collect();
        ParafacMixture::new(schema, self.atoms.clone(), ladders)
    }

    /// Appends prior atoms until there is one set per instantiated component.
    pub fn fill_atoms<R: Rng + ?Sized>(&mut self, dirichlet: &DirichletHyper, rng: &mut R) -> Result<()> {
        while self.atoms.len() < self.num_components() {
            self.atoms.push(sample_prior_atoms(dirichlet, rng)?);
        }
        Ok(())
    }

    /// Checks the structural invariants after a full sweep.
    pub fn check_invariants(&self, link: LinkFunction) -> Result<()> {
        let kt = self.num_components();
        if self.atoms.len() != kt {
            return Err(Error::Invariant(format!(
                "{} atom sets for {kt} components",
                self.atoms.len()
            )));
        }
        if self.kstar() > kt {
            return Err(Error::Invariant(format!(
                "k* = {} exceeds instantiated k = {kt}",
                self.kstar()
            )));
        }
        for (t, labels) in self.labels.iter().enumerate() {
            let ladder = self.log_ladder(t, link);
            for (i, &s) in labels.iter().enumerate() {
                let ln_u = self.ln_slice[t][i];
                if ln_u.is_finite() && !(ln_u < ladder.ln_weights[s]) {
                    return Err(Error::Invariant(format!(
                        "slice variable at ({t}, {i}) is not below its weight"
                    )));
                }
                let z = &self.latents[t][i];
                if !z.is_empty() {
                    if z.len() != s + 1 {
                        return Err(Error::Invariant(format!("latent count at ({t}, {i})")));
                    }
                    let ok = z.iter().enumerate().all(|(h, &v)| if h == s { v > 0.0 } else { v <= 0.0 });
                    if !ok {
                        return Err(Error::Invariant(format!("latent sign pattern at ({t}, {i})")));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn sample_prior_atoms<R: Rng + ?Sized>(
    dirichlet: &DirichletHyper,
    rng: &mut R,
) -> Result<Vec<ProbabilityVector<f64>>> {
    dirichlet.all().iter().map(|a| sample_dirichlet(rng, a)).collect()
}
