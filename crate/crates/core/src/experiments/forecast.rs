//! Posterior-predictive tables for future waves.

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::model::{DirichletHyper, ProbabilityVector};
use crate::random::{sample_categorical, sample_dirichlet, SeededRng};
use crate::stick::forecast_states;

use super::evaluate::CountTable;

/// Forecast ladders are extended until the remainder is below this.
pub const FORECAST_REMAINDER: f64 = 1e-8;

/// One replicated table per retained draw.
///
/// With `horizon >= 1` each draw's states are propagated `horizon` steps past
/// the last fitted wave; components beyond the recorded ones get prior atoms.
/// With `horizon = 0` the last fitted wave's mixture is resampled.
pub fn forecast_table(
    draws: &PosteriorDraws,
    horizon: usize,
    n_future: usize,
    margin: &[usize],
    seed: u64,
) -> Result<Vec<CountTable>> {
    let schema = draws.schema();
    if let Some(&bad) = margin.iter().find(|&&j| j >= schema.num_vars()) {
        return Err(Error::domain(format!("margin variable {bad} out of range")));
    }
    if draws.is_empty() {
        return Err(Error::validation("forecasting needs at least one draw"));
    }
    let dirichlet = DirichletHyper::symmetric(schema, draws.meta().dirichlet_a)?;
    let link = draws.meta().link;
    let last = draws.num_times() - 1;
    let mut rng = SeededRng::new(seed, 0);
    let mut tables = Vec::with_capacity(draws.len());
    for d in draws.draws() {
        let weights: Vec<f64> = if horizon == 0 {
            d.ladders[last].weights().to_vec()
        } else {
            let hyper = d.hyper.ok_or_else(|| {
                Error::validation("forecasting beyond the data needs dynamic draws")
            })?;
            let ladder = forecast_states(&d.alpha_last, &hyper, link, horizon, 1, FORECAST_REMAINDER, 100_000, &mut rng)?
                .pop()
                .expect("one forecast path");
            ladder.weights().to_vec()
        };
        let mut atoms: Vec<Vec<ProbabilityVector<f64>>> = d.atoms.clone();
        while atoms.len() < weights.len() {
            atoms.push(
                dirichlet
                    .all()
                    .iter()
                    .map(|a| sample_dirichlet(&mut rng, a))
                    .collect::<Result<_>>()?,
            );
        }
        let mut table = CountTable::new(margin.to_vec());
        let mut subject = vec![None; schema.num_vars()];
        for _ in 0..n_future {
            let h = sample_categorical(&mut rng, &weights)?;
            for &j in margin {
                subject[j] = Some(sample_categorical(&mut rng, atoms[h][j].as_slice())? as u16);
            }
            table.add(&subject);
        }
        tables.push(table);
    }
    Ok(tables)
}

/// Expected counts `n_future * posterior-mean probability` of a margin cell
/// at the last fitted wave.
pub fn expected_last_wave_count(draws: &PosteriorDraws, margin: &[usize], cell: &[u16], n_future: usize) -> Result<f64> {
    let last = draws.num_times() - 1;
    let mut total = 0.0;
    for d in draws.draws() {
        let p: f64 = d.ladders[last]
            .weights()
            .iter()
            .zip(&d.atoms)
            .map(|(nu, a)| nu * margin.iter().zip(cell).map(|(&j, &l)| a[j].get(l as usize)).product::<f64>())
            .sum();
        total += p;
    }
    Ok(n_future as f64 * total / draws.len() as f64)
}
