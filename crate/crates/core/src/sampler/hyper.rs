//! Steps 7-10: the state hyperparameters given the occupied columns `h < k*`.

use rand::Rng;

use crate::error::Result;
use crate::random::{sample_inverse_gamma, sample_normal, sample_truncated_normal_interval, uniform_open};
use crate::stick::{sample_prior_column, StateHyper};

use super::config::PriorConfig;
use super::state::{sample_prior_atoms, SamplerState};
use super::steps::Acceptance;
use crate::model::DirichletHyper;

/// Fallback proposal variance for `phi` when the curvature at the mode is not negative.
pub const PHI_FALLBACK_VARIANCE: f64 = 0.01;

fn occupied_columns(state: &SamplerState) -> Vec<&[f64]> {
    (0..state.kstar()).map(|h| state.states.alpha_column(h)).collect()
}

/// Normal conditional of `mu`: `(mean, variance)`.
pub fn mu_conditional(columns: &[&[f64]], phi: f64, sigma2_eta: f64, prior: &PriorConfig) -> (f64, f64) {
    let k = columns.len();
    if k == 0 {
        return (prior.mu0, prior.sigma2_mu0);
    }
    let times = columns[0].len() as f64;
    let denom = k as f64 * (times - 1.0 + (1.0 + phi) / (1.0 - phi));
    let mut numer = 0.0;
    for a in columns {
        numer += (1.0 + phi) * a[0];
        numer += a.windows(2).map(|p| p[1] - phi * p[0]).sum::<f64>();
    }
    let mu_hat = numer / denom;
    let var_hat = sigma2_eta / denom;
    let prec = 1.0 / var_hat + 1.0 / prior.sigma2_mu0;
    let mean = (mu_hat / var_hat + prior.mu0 / prior.sigma2_mu0) / prec;
    (mean, 1.0 / prec)
}

/// `log pi(phi | .)` up to a constant with its first two derivatives.
pub fn phi_log_conditional(columns: &[&[f64]], mu: f64, sigma2_eta: f64, phi: f64) -> (f64, f64, f64) {
    if !(phi.abs() < 1.0) {
        return (f64::NEG_INFINITY, 0.0, 0.0);
    }
    let k = columns.len() as f64;
    let one_m = 1.0 - phi;
    let q = 1.0 - phi * phi;
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for a in columns {
        let a1 = a[0];
        // Initial-state term (1 - phi^2)(a1 - mu/(1-phi))^2.
        s0 += q * a1 * a1 - 2.0 * a1 * mu * (1.0 + phi) + mu * mu * (1.0 + phi) / one_m;
        s1 += -2.0 * phi * a1 * a1 - 2.0 * a1 * mu + 2.0 * mu * mu / (one_m * one_m);
        s2 += -2.0 * a1 * a1 + 4.0 * mu * mu / (one_m * one_m * one_m);
        for p in a.windows(2) {
            let r = p[1] - mu - phi * p[0];
            s0 += r * r;
            s1 += -2.0 * p[0] * r;
            s2 += 2.0 * p[0] * p[0];
        }
    }
    let c = 1.0 / (2.0 * sigma2_eta);
    let f = 0.5 * k * q.ln() - c * s0;
    let d1 = -k * phi / q - c * s1;
    let d2 = -k * (1.0 + phi * phi) / (q * q) - c * s2;
    (f, d1, d2)
}

/// Safeguarded Newton ascent on `(-1, 1)` started at 0, so the proposal
/// depends only on the conditioning quantities.
pub fn phi_mode(columns: &[&[f64]], mu: f64, sigma2_eta: f64) -> f64 {
    let bound = 1.0 - 1e-12;
    let eval = |x: f64| phi_log_conditional(columns, mu, sigma2_eta, x);
    let mut x = 0.0;
    let (mut f, mut d1, mut d2) = eval(x);
    for _ in 0..200 {
        let mut step = if d2 < 0.0 { -d1 / d2 } else { 0.1 * d1.signum() };
        let mut moved = false;
        for _ in 0..80 {
            let cand = x + step;
            if cand.abs() < bound {
                let (fc, d1c, d2c) = eval(cand);
                if fc >= f - 1e-12 * f.abs().max(1.0) {
                    x = cand;
                    f = fc;
                    d1 = d1c;
                    d2 = d2c;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved || step.abs() < 1e-12 {
            break;
        }
    }
    x
}

/// Step 7.
pub fn update_mu<R: Rng + ?Sized>(state: &mut SamplerState, prior: &PriorConfig, rng: &mut R) {
    let (mean, var) = mu_conditional(&occupied_columns(state), state.hyper.phi, state.hyper.sigma2_eta, prior);
    state.hyper.mu = sample_normal(rng, mean, var.sqrt());
}

/// Step 8: independence MH with a truncated-normal proposal at the mode.
/// Returns whether the proposal was accepted.
pub fn update_phi<R: Rng + ?Sized>(
    state: &mut SamplerState,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<bool> {
    let columns = occupied_columns(state);
    if columns.is_empty() {
        state.hyper.phi = prior.sample_phi(rng);
        return Ok(true);
    }
    let (mu, s2) = (state.hyper.mu, state.hyper.sigma2_eta);
    let mode = phi_mode(&columns, mu, s2);
    let (_, _, curv) = phi_log_conditional(&columns, mu, s2, mode);
    let var = if curv < 0.0 { -1.0 / curv } else { PHI_FALLBACK_VARIANCE };
    let prop = sample_truncated_normal_interval(rng, mode, var.sqrt(), -1.0, 1.0)?;
    if !(prop.abs() < 1.0) {
        return Ok(false);
    }
    let ln_q = |x: f64| -(x - mode) * (x - mode) / (2.0 * var);
    let current = state.hyper.phi;
    let ln_ratio = phi_log_conditional(&columns, mu, s2, prop).0
        - phi_log_conditional(&columns, mu, s2, current).0
        + ln_q(current)
        - ln_q(prop);
    let accept = uniform_open(rng).ln() < ln_ratio;
    if accept {
        state.hyper.phi = prop;
    }
    Ok(accept)
}

/// Inverse-gamma conditional of `sigma2_eps`: `(shape, scale)`.
pub fn sigma_eps_conditional(state: &SamplerState, prior: &PriorConfig) -> (f64, f64) {
    let k = state.kstar();
    let mut ss = 0.0;
    for h in 0..k {
        let a = state.states.alpha_column(h);
        let w = state.states.w_column(h);
        ss += a.iter().zip(w).map(|(a, w)| (w - a) * (w - a)).sum::<f64>();
    }
    let n = (state.num_times() * k) as f64;
    ((n + prior.m_eps) / 2.0, (ss + prior.s_eps) / 2.0)
}

/// Inverse-gamma conditional of `sigma2_eta`: `(shape, scale)`, including the
/// stationary initial-state term.
pub fn sigma_eta_conditional(state: &SamplerState, prior: &PriorConfig) -> (f64, f64) {
    let k = state.kstar();
    let StateHyper { mu, phi, .. } = state.hyper;
    let mut ss = 0.0;
    for h in 0..k {
        let a = state.states.alpha_column(h);
        let d = a[0] - mu / (1.0 - phi);
        ss += (1.0 - phi * phi) * d * d;
        ss += a.windows(2).map(|p| (p[1] - mu - phi * p[0]).powi(2)).sum::<f64>();
    }
    let n = (state.num_times() * k) as f64;
    ((n + prior.m_eta) / 2.0, (ss + prior.s_eta) / 2.0)
}

/// Step 9.
pub fn update_sigma_eps<R: Rng + ?Sized>(state: &mut SamplerState, prior: &PriorConfig, rng: &mut R) -> Result<()> {
    let (shape, scale) = sigma_eps_conditional(state, prior);
    state.hyper.sigma2_eps = sample_inverse_gamma(rng, shape, scale)?;
    Ok(())
}

/// Step 10.
pub fn update_sigma_eta<R: Rng + ?Sized>(state: &mut SamplerState, prior: &PriorConfig, rng: &mut R) -> Result<()> {
    let (shape, scale) = sigma_eta_conditional(state, prior);
    state.hyper.sigma2_eta = sample_inverse_gamma(rng, shape, scale)?;
    Ok(())
}

/// Steps 7-10 in order. Returns the step-8 acceptance.
pub fn update_hyper<R: Rng + ?Sized>(
    state: &mut SamplerState,
    prior: &PriorConfig,
    rng: &mut R,
    phi_acceptance: &mut Acceptance,
) -> Result<()> {
    update_mu(state, prior, rng);
    let accepted = update_phi(state, prior, rng)?;
    if state.kstar() > 0 {
        phi_acceptance.record(accepted);
    }
    update_sigma_eps(state, prior, rng)?;
    update_sigma_eta(state, prior, rng)
}

/// Redraws every unoccupied column (`h >= k*`) and its atoms from the prior
/// given the current hyperparameters. Steps 7-10 integrate these columns
/// out, so this completes the blocked update.
pub fn refresh_unoccupied<R: Rng + ?Sized>(
    state: &mut SamplerState,
    dirichlet: &DirichletHyper,
    rng: &mut R,
) -> Result<()> {
    let kstar = state.kstar();
    let hyper = state.hyper;
    let times = state.num_times();
    for h in kstar..state.num_components() {
        let (a, w) = sample_prior_column(&hyper, times, rng);
        state.states.alpha_column_mut(h).copy_from_slice(&a);
        state.states.w_column_mut(h).copy_from_slice(&w);
        state.atoms[h] = sample_prior_atoms(dirichlet, rng)?;
    }
    Ok(())
}
