//! Dynamic stick-breaking: AR(1) states, weight ladders, truncation and forecasting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::WeightLadder;
use crate::random::sample_normal;

/// Hyperparameters of the latent state dynamics
/// `W_th = alpha_th + eps`, `alpha_th = mu + phi alpha_{t-1,h} + eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateHyper {
    pub mu: f64,
    pub phi: f64,
    pub sigma2_eps: f64,
    pub sigma2_eta: f64,
}

impl StateHyper {
    pub fn new(mu: f64, phi: f64, sigma2_eps: f64, sigma2_eta: f64) -> Result<Self> {
        let h = StateHyper {
            mu,
            phi,
            sigma2_eps,
            sigma2_eta,
        };
        h.validate()?;
        Ok(h)
    }

    /// Construct from standard deviations rather than variances.
    pub fn from_sds(mu: f64, phi: f64, sigma_eps: f64, sigma_eta: f64) -> Result<Self> {
        Self::new(mu, phi, sigma_eps * sigma_eps, sigma_eta * sigma_eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) {
            return Err(Error::domain(format!("|phi| must be < 1, got {}", self.phi)));
        }
        if !(self.sigma2_eps > 0.0 && self.sigma2_eps.is_finite())
            || !(self.sigma2_eta > 0.0 && self.sigma2_eta.is_finite())
        {
            return Err(Error::domain("state noise variances must be positive"));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain("mu must be finite"));
        }
        Ok(())
    }

    /// Mean of the stationary law of `alpha`.
    pub fn stationary_mean(&self) -> f64 {
        self.mu / (1.0 - self.phi)
    }

    /// Variance of the stationary law of `alpha`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma2_eta / (1.0 - self.phi * self.phi)
    }

    /// Marginal variance of `W`.
    pub fn marginal_w_variance(&self) -> f64 {
        self.stationary_variance() + self.sigma2_eps
    }
}

/// Latent states stored per component: `alpha[h][t]`, `w[h][t]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateTrajectory {
    alpha: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    times: usize,
}

impl StateTrajectory {
    pub fn empty(times: usize) -> Self {
        StateTrajectory {
            alpha: Vec::new(),
            w: Vec::new(),
            times,
        }
    }

    pub fn from_columns(alpha: Vec<Vec<f64>>, w: Vec<Vec<f64>>) -> Result<Self> {
        let times = alpha.first().map_or(0, Vec::len);
        if alpha.len() != w.len()
            || alpha.iter().chain(&w).any(|c| c.len() != times)
            || alpha.iter().chain(&w).flatten().any(|x| !x.is_finite())
        {
            return Err(Error::validation("state columns must be finite and equally long"));
        }
        Ok(StateTrajectory { alpha, w, times })
    }

    pub fn num_times(&self) -> usize {
        self.times
    }

    pub fn num_components(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, t: usize, h: usize) -> f64 {
        self.alpha[h][t]
    }

    pub fn w(&self, t: usize, h: usize) -> f64 {
        self.w[h][t]
    }

    pub fn alpha_column(&self, h: usize) -> &[f64] {
        &self.alpha[h]
    }

    pub fn w_column(&self, h: usize) -> &[f64] {
        &self.w[h]
    }

    pub fn alpha_column_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.alpha[h]
    }

    pub fn w_column_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.w[h]
    }

    /// `W` values of every component at time `t`.
    pub fn w_row(&self, t: usize) -> Vec<f64> {
        self.w.iter().map(|c| c[t]).collect()
    }

    pub fn alpha_row(&self, t: usize) -> Vec<f64> {
        self.alpha.iter().map(|c| c[t]).collect()
    }

    pub fn push_column(&mut self, alpha: Vec<f64>, w: Vec<f64>) {
        debug_assert_eq!(alpha.len(), self.times);
        debug_assert_eq!(w.len(), self.times);
        self.alpha.push(alpha);
        self.w.push(w);
    }

    pub fn truncate(&mut self, components: usize) {
        self.alpha.truncate(components);
        self.w.truncate(components);
    }

    /// Draws a fresh component from the prior dynamics and appends it.
    pub fn push_prior_column<R: Rng + ?Sized>(&mut self, hyper: &StateHyper, rng: &mut R) {
        let (a, w) = sample_prior_column(hyper, self.times, rng);
        self.push_column(a, w);
    }

    pub fn ladder(&self, t: usize, link: LinkFunction) -> WeightLadder<f64> {
        weights_from_states(&self.w_row(t), link)
    }
}

/// One component's `(alpha, W)` path: stationary start, then AR(1) propagation.
pub fn sample_prior_column<R: Rng + ?Sized>(
    hyper: &StateHyper,
    times: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let sd_eta = hyper.sigma2_eta.sqrt();
    let sd_eps = hyper.sigma2_eps.sqrt();
    let mut alpha = Vec::with_capacity(times);
    let mut w = Vec::with_capacity(times);
    let mut a = sample_normal(rng, hyper.stationary_mean(), hyper.stationary_variance().sqrt());
    for t in 0..times {
        if t > 0 {
            a = hyper.mu + hyper.phi * a + sd_eta * crate::random::sample_standard_normal(rng);
        }
        alpha.push(a);
        w.push(a + sd_eps * crate::random::sample_standard_normal(rng));
    }
    (alpha, w)
}

/// Prior trajectory with `components` independent columns over `times` steps.
pub fn sample_prior_trajectory<R: Rng + ?Sized>(
    hyper: &StateHyper,
    times: usize,
    components: usize,
    rng: &mut R,
) -> Result<StateTrajectory> {
    hyper.validate()?;
    if times == 0 || components == 0 {
        return Err(Error::validation("trajectory needs T >= 1 and H >= 1"));
    }
    let mut traj = StateTrajectory::empty(times);
    for _ in 0..components {
        traj.push_prior_column(hyper, rng);
    }
    Ok(traj)
}

/// `nu_h = g(W_h) prod_{l<h} (1 - g(W_l))` with the remainder `prod_l (1 - g(W_l))`.
pub fn weights_from_states(w: &[f64], link: LinkFunction) -> WeightLadder<f64> {
    let mut rest = 1.0;
    let mut weights = Vec::with_capacity(w.len());
    for &x in w {
        weights.push(rest * link.eval(x));
        rest *= link.survival(x);
    }
    WeightLadder::new(weights, rest).expect("stick-breaking ladder is normalised by construction")
}

/// Log-space ladder: `ln nu_h` and the log remainder after each component.
///
/// Finite for every finite `W`, so slice sets stay nonempty even when
/// `g(W)` underflows.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLadder {
    pub ln_weights: Vec<f64>,
    /// `ln_remainders[h]` is `ln(1 - sum_{l<=h} nu_l)`.
    pub ln_remainders: Vec<f64>,
}

impl LogLadder {
    pub fn from_states(w: &[f64], link: LinkFunction) -> Self {
        let mut ln_rest = 0.0;
        let mut ln_weights = Vec::with_capacity(w.len());
        let mut ln_remainders = Vec::with_capacity(w.len());
        for &x in w {
            ln_weights.push(ln_rest + link.ln_eval(x));
            ln_rest += link.ln_survival(x);
            ln_remainders.push(ln_rest);
        }
        LogLadder {
            ln_weights,
            ln_remainders,
        }
    }

    pub fn len(&self) -> usize {
        self.ln_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_weights.is_empty()
    }

    pub fn push(&mut self, w: f64, link: LinkFunction) {
        let ln_rest = self.ln_remainders.last().copied().unwrap_or(0.0);
        self.ln_weights.push(ln_rest + link.ln_eval(w));
        self.ln_remainders.push(ln_rest + link.ln_survival(w));
    }

    pub fn ln_remainder(&self) -> f64 {
        self.ln_remainders.last().copied().unwrap_or(0.0)
    }
}

/// Smallest `k` with `sum_{h<=k} nu_th > 1 - u_min` for every time point.
///
/// Returns `Ok(None)` when the supplied ladders are too short to reach the
/// condition; the caller extends the states and retries.
pub fn truncation_level(ladders: &[WeightLadder<f64>], u_min: f64) -> Result<Option<usize>> {
    if !(u_min > 0.0 && u_min <= 1.0) {
        return Err(Error::domain(format!("u_min must lie in (0, 1], got {u_min}")));
    }
    let mut level = 0;
    for ladder in ladders {
        let mut cum = 0.0;
        let mut hit = None;
        for (h, &nu) in ladder.weights().iter().enumerate() {
            cum += nu;
            if cum > 1.0 - u_min {
                hit = Some(h + 1);
                break;
            }
        }
        match hit {
            Some(k) => level = level.max(k),
            None => return Ok(None),
        }
    }
    Ok(Some(level))
}

/// Extends `states` with prior columns until the truncation condition holds
/// at every time point, and returns the resulting level.
///
/// The check runs in log space (`ln remainder < ln u_min`). Fails once
/// `max_components` would be exceeded.
pub fn extend_to_truncation<R: Rng + ?Sized>(
    states: &mut StateTrajectory,
    ladders: &mut [LogLadder],
    hyper: &StateHyper,
    link: LinkFunction,
    ln_u_min: f64,
    max_components: usize,
    rng: &mut R,
) -> Result<usize> {
    let reached = |ladders: &[LogLadder], k: usize| {
        ladders
            .iter()
            .all(|l| k > 0 && l.ln_remainders[k - 1] < ln_u_min)
    };
    let mut k = 0;
    loop {
        while k < states.num_components() {
            if reached(ladders, k) {
                return Ok(k);
            }
            k += 1;
        }
        if reached(ladders, k) {
            return Ok(k);
        }
        if states.num_components() >= max_components {
            return Err(Error::Invariant(format!(
                "truncation level exceeds {max_components} components"
            )));
        }
        states.push_prior_column(hyper, rng);
        let h = states.num_components() - 1;
        for (t, ladder) in ladders.iter_mut().enumerate() {
            ladder.push(states.w(t, h), link);
        }
    }
}

/// Forward simulation of the states from the last fitted time.
///
/// `last_alpha[h]` is `alpha_{T,h}`. Each of `draws` paths propagates every
/// component `horizon` steps, then appends stationary prior components until
/// the ladder remainder drops below `remainder_tol`. Returns one ladder per path.
#[allow(clippy::too_many_arguments)]
pub fn forecast_states<R: Rng + ?Sized>(
    last_alpha: &[f64],
    hyper: &StateHyper,
    link: LinkFunction,
    horizon: usize,
    draws: usize,
    remainder_tol: f64,
    max_components: usize,
    rng: &mut R,
) -> Result<Vec<WeightLadder<f64>>> {
    hyper.validate()?;
    if horizon == 0 {
        return Err(Error::validation("forecast horizon must be at least 1"));
    }
    let sd_eta = hyper.sigma2_eta.sqrt();
    let sd_eps = hyper.sigma2_eps.sqrt();
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut w: Vec<f64> = last_alpha
            .iter()
            .map(|&a0| {
                let mut a = a0;
                for _ in 0..horizon {
                    a = hyper.mu + hyper.phi * a + sd_eta * crate::random::sample_standard_normal(rng);
                }
                a + sd_eps * crate::random::sample_standard_normal(rng)
            })
            .collect();
        let mut rest: f64 = w.iter().map(|&x| link.survival(x)).product();
        while rest >= remainder_tol && w.len() < max_components {
            let a = sample_normal(rng, hyper.stationary_mean(), hyper.stationary_variance().sqrt());
            let x = a + sd_eps * crate::random::sample_standard_normal(rng);
            rest *= link.survival(x);
            w.push(x);
        }
        out.push(weights_from_states(&w, link));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof::mean_se;
    use crate::random::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn ladder_at_zero_states() {
        let l = weights_from_states(&[0.0, 0.0, 0.0], LinkFunction::Probit);
        assert_eq!(l.weights(), &[0.5, 0.25, 0.125]);
        assert_eq!(l.remainder(), 0.125);
    }

    #[test]
    fn ladder_limit_first_state_large() {
        let l = weights_from_states(&[40.0, 0.3, -0.2], LinkFunction::Probit);
        assert!((l.weight(0) - 1.0).abs() < 1e-15);
        assert!(l.weights()[1..].iter().all(|&w| w < 1e-300));
    }

    #[test]
    fn ladder_matches_naive_recomputation() {
        let mut rng = SeededRng::new(5, 0);
        let w: Vec<f64> = (0..12).map(|_| 1.5 * crate::random::sample_standard_normal(&mut rng)).collect();
        let l = weights_from_states(&w, LinkFunction::Probit);
        for h in 0..w.len() {
            let mut naive = crate::link::normal_cdf(w[h]);
            for x in &w[..h] {
                naive *= 1.0 - crate::link::normal_cdf(*x);
            }
            assert!((l.weight(h) - naive).abs() < 1e-14);
        }
        let total: f64 = l.weights().iter().sum::<f64>() + l.remainder();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_ladder_agrees_with_linear() {
        let w = [0.3, -1.2, 2.0, -0.4];
        for link in [LinkFunction::Probit, LinkFunction::Logit] {
            let lin = weights_from_states(&w, link);
            let log = LogLadder::from_states(&w, link);
            for h in 0..w.len() {
                assert!((log.ln_weights[h].exp() - lin.weight(h)).abs() < 1e-14);
            }
            assert!((log.ln_remainder().exp() - lin.remainder()).abs() < 1e-14);
        }
        let extreme = LogLadder::from_states(&[-60.0, -60.0], LinkFunction::Probit);
        assert!(extreme.ln_weights.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn truncation_examples() {
        let ladder = weights_from_states(&[0.0; 6], LinkFunction::Probit);
        assert_eq!(truncation_level(&[ladder.clone()], 0.2).unwrap(), Some(3));
        assert_eq!(truncation_level(&[ladder.clone()], 0.6).unwrap(), Some(1));
        assert_eq!(truncation_level(&[ladder.clone()], 1e-9).unwrap(), None);
        assert!(truncation_level(&[ladder], 0.0).is_err());
    }

    #[test]
    fn truncation_is_max_over_times() {
        let mut rng = SeededRng::new(6, 0);
        for _ in 0..200 {
            let ladders: Vec<WeightLadder<f64>> = (0..4)
                .map(|_| {
                    let w: Vec<f64> = (0..40).map(|_| crate::random::sample_standard_normal(&mut rng)).collect();
                    weights_from_states(&w, LinkFunction::Probit)
                })
                .collect();
            let u = crate::random::uniform_open(&mut rng) * 0.5 + 0.01;
            // Brute force: scan every k from 1 upward, per time.
            let per_time: Vec<usize> = ladders
                .iter()
                .map(|l| {
                    (1..=l.len())
                        .find(|&k| l.weights()[..k].iter().sum::<f64>() > 1.0 - u)
                        .unwrap()
                })
                .collect();
            let expect = *per_time.iter().max().unwrap();
            assert_eq!(truncation_level(&ladders, u).unwrap(), Some(expect));
        }
    }

    #[test]
    fn extension_reaches_condition() {
        let hyper = StateHyper::from_sds(0.0, 0.8, 0.1, 0.8).unwrap();
        let mut rng = SeededRng::new(7, 0);
        let mut states = sample_prior_trajectory(&hyper, 3, 1, &mut rng).unwrap();
        let mut ladders: Vec<LogLadder> = (0..3)
            .map(|t| LogLadder::from_states(&states.w_row(t), LinkFunction::Probit))
            .collect();
        let ln_u = (1e-4f64).ln();
        let k = extend_to_truncation(&mut states, &mut ladders, &hyper, LinkFunction::Probit, ln_u, 10_000, &mut rng).unwrap();
        for t in 0..3 {
            let l = states.ladder(t, LinkFunction::Probit);
            assert!(l.weights()[..k].iter().sum::<f64>() > 1.0 - 1e-4);
        }
        // Minimality: k - 1 fails for some t.
        assert!((0..3).any(|t| ladders[t].ln_remainders[k - 2] >= ln_u));
    }

    #[test]
    fn prior_trajectory_phi_zero_is_iid() {
        let hyper = StateHyper::new(0.7, 0.0, 0.05, 0.5).unwrap();
        let mut rng = SeededRng::new(8, 0);
        let traj = sample_prior_trajectory(&hyper, 10, 10_000, &mut rng).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|h| traj.alpha(9, h)).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 0.7).abs() < 3.0 * se);
        let sq: Vec<f64> = xs.iter().map(|x| (x - 0.7).powi(2)).collect();
        let (v, vse) = mean_se(&sq);
        assert!((v - 0.5).abs() < 3.0 * vse);
    }

    #[test]
    fn prior_trajectory_marginal_and_autocovariance() {
        let hyper = StateHyper::new(0.2, 0.6, 0.09, 0.25).unwrap();
        let mut rng = SeededRng::new(9, 0);
        let n = 100_000;
        let traj = sample_prior_trajectory(&hyper, 4, n, &mut rng).unwrap();
        let m = hyper.stationary_mean();
        // Marginal variance of W at the last time.
        let sq: Vec<f64> = (0..n).map(|h| (traj.w(3, h) - m).powi(2)).collect();
        let (v, se) = mean_se(&sq);
        assert!((v - hyper.marginal_w_variance()).abs() < 3.0 * se);
        // Lag-k autocovariance of alpha.
        for k in 1..=3 {
            let prods: Vec<f64> = (0..n)
                .map(|h| (traj.alpha(0, h) - m) * (traj.alpha(k, h) - m))
                .collect();
            let (c, se) = mean_se(&prods);
            let expect = hyper.phi.powi(k as i32) * hyper.stationary_variance();
            assert!((c - expect).abs() < 3.0 * se, "lag {k}: {c} vs {expect}");
        }
    }

    #[test]
    fn rejects_nonstationary_phi() {
        assert!(StateHyper::new(0.0, 1.0, 0.1, 0.1).is_err());
        assert!(StateHyper::new(0.0, -1.2, 0.1, 0.1).is_err());
        assert!(StateHyper::new(0.0, 0.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn frozen_dynamics_forecast_matches_last_ladder() {
        let hyper = StateHyper::new(0.0, 1.0 - 1e-9, 1e-12, 1e-12).unwrap();
        let last = [0.4, -0.3, 1.1, 0.2];
        let mut rng = SeededRng::new(10, 0);
        let ladders = forecast_states(&last, &hyper, LinkFunction::Probit, 1, 20, 1e-12, 4, &mut rng).unwrap();
        let expect = weights_from_states(&last, LinkFunction::Probit);
        for l in ladders {
            for h in 0..4 {
                assert!((l.weight(h) - expect.weight(h)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn forecast_with_phi_zero_ignores_last_state() {
        let hyper = StateHyper::new(0.1, 0.0, 0.04, 0.5).unwrap();
        let mut r1 = SeededRng::new(11, 0);
        let mut r2 = SeededRng::new(11, 0);
        let a = forecast_states(&[3.0], &hyper, LinkFunction::Probit, 1, 50, 1e-6, 200, &mut r1).unwrap();
        let b = forecast_states(&[-3.0], &hyper, LinkFunction::Probit, 1, 50, 1e-6, 200, &mut r2).unwrap();
        // Same random stream and phi = 0: the last state drops out exactly.
        assert_eq!(a, b);
    }

    #[test]
    fn forecast_mean_matches_closed_form() {
        // E Phi(m + s Z) = Phi(m / sqrt(1 + s^2)) for the first stick fraction.
        let hyper = StateHyper::new(0.2, 0.7, 0.09, 0.36).unwrap();
        let last = [0.5];
        let mut rng = SeededRng::new(12, 0);
        let ladders = forecast_states(&last, &hyper, LinkFunction::Probit, 1, 100_000, 1e-6, 500, &mut rng).unwrap();
        let g: Vec<f64> = ladders.iter().map(|l| l.weight(0)).collect();
        let (m, se) = mean_se(&g);
        let mean = hyper.mu + hyper.phi * last[0];
        let s2 = hyper.sigma2_eta + hyper.sigma2_eps;
        let expect = crate::link::normal_cdf(mean / (1.0 + s2).sqrt());
        assert!((m - expect).abs() < 3.0 * se, "{m} vs {expect}");
        assert!(ladders.iter().all(|l| l.remainder() < 1e-6));
    }

    #[test]
    fn lemma_two_remainder_vanishes() {
        // Mean of 1 - sum_{h<=100} nu over prior draws is far below 1e-6.
        let hyper = StateHyper::from_sds(0.0, 0.8, 0.1, 0.8).unwrap();
        let mut rng = SeededRng::new(13, 0);
        let mut total = 0.0;
        let reps = 2_000;
        for _ in 0..reps {
            let traj = sample_prior_trajectory(&hyper, 1, 100, &mut rng).unwrap();
            total += traj.ladder(0, LinkFunction::Probit).remainder();
        }
        assert!(total / (reps as f64) < 1e-6);
    }

    proptest! {
        #[test]
        fn trailing_states_do_not_change_earlier_weights(
            w in proptest::collection::vec(-6.0f64..6.0, 1..20),
            extra in proptest::collection::vec(-6.0f64..6.0, 1..10),
        ) {
            let short = weights_from_states(&w, LinkFunction::Probit);
            let mut long_w = w.clone();
            long_w.extend(extra);
            let long = weights_from_states(&long_w, LinkFunction::Probit);
            for h in 0..w.len() {
                prop_assert_eq!(short.weight(h), long.weight(h));
            }
            let total: f64 = long.weights().iter().sum::<f64>() + long.remainder();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
