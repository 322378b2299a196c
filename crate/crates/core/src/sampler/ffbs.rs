//! Step 6: forward filtering, backward sampling of one state column.
//!
//! Model: `W_t = alpha_t + eps_t`, `alpha_1 ~ N(mu/(1-phi), sigma2_eta/(1-phi^2))`,
//! `alpha_t = mu + phi alpha_{t-1} + eta_t`.

use rand::Rng;

use crate::random::sample_normal;
use crate::stick::StateHyper;

use super::state::SamplerState;

/// Filtered moments plus the one-step predictions used by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// `E(alpha_t | W_1..t)`.
    pub means: Vec<f64>,
    /// `V(alpha_t | W_1..t)`.
    pub variances: Vec<f64>,
    /// `E(alpha_t | W_1..t-1)`.
    pub predicted_means: Vec<f64>,
    /// `V(alpha_t | W_1..t-1)`.
    pub predicted_variances: Vec<f64>,
}

pub fn kalman_filter(w: &[f64], hyper: &StateHyper) -> FilterOutput {
    let n = w.len();
    let mut out = FilterOutput {
        means: Vec::with_capacity(n),
        variances: Vec::with_capacity(n),
        predicted_means: Vec::with_capacity(n),
        predicted_variances: Vec::with_capacity(n),
    };
    let (mut m, mut c) = (0.0, 0.0);
    for (t, &obs) in w.iter().enumerate() {
        let (a, r) = if t == 0 {
            (hyper.stationary_mean(), hyper.stationary_variance())
        } else {
            (hyper.mu + hyper.phi * m, hyper.phi * hyper.phi * c + hyper.sigma2_eta)
        };
        let q = r + hyper.sigma2_eps;
        m = a + r / q * (obs - a);
        c = r * hyper.sigma2_eps / q;
        out.predicted_means.push(a);
        out.predicted_variances.push(r);
        out.means.push(m);
        out.variances.push(c);
    }
    out
}

/// Smoothed moments `E(alpha_t | W_1..T)` and `V(alpha_t | W_1..T)`.
pub fn kalman_smoother(w: &[f64], hyper: &StateHyper) -> (Vec<f64>, Vec<f64>) {
    let f = kalman_filter(w, hyper);
    let n = w.len();
    let mut means = f.means.clone();
    let mut vars = f.variances.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let b = f.variances[t] * hyper.phi / f.predicted_variances[t + 1];
        means[t] = f.means[t] + b * (means[t + 1] - f.predicted_means[t + 1]);
        vars[t] = f.variances[t] + b * b * (vars[t + 1] - f.predicted_variances[t + 1]);
    }
    (means, vars)
}

/// Joint draw of `alpha_1..T` given `W_1..T`.
pub fn ffbs_draw<R: Rng + ?Sized>(w: &[f64], hyper: &StateHyper, rng: &mut R) -> Vec<f64> {
    let f = kalman_filter(w, hyper);
    let n = w.len();
    let mut alpha = vec![0.0; n];
    if n == 0 {
        return alpha;
    }
    alpha[n - 1] = sample_normal(rng, f.means[n - 1], f.variances[n - 1].sqrt());
    for t in (0..n - 1).rev() {
        let r_next = f.predicted_variances[t + 1];
        let b = f.variances[t] * hyper.phi / r_next;
        let mean = f.means[t] + b * (alpha[t + 1] - f.predicted_means[t + 1]);
        let var = f.variances[t] * hyper.sigma2_eta / r_next;
        alpha[t] = sample_normal(rng, mean, var.sqrt());
    }
    alpha
}

/// Step 6 for the occupied columns `h < k*`.
pub fn update_states_ffbs<R: Rng + ?Sized>(state: &mut SamplerState, rng: &mut R) {
    let kstar = state.kstar();
    let hyper = state.hyper;
    for h in 0..kstar {
        let draw = ffbs_draw(state.states.w_column(h), &hyper, rng);
        state.states.alpha_column_mut(h).copy_from_slice(&draw);
    }
}
