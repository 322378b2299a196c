//! Label-side updates: atoms, probit latents, `W`, slice variables and labels.

use rand::Rng;

use crate::data::{Dataset, ObservationBlock};
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{DirichletHyper, ProbabilityVector};
use crate::random::{
    sample_categorical_ln, sample_dirichlet, sample_normal, sample_truncated_normal,
    uniform_open, TruncationSide,
};
use crate::stick::{extend_to_truncation, LogLadder};

use super::state::SamplerState;

/// Metropolis-Hastings bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Acceptance {
    pub accepted: u64,
    pub proposed: u64,
}

impl Acceptance {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Level counts per component and variable over unmasked entries.
pub fn component_counts(
    blocks: &[ObservationBlock],
    labels: &[Vec<usize>],
    levels: &[usize],
    components: usize,
) -> Vec<Vec<Vec<usize>>> {
    let mut counts: Vec<Vec<Vec<usize>>> = (0..components)
        .map(|_| levels.iter().map(|&d| vec![0; d]).collect())
        .collect();
    for (block, labels) in blocks.iter().zip(labels) {
        for (subject, &h) in block.subjects().zip(labels) {
            for (j, x) in subject.iter().enumerate() {
                if let Some(l) = x {
                    counts[h][j][*l as usize] += 1;
                }
            }
        }
    }
    counts
}

/// Atom draws `psi_h^(j) ~ Dirichlet(a_j + counts)` for every listed component.
///
/// Shared by the dynamic sampler and the static baseline.
pub fn draw_atoms<R: Rng + ?Sized>(
    counts: &[Vec<Vec<usize>>],
    dirichlet: &DirichletHyper,
    rng: &mut R,
) -> Result<Vec<Vec<ProbabilityVector<f64>>>> {
    counts
        .iter()
        .map(|per_var| {
            per_var
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let post: Vec<f64> = dirichlet
                        .concentrations(j)
                        .iter()
                        .zip(c)
                        .map(|(a, &n)| a + n as f64)
                        .collect();
                    sample_dirichlet(rng, &post)
                })
                .collect()
        })
        .collect()
}

/// Step 1: atoms of every instantiated component from their Dirichlet conditionals.
pub fn update_atoms<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &Dataset,
    dirichlet: &DirichletHyper,
    rng: &mut R,
) -> Result<()> {
    let counts = component_counts(
        data.blocks(),
        &state.labels,
        data.schema().levels(),
        state.num_components(),
    );
    state.atoms = draw_atoms(&counts, dirichlet, rng)?;
    Ok(())
}

/// Step 2: `z_tih ~ N_-(W_th, 1)` for `h < s_ti` and `N_+(W_th, 1)` for `h = s_ti`.
pub fn update_probit_latents<R: Rng + ?Sized>(
    state: &mut SamplerState,
    link: LinkFunction,
    rng: &mut R,
) -> Result<()> {
    if link != LinkFunction::Probit {
        return Err(Error::validation(
            "latent augmentation requires the probit link",
        ));
    }
    for t in 0..state.labels.len() {
        for i in 0..state.labels[t].len() {
            let s = state.labels[t][i];
            let z = &mut state.latents[t][i];
            z.clear();
            for h in 0..=s {
                let w = state.states.w(t, h);
                let side = if h == s { TruncationSide::Upper } else { TruncationSide::Lower };
                z.push(sample_truncated_normal(rng, w, 1.0, side));
            }
        }
    }
    Ok(())
}

/// Step 3: `W_th ~ N(What, s2)` with `s2 = 1 / (#{s >= h} + 1/sigma2_eps)` and
/// `What = s2 (sum z + alpha / sigma2_eps)`, for every instantiated component.
pub fn update_w<R: Rng + ?Sized>(state: &mut SamplerState, rng: &mut R) {
    let kt = state.num_components();
    let prec_eps = 1.0 / state.hyper.sigma2_eps;
    for t in 0..state.num_times() {
        let mut sum_z = vec![0.0; kt];
        let mut count = vec![0usize; kt];
        for z in &state.latents[t] {
            for (h, &v) in z.iter().enumerate() {
                sum_z[h] += v;
                count[h] += 1;
            }
        }
        for h in 0..kt {
            let var = 1.0 / (count[h] as f64 + prec_eps);
            let mean = var * (sum_z[h] + prec_eps * state.states.alpha(t, h));
            state.states.w_column_mut(h)[t] = sample_normal(rng, mean, var.sqrt());
        }
    }
}

/// Counts `#{s = h}` and `#{s > h}` at one time point.
fn stop_and_pass_counts(labels: &[usize], components: usize) -> (Vec<usize>, Vec<usize>) {
    let mut stop = vec![0usize; components];
    for &s in labels {
        stop[s] += 1;
    }
    let mut pass = vec![0usize; components];
    let mut above = 0;
    for h in (0..components).rev() {
        pass[h] = above;
        above += stop[h];
    }
    (stop, pass)
}

/// Log conditional of one `W_th` given `alpha_th` and the labels, with its
/// first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct WConditional {
    pub alpha: f64,
    pub sigma2_eps: f64,
    pub stop: f64,
    pub pass: f64,
    pub link: LinkFunction,
}

impl WConditional {
    pub fn eval(&self, w: f64) -> (f64, f64, f64) {
        let (lg, dg, d2g) = self.link.ln_eval_derivatives(w);
        let (ls, ds, d2s) = self.link.ln_survival_derivatives(w);
        let r = w - self.alpha;
        let mut f = -r * r / (2.0 * self.sigma2_eps);
        let mut d1 = -r / self.sigma2_eps;
        let mut d2 = -1.0 / self.sigma2_eps;
        if self.stop > 0.0 {
            f += self.stop * lg;
            d1 += self.stop * dg;
            d2 += self.stop * d2g;
        }
        if self.pass > 0.0 {
            f += self.pass * ls;
            d1 += self.pass * ds;
            d2 += self.pass * d2s;
        }
        (f, d1, d2)
    }

    /// Mode by damped Newton started at `alpha`.
    pub fn mode(&self) -> f64 {
        let mut x = self.alpha;
        let (mut f, mut d1, mut d2) = self.eval(x);
        for _ in 0..100 {
            let mut step = if d2 < 0.0 { -d1 / d2 } else { d1.signum() * self.sigma2_eps.sqrt() };
            let mut accepted = false;
            for _ in 0..60 {
                let cand = x + step;
                let (fc, d1c, d2c) = self.eval(cand);
                if fc.is_finite() && fc >= f - 1e-12 * f.abs().max(1.0) {
                    x = cand;
                    f = fc;
                    d1 = d1c;
                    d2 = d2c;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.abs() < 1e-12 * x.abs().max(1.0) {
                break;
            }
        }
        x
    }
}

/// Replacement for steps 2-3 under any link: per `(t, h)` independence MH
/// with a normal proposal at the mode of the log conditional and variance
/// `-1 / curvature`; a random walk with step `sigma_eps` when the curvature
/// is not negative.
pub fn update_w_generic_link<R: Rng + ?Sized>(
    state: &mut SamplerState,
    link: LinkFunction,
    rng: &mut R,
    acceptance: &mut Acceptance,
) {
    let kt = state.num_components();
    for t in 0..state.num_times() {
        let (stop, pass) = stop_and_pass_counts(&state.labels[t], kt);
        for h in 0..kt {
            let cond = WConditional {
                alpha: state.states.alpha(t, h),
                sigma2_eps: state.hyper.sigma2_eps,
                stop: stop[h] as f64,
                pass: pass[h] as f64,
                link,
            };
            let current = state.states.w(t, h);
            let accepted = mh_step_w(&cond, current, rng);
            acceptance.record(accepted.is_some());
            if let Some(w) = accepted {
                state.states.w_column_mut(h)[t] = w;
            }
        }
    }
}

/// One MH move for a single `W`; returns the new value when accepted.
pub fn mh_step_w<R: Rng + ?Sized>(cond: &WConditional, current: f64, rng: &mut R) -> Option<f64> {
    let mode = cond.mode();
    let (_, _, curv) = cond.eval(mode);
    let (f_cur, _, _) = cond.eval(current);
    let (prop, ln_ratio) = if curv < 0.0 {
        let var = -1.0 / curv;
        let prop = sample_normal(rng, mode, var.sqrt());
        let ln_q = |x: f64| -(x - mode) * (x - mode) / (2.0 * var);
        let (f_prop, _, _) = cond.eval(prop);
        (prop, f_prop - f_cur + ln_q(current) - ln_q(prop))
    } else {
        let prop = sample_normal(rng, current, cond.sigma2_eps.sqrt());
        let (f_prop, _, _) = cond.eval(prop);
        (prop, f_prop - f_cur)
    };
    (uniform_open(rng).ln() < ln_ratio).then_some(prop)
}

/// Step 4: `u_ti ~ U(0, nu_{t, s_ti})`, stored as `ln u`.
pub fn update_slice<R: Rng + ?Sized>(
    state: &mut SamplerState,
    link: LinkFunction,
    rng: &mut R,
) -> Result<()> {
    for t in 0..state.num_times() {
        if state.labels[t].is_empty() {
            continue;
        }
        let ladder = state.log_ladder(t, link);
        for (i, &s) in state.labels[t].iter().enumerate() {
            let ln_nu = ladder.ln_weights[s];
            if !ln_nu.is_finite() {
                return Err(Error::Invariant(format!(
                    "weight of occupied component {s} at time {t} is zero"
                )));
            }
            state.ln_slice[t][i] = ln_nu + uniform_open(rng).ln();
        }
    }
    Ok(())
}

/// Step 5: extend the instantiated components until every ladder's remainder
/// is below `min u`, then draw each label over `{h: nu_th > u_ti}` with
/// weights `prod_j psi_{h, x_tij}` over unmasked entries.
///
/// Returns the truncation level used.
#[allow(clippy::too_many_arguments)]
pub fn update_labels<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &Dataset,
    dirichlet: &DirichletHyper,
    link: LinkFunction,
    max_components: usize,
    rng: &mut R,
) -> Result<usize> {
    let ln_u_min = state
        .ln_slice
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !ln_u_min.is_finite() {
        // No subjects: nothing to label.
        return Ok(0);
    }
    let mut ladders: Vec<LogLadder> = (0..state.num_times())
        .map(|t| state.log_ladder(t, link))
        .collect();
    let hyper = state.hyper;
    let level = extend_to_truncation(
        &mut state.states,
        &mut ladders,
        &hyper,
        link,
        ln_u_min,
        max_components,
        rng,
    )?;
    state.fill_atoms(dirichlet, rng)?;
    let ln_atoms: Vec<Vec<Vec<f64>>> = state.atoms[..level]
        .iter()
        .map(|per_var| per_var.iter().map(|a| a.as_slice().iter().map(|x| x.ln()).collect()).collect())
        .collect();
    let mut ln_w = vec![f64::NEG_INFINITY; level];
    for (t, block) in data.blocks().iter().enumerate() {
        let ladder = &ladders[t];
        for (i, subject) in block.subjects().enumerate() {
            let ln_u = state.ln_slice[t][i];
            let mut any = false;
            for h in 0..level {
                ln_w[h] = if ladder.ln_weights[h] > ln_u {
                    any = true;
                    subject
                        .iter()
                        .enumerate()
                        .filter_map(|(j, x)| x.map(|l| ln_atoms[h][j][l as usize]))
                        .sum()
                } else {
                    f64::NEG_INFINITY
                };
            }
            if !any {
                return Err(Error::Invariant(format!("empty slice set at ({t}, {i})")));
            }
            state.labels[t][i] = sample_categorical_ln(rng, &ln_w).map_err(|e| {
                Error::Invariant(format!("label draw at ({t}, {i}): {e}"))
            })?;
        }
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservationBlock;
    use crate::gof::{chi_square_critical, chi_square_statistic, mean_se};
    use crate::model::CategoricalSchema;
    use crate::random::SeededRng;
    use crate::stick::{StateHyper, StateTrajectory};

    fn fixture(labels: Vec<usize>, w: Vec<f64>, rows: Vec<Vec<Option<u16>>>, d: usize) -> (SamplerState, Dataset) {
        let k = w.len();
        let schema = CategoricalSchema::uniform(rows.first().map_or(1, Vec::len), d).unwrap();
        let data = Dataset::from_blocks(schema.clone(), vec![ObservationBlock::new(schema.num_vars(), rows).unwrap()])
            .unwrap();
        let states = StateTrajectory::from_columns(w.iter().map(|&x| vec![x]).collect(), w.iter().map(|&x| vec![x]).collect())
            .unwrap();
        let n = labels.len();
        let atoms = (0..k)
            .map(|_| (0..schema.num_vars()).map(|_| ProbabilityVector::uniform(d)).collect())
            .collect();
        let state = SamplerState {
            labels: vec![labels],
            ln_slice: vec![vec![f64::NEG_INFINITY; n]],
            latents: vec![vec![Vec::new(); n]],
            states,
            atoms,
            hyper: StateHyper::new(0.0, 0.5, 1.0, 1.0).unwrap(),
        };
        (state, data)
    }

    #[test]
    fn atoms_without_data_follow_prior() {
        let (mut state, data) = fixture(vec![], vec![0.0, 0.0], vec![], 2);
        let hyper = DirichletHyper::new(vec![vec![2.0, 1.0]]).unwrap();
        let mut rng = SeededRng::new(1, 0);
        let xs: Vec<f64> = (0..50_000)
            .map(|_| {
                update_atoms(&mut state, &data, &hyper, &mut rng).unwrap();
                state.atoms[1][0].get(0)
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 2.0 / 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn atoms_conjugate_update() {
        let n = 20;
        let rows = vec![vec![Some(0u16), None]; n];
        let (mut state, data) = fixture(vec![0; n], vec![0.0], rows, 2);
        let hyper = DirichletHyper::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let mut rng = SeededRng::new(2, 0);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..50_000 {
            update_atoms(&mut state, &data, &hyper, &mut rng).unwrap();
            a.push(state.atoms[0][0].get(0));
            b.push(state.atoms[0][1].get(0));
        }
        let (m, se) = mean_se(&a);
        assert!((m - (n as f64 + 1.0) / (n as f64 + 2.0)).abs() < 3.0 * se);
        // The fully masked variable is drawn from its prior.
        let (m, se) = mean_se(&b);
        assert!((m - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn latents_have_the_right_signs_and_mean() {
        let (mut state, _) = fixture(vec![0, 2, 1], vec![0.0, 0.0, 0.0], vec![vec![Some(0)]; 3], 2);
        let mut rng = SeededRng::new(3, 0);
        let mut top = Vec::new();
        for _ in 0..30_000 {
            update_probit_latents(&mut state, LinkFunction::Probit, &mut rng).unwrap();
            state.check_invariants(LinkFunction::Probit).unwrap();
            assert_eq!(state.latents[0][0].len(), 1);
            assert_eq!(state.latents[0][1].len(), 3);
            top.push(state.latents[0][0][0]);
        }
        let (m, se) = mean_se(&top);
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 3.0 * se);
        assert!(update_probit_latents(&mut state, LinkFunction::Logit, &mut rng).is_err());
    }

    #[test]
    fn w_update_single_latent() {
        let (mut state, _) = fixture(vec![0], vec![0.0], vec![vec![Some(0)]], 2);
        state.states.alpha_column_mut(0)[0] = 0.4;
        state.latents[0][0] = vec![1.2];
        let mut rng = SeededRng::new(4, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                update_w(&mut state, &mut rng);
                state.states.w(0, 0)
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 0.8).abs() < 3.0 * se);
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((v - 0.5).abs() < 0.01);
    }

    #[test]
    fn w_update_without_members_is_prior_conditional() {
        let (mut state, _) = fixture(vec![], vec![0.0, 0.0], vec![], 2);
        state.hyper.sigma2_eps = 1e-12;
        state.states.alpha_column_mut(1)[0] = -0.7;
        let mut rng = SeededRng::new(5, 0);
        update_w(&mut state, &mut rng);
        assert!((state.states.w(0, 1) + 0.7).abs() < 1e-5);
    }

    #[test]
    fn slice_draws_lie_below_weight() {
        let (mut state, _) = fixture(vec![0, 1, 1], vec![0.3, -0.2], vec![vec![Some(0)]; 3], 2);
        let mut rng = SeededRng::new(6, 0);
        let nu1 = state.states.ladder(0, LinkFunction::Probit).weight(1);
        let mut us = Vec::new();
        for _ in 0..20_000 {
            update_slice(&mut state, LinkFunction::Probit, &mut rng).unwrap();
            state.check_invariants(LinkFunction::Probit).unwrap();
            us.push(state.ln_slice[0][1].exp());
        }
        let ks = crate::gof::ks_one_sample(&us, |u| (u / nu1).clamp(0.0, 1.0));
        assert!(ks.p_value > 0.01);
        assert!(us.iter().all(|&u| u > 0.0 && u < nu1));
    }

    #[test]
    fn singleton_slice_set() {
        // nu_1 = Phi(W_1) = 0.6 > u = 0.5 > nu_2 => label 0 regardless of data.
        let w1 = crate::link::normal_quantile(0.6);
        let (mut state, data) = fixture(vec![0], vec![w1, 3.0], vec![vec![Some(1)]], 2);
        state.atoms[0][0] = ProbabilityVector::new(vec![0.999, 0.001]).unwrap();
        state.atoms[1][0] = ProbabilityVector::new(vec![0.001, 0.999]).unwrap();
        state.ln_slice[0][0] = 0.5f64.ln();
        let hyper = DirichletHyper::new(vec![vec![1.0, 1.0]]).unwrap();
        let mut rng = SeededRng::new(7, 0);
        for _ in 0..100 {
            let mut s = state.clone();
            update_labels(&mut s, &data, &hyper, LinkFunction::Probit, 100, &mut rng).unwrap();
            assert_eq!(s.labels[0][0], 0);
        }
    }

    #[test]
    fn slice_and_label_steps_target_weight_times_likelihood() {
        // Three components, one subject: alternating steps 4 and 5 with the
        // rest frozen samples s with probability nu_h * psi_h(x). The third
        // stick almost surely stops, so the remainder is about 1e-5.
        let w = vec![-0.2, 0.1, 4.0];
        let (mut state, data) = fixture(vec![0], w.clone(), vec![vec![Some(1)]], 2);
        state.atoms[0][0] = ProbabilityVector::new(vec![0.7, 0.3]).unwrap();
        state.atoms[1][0] = ProbabilityVector::new(vec![0.2, 0.8]).unwrap();
        state.atoms[2][0] = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let ladder = crate::stick::weights_from_states(&w, LinkFunction::Probit);
        let lik = [0.3, 0.8, 0.5];
        let hyper = DirichletHyper::new(vec![vec![1.0, 1.0]]).unwrap();
        let mut rng = SeededRng::new(8, 0);
        let mut counts = vec![0usize; 3];
        let mut extra = 0usize;
        for _ in 0..100_000 {
            update_slice(&mut state, LinkFunction::Probit, &mut rng).unwrap();
            update_labels(&mut state, &data, &hyper, LinkFunction::Probit, 500, &mut rng).unwrap();
            let s = state.labels[0][0];
            if s < 3 {
                counts[s] += 1;
                state.states.truncate(3);
                state.atoms.truncate(3);
            } else {
                extra += 1;
            }
        }
        let mut probs: Vec<f64> = (0..3).map(|h| ladder.weight(h) * lik[h]).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        assert!(extra <= 5);
        let stat = chi_square_statistic(&counts, &probs);
        assert!(stat < chi_square_critical(2, 0.01), "stat {stat}, counts {counts:?}");
    }

    #[test]
    fn generic_mode_has_negative_curvature_and_identity_ratio() {
        for link in [LinkFunction::Probit, LinkFunction::Logit] {
            let c = WConditional { alpha: 0.3, sigma2_eps: 0.5, stop: 3.0, pass: 7.0, link };
            let m = c.mode();
            let (_, d1, d2) = c.eval(m);
            assert!(d1.abs() < 1e-8 && d2 < 0.0);
        }
    }

    #[test]
    fn counts_of_stops_and_passes() {
        let (stop, pass) = stop_and_pass_counts(&[0, 2, 2, 1], 4);
        assert_eq!(stop, vec![1, 1, 2, 0]);
        assert_eq!(pass, vec![3, 2, 0, 0]);
    }

    #[test]
    fn acceptance_rate() {
        let mut a = Acceptance::default();
        assert_eq!(a.rate(), None);
        a.record(true);
        a.record(false);
        assert_eq!(a.rate(), Some(0.5));
    }
}
