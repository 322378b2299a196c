//! Analytic prior moments of the cell probabilities.
//!
//! The link moments `beta1 = E g(W)`, `beta2 = E g(W)^2` and
//! `gamma_k = E g(W_t) g(W_{t+k})` are integrals against the stationary
//! Gaussian law of `W`. For the probit link they are computed by 64-node
//! Gauss-Hermite quadrature (a tensor grid for `gamma_k`); other links use a
//! fixed-seed Monte Carlo estimate.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, DirichletHyper};
use crate::random::{sample_standard_normal, SeededRng};
use crate::stick::StateHyper;

pub const QUADRATURE_NODES: usize = 64;
pub const MONTE_CARLO_DRAWS: usize = 1_000_000;
const MONTE_CARLO_SEED: u64 = 0x5eed_0f_11_4b;

/// Gauss-Hermite rule for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the normalised Hermite recurrence.
    pub fn new(n: usize) -> Self {
        const PIM4: f64 = 0.751_125_544_464_942_5;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let prev = z;
                z = prev - p1 / pp;
                if (z - prev).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        GaussHermite { nodes, weights }
    }

    /// Shared 64-node rule.
    pub fn standard() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(QUADRATURE_NODES))
    }

    /// `E f(X)` for `X ~ N(mean, variance)`.
    pub fn expect_normal(&self, mean: f64, variance: f64, f: impl Fn(f64) -> f64) -> f64 {
        let scale = (2.0 * variance).sqrt();
        let total: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mean + scale * x))
            .sum();
        total / std::f64::consts::PI.sqrt()
    }

    /// `E f(X, Y)` for a bivariate normal with common mean and variance and covariance `cov`.
    pub fn expect_bivariate_normal(
        &self,
        mean: f64,
        variance: f64,
        cov: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        // X = m + sqrt(v) z1, Y = m + (c / sqrt(v)) z1 + sqrt(v - c^2 / v) z2
        let sd = variance.sqrt();
        let loading = cov / sd;
        let resid = (variance - loading * loading).max(0.0).sqrt();
        let r2 = std::f64::consts::SQRT_2;
        let mut total = 0.0;
        for (&x1, &w1) in self.nodes.iter().zip(&self.weights) {
            let z1 = r2 * x1;
            let a = mean + sd * z1;
            let b0 = mean + loading * z1;
            let inner: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x2, &w2)| w2 * f(a, b0 + resid * r2 * x2))
                .sum();
            total += w1 * inner;
        }
        total / std::f64::consts::PI
    }
}

/// Moments of `g(W)` under the stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMoments {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub lag: usize,
}

/// Covariance of `W_t` and `W_{t+k}` for `k >= 1`.
fn lagged_w_covariance(hyper: &StateHyper, lag: usize) -> f64 {
    hyper.phi.powi(lag as i32) * hyper.stationary_variance()
}

pub fn link_moments(link: LinkFunction, hyper: &StateHyper, lag: usize) -> Result<LinkMoments> {
    hyper.validate()?;
    let mean = hyper.stationary_mean();
    let var = hyper.marginal_w_variance();
    let (beta1, beta2, gamma) = match link {
        LinkFunction::Probit => {
            let gh = GaussHermite::standard();
            let beta1 = gh.expect_normal(mean, var, |w| link.eval(w));
            let beta2 = gh.expect_normal(mean, var, |w| link.eval(w).powi(2));
            let gamma = if lag == 0 {
                beta2
            } else {
                let cov = lagged_w_covariance(hyper, lag);
                gh.expect_bivariate_normal(mean, var, cov, |a, b| link.eval(a) * link.eval(b))
            };
            (beta1, beta2, gamma)
        }
        LinkFunction::Logit => monte_carlo_link_moments(link, hyper, lag),
    };
    Ok(LinkMoments {
        beta1,
        beta2,
        gamma,
        lag,
    })
}

fn monte_carlo_link_moments(link: LinkFunction, hyper: &StateHyper, lag: usize) -> (f64, f64, f64) {
    let mut rng = SeededRng::new(MONTE_CARLO_SEED, 0);
    let mean = hyper.stationary_mean();
    let var = hyper.marginal_w_variance();
    let sd = var.sqrt();
    let loading = if lag == 0 {
        sd
    } else {
        lagged_w_covariance(hyper, lag) / sd
    };
    let resid = (var - loading * loading).max(0.0).sqrt();
    let (mut s1, mut s2, mut sg) = (0.0, 0.0, 0.0);
    for _ in 0..MONTE_CARLO_DRAWS {
        let z1 = sample_standard_normal(&mut rng);
        let z2 = sample_standard_normal(&mut rng);
        let a = link.eval(mean + sd * z1);
        let b = link.eval(mean + loading * z1 + resid * z2);
        s1 += a;
        s2 += a * a;
        sg += a * b;
    }
    let n = MONTE_CARLO_DRAWS as f64;
    let beta2 = s2 / n;
    (s1 / n, beta2, if lag == 0 { beta2 } else { sg / n })
}

/// Prior expectation, variance and lagged covariance of cell probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorMomentReport {
    /// `E pi_t(c)`.
    pub expectation: f64,
    /// `V pi_t(c)`.
    pub variance: f64,
    /// `Cov(pi_t(c), pi_{t+k}(c'))`.
    pub covariance: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub lag: usize,
}

fn check_cells(hyper: &DirichletHyper, cells: &[&[usize]]) -> Result<()> {
    let levels: Vec<usize> = hyper.all().iter().map(Vec::len).collect();
    let schema = CategoricalSchema::new(levels)?;
    cells.iter().try_for_each(|c| schema.check_cell(c))
}

/// `prod_j a_{j c_j} / a_hat_j`.
pub fn prior_expectation(hyper: &DirichletHyper, cell: &[usize]) -> Result<f64> {
    check_cells(hyper, &[cell])?;
    Ok(cell
        .iter()
        .enumerate()
        .map(|(j, &c)| hyper.concentrations(j)[c] / hyper.total(j))
        .product())
}

/// Atom factor of the covariance between cells `c` and `c'`.
fn atom_covariance_factor(hyper: &DirichletHyper, c: &[usize], c2: &[usize]) -> f64 {
    let mut second = 1.0;
    let mut first = 1.0;
    for j in 0..hyper.num_vars() {
        let a = hyper.concentrations(j);
        let ah = hyper.total(j);
        let same = if c[j] == c2[j] { 1.0 } else { 0.0 };
        second *= a[c[j]] * (a[c2[j]] + same) / (ah * (ah + 1.0));
        first *= a[c[j]] * a[c2[j]] / (ah * ah);
    }
    second - first
}

/// Variance formula: atom factor times `beta2 / (2 beta1 - beta2)`.
pub fn prior_variance(hyper: &DirichletHyper, cell: &[usize], link: &LinkMoments) -> Result<f64> {
    check_cells(hyper, &[cell])?;
    let mut second = 1.0;
    let mut first = 1.0;
    for (j, &c) in cell.iter().enumerate() {
        let a = hyper.concentrations(j)[c];
        let ah = hyper.total(j);
        second *= a * (a + 1.0) / (ah * (ah + 1.0));
        first *= a * a / (ah * ah);
    }
    Ok((second - first) * link.beta2 / (2.0 * link.beta1 - link.beta2))
}

/// Covariance formula: atom factor times `gamma_k / (2 beta1 - gamma_k)`.
pub fn prior_covariance(
    hyper: &DirichletHyper,
    cell: &[usize],
    other: &[usize],
    link: &LinkMoments,
) -> Result<f64> {
    check_cells(hyper, &[cell, other])?;
    Ok(atom_covariance_factor(hyper, cell, other) * link.gamma / (2.0 * link.beta1 - link.gamma))
}

/// Full report for cells `c` (at `t`) and `c'` (at `t + lag`).
pub fn prior_moments(
    hyper: &DirichletHyper,
    state: &StateHyper,
    link_fn: LinkFunction,
    cell: &[usize],
    other: &[usize],
    lag: usize,
) -> Result<PriorMomentReport> {
    if cell.len() != hyper.num_vars() || other.len() != hyper.num_vars() {
        return Err(Error::domain("cells must have one level per variable"));
    }
    let link = link_moments(link_fn, state, lag)?;
    Ok(PriorMomentReport {
        expectation: prior_expectation(hyper, cell)?,
        variance: prior_variance(hyper, cell, &link)?,
        covariance: prior_covariance(hyper, cell, other, &link)?,
        beta1: link.beta1,
        beta2: link.beta2,
        gamma: link.gamma,
        lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof::mean_se;
    use crate::link::normal_cdf;
    use crate::random::sample_dirichlet;
    use crate::stick::{sample_prior_column, weights_from_states};

    #[test]
    fn gauss_hermite_integrates_polynomials() {
        let gh = GaussHermite::standard();
        let total: f64 = gh.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // Moments of N(1, 4): E X^2 = 5, E X^4 = 1 + 6*4 + 3*16 = 73.
        assert!((gh.expect_normal(1.0, 4.0, |x| x * x) - 5.0).abs() < 1e-10);
        assert!((gh.expect_normal(1.0, 4.0, |x| x.powi(4)) - 73.0).abs() < 1e-9);
        let cov = gh.expect_bivariate_normal(0.5, 2.0, 0.7, |a, b| (a - 0.5) * (b - 0.5));
        assert!((cov - 0.7).abs() < 1e-10);
    }

    #[test]
    fn probit_beta1_symmetric() {
        let h = StateHyper::from_sds(0.0, 0.3, 0.4, 1.1).unwrap();
        let m = link_moments(LinkFunction::Probit, &h, 2).unwrap();
        assert!((m.beta1 - 0.5).abs() < 1e-12);
    }

    fn orthant(rho: f64) -> f64 {
        0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn probit_beta2_orthant_identity() {
        for &(phi, se, sh) in &[(0.5, 0.3, 0.5), (0.8, 0.1, 0.8), (-0.4, 0.7, 0.2), (0.0, 1.0, 1.0)] {
            let h = StateHyper::from_sds(0.0, phi, se, sh).unwrap();
            let v = h.marginal_w_variance();
            let m = link_moments(LinkFunction::Probit, &h, 0).unwrap();
            assert!((m.beta2 - orthant(v / (1.0 + v))).abs() < 1e-6, "{phi} {se} {sh}");
            assert_eq!(m.gamma, m.beta2);
            // Lagged: correlation of the two latent differences is c / (1 + v).
            for lag in 1..4 {
                let c = h.phi.powi(lag as i32) * h.stationary_variance();
                let g = link_moments(LinkFunction::Probit, &h, lag).unwrap().gamma;
                assert!((g - orthant(c / (1.0 + v))).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn beta2_orthant_identity_cross_checked_by_monte_carlo() {
        let h = StateHyper::from_sds(0.0, 0.5, 0.3, 0.5).unwrap();
        let v = h.marginal_w_variance();
        let mut rng = SeededRng::new(21, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| normal_cdf(v.sqrt() * sample_standard_normal(&mut rng)).powi(2))
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - orthant(v / (1.0 + v))).abs() < 3.0 * se);
    }

    #[test]
    fn moment_orderings() {
        for &(mu, phi) in &[(0.0, 0.5), (0.7, 0.9), (-1.0, 0.2), (0.3, 0.99)] {
            let h = StateHyper::from_sds(mu, phi, 0.3, 0.6).unwrap();
            let mut prev = f64::INFINITY;
            for lag in 0..6 {
                let m = link_moments(LinkFunction::Probit, &h, lag).unwrap();
                assert!(m.beta2 <= m.beta1);
                assert!(m.gamma > 0.0 && m.gamma < m.beta1);
                assert!(m.gamma <= prev + 1e-12, "gamma increased at lag {lag}");
                prev = m.gamma;
            }
        }
    }

    #[test]
    fn logit_monte_carlo_moments_are_ordered() {
        let h = StateHyper::from_sds(0.2, 0.6, 0.3, 0.5).unwrap();
        let m0 = link_moments(LinkFunction::Logit, &h, 0).unwrap();
        let m1 = link_moments(LinkFunction::Logit, &h, 1).unwrap();
        assert!(m0.beta2 <= m0.beta1);
        assert!(m1.gamma > 0.0 && m1.gamma < m1.beta1);
        // Logit with mean 0 stationary law would give 0.5; here the mean is 0.5.
        let gh = GaussHermite::standard();
        let direct = gh.expect_normal(h.stationary_mean(), h.marginal_w_variance(), |w| LinkFunction::Logit.eval(w));
        assert!((m0.beta1 - direct).abs() < 2e-3);
    }

    #[test]
    fn uniform_hyper_expectation() {
        let schema = CategoricalSchema::uniform(2, 4).unwrap();
        let hyper = DirichletHyper::symmetric(&schema, 1.0).unwrap();
        assert!((prior_expectation(&hyper, &[0, 3]).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_signs() {
        let schema = CategoricalSchema::new(vec![2, 3]).unwrap();
        let hyper = DirichletHyper::symmetric(&schema, 1.0).unwrap();
        let h = StateHyper::from_sds(0.0, 0.5, 0.3, 0.5).unwrap();
        for lag in 0..3 {
            let same = prior_moments(&hyper, &h, LinkFunction::Probit, &[1, 2], &[1, 2], lag).unwrap();
            assert!(same.covariance > 0.0);
            let diff = prior_moments(&hyper, &h, LinkFunction::Probit, &[1, 2], &[0, 0], lag).unwrap();
            assert!(diff.covariance < 0.0);
        }
    }

    #[test]
    fn variance_equals_lag_zero_covariance() {
        let hyper = DirichletHyper::new(vec![vec![0.5, 2.0], vec![1.0, 3.0, 0.7]]).unwrap();
        let h = StateHyper::from_sds(0.4, -0.3, 0.2, 0.9).unwrap();
        for cell in [[0usize, 0usize], [1, 2], [0, 1]] {
            let r = prior_moments(&hyper, &h, LinkFunction::Probit, &cell, &cell, 0).unwrap();
            assert!((r.variance - r.covariance).abs() < 1e-15);
            assert!(r.variance >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let hyper = DirichletHyper::new(vec![vec![1.0, 1.0]]).unwrap();
        let h = StateHyper { mu: 0.0, phi: 1.0, sigma2_eps: 0.1, sigma2_eta: 0.1 };
        assert!(link_moments(LinkFunction::Probit, &h, 1).is_err());
        let ok = StateHyper::from_sds(0.0, 0.5, 0.3, 0.5).unwrap();
        assert!(prior_moments(&hyper, &ok, LinkFunction::Probit, &[2], &[0], 0).is_err());
    }

    /// Direct simulation of the prior: atoms from the Dirichlet, three time
    /// points of states, ladders truncated once the remainder is below 1e-8.
    fn prior_cell_draws(
        hyper: &DirichletHyper,
        state: &StateHyper,
        cell: &[usize],
        other: &[usize],
        reps: usize,
        seed: u64,
    ) -> Vec<[f64; 6]> {
        let mut rng = SeededRng::new(seed, 0);
        let times = 3;
        (0..reps)
            .map(|_| {
                let mut atoms: Vec<Vec<Vec<f64>>> = Vec::new();
                let mut w_cols: Vec<Vec<f64>> = Vec::new();
                loop {
                    let (_, w) = sample_prior_column(state, times, &mut rng);
                    w_cols.push(w);
                    atoms.push(
                        hyper.all().iter().map(|a| sample_dirichlet(&mut rng, a).unwrap().to_vec()).collect(),
                    );
                    let done = (0..times).all(|t| {
                        let row: Vec<f64> = w_cols.iter().map(|c| c[t]).collect();
                        weights_from_states(&row, LinkFunction::Probit).remainder() < 1e-8
                    });
                    if done {
                        break;
                    }
                }
                let mut out = [0.0; 6];
                for t in 0..times {
                    let row: Vec<f64> = w_cols.iter().map(|c| c[t]).collect();
                    let ladder = weights_from_states(&row, LinkFunction::Probit);
                    for (slot, c) in [(t, cell), (3 + t, other)] {
                        out[slot] = atoms
                            .iter()
                            .zip(ladder.weights())
                            .map(|(a, nu)| nu * c.iter().enumerate().map(|(j, &l)| a[j][l]).product::<f64>())
                            .sum();
                    }
                }
                out
            })
            .collect()
    }

    #[test]
    fn small_setting_matches_monte_carlo() {
        let hyper = DirichletHyper::new(vec![vec![1.0, 1.0]]).unwrap();
        let state = StateHyper::from_sds(0.0, 0.5, 0.3, 0.5).unwrap();
        let draws = prior_cell_draws(&hyper, &state, &[0], &[0], 100_000, 99);
        let r0 = prior_moments(&hyper, &state, LinkFunction::Probit, &[0], &[0], 0).unwrap();
        let xs: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - r0.expectation).abs() < 3.0 * se);
        let sq: Vec<f64> = xs.iter().map(|x| (x - r0.expectation).powi(2)).collect();
        let (v, se) = mean_se(&sq);
        assert!((v - r0.variance).abs() < 3.0 * se, "{v} vs {}", r0.variance);
        for lag in 1..=2 {
            let r = prior_moments(&hyper, &state, LinkFunction::Probit, &[0], &[0], lag).unwrap();
            let prods: Vec<f64> = draws
                .iter()
                .map(|d| (d[0] - r.expectation) * (d[3 + lag] - r.expectation))
                .collect();
            let (c, se) = mean_se(&prods);
            assert!((c - r.covariance).abs() < 3.0 * se, "lag {lag}: {c} vs {}", r.covariance);
        }
    }
}
