//! Synthetic data generators with exact ground truth.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ObservationBlock};
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{dependence_from_joint, CategoricalSchema, DirichletHyper, ParafacMixture};
use crate::random::{sample_categorical, sample_dirichlet, sample_standard_normal, SeededRng};
use crate::stick::{extend_to_truncation, LogLadder, StateHyper, StateTrajectory};

/// Per-time sample sizes used when none are given.
pub const DEFAULT_SAMPLE_SIZES: [usize; 10] = [120, 110, 150, 80, 100, 120, 100, 140, 110, 150];

/// Largest `p` for which the log-linear generator materialises `2^p` cells.
pub const MAX_LOGLINEAR_VARS: usize = 15;

/// Truth ladders are extended until the remainder is below this.
pub const TRUTH_REMAINDER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationCase {
    #[default]
    ModelBased,
    LoglinearRw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub case: SimulationCase,
    pub times: usize,
    /// Level count of every variable.
    pub levels: Vec<usize>,
    /// Per-time sample sizes; derived from the default list when empty.
    pub sample_sizes: Vec<usize>,
    pub mu: f64,
    pub phi: f64,
    pub sigma_eps: f64,
    pub sigma_eta: f64,
    pub dirichlet_a: f64,
    /// Step variance of the log-linear coefficient random walks.
    pub rw_variance: f64,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            case: SimulationCase::ModelBased,
            times: 10,
            levels: vec![4; 20],
            sample_sizes: Vec::new(),
            mu: 0.0,
            phi: 0.8,
            sigma_eps: 0.1,
            sigma_eta: 0.8,
            dirichlet_a: 1.0,
            rw_variance: 1.0,
            seed: 1,
        }
    }
}

/// Default sample sizes for `times` waves: the reference list read at evenly
/// spaced positions.
pub fn default_sample_sizes(times: usize) -> Vec<usize> {
    let n = DEFAULT_SAMPLE_SIZES.len();
    (0..times)
        .map(|t| DEFAULT_SAMPLE_SIZES[(t * n / times.max(1)).min(n - 1)])
        .collect()
}

impl SimulationSpec {
    /// Case 1: `T = 10`, `p = 20`, `d = 4`.
    pub fn case_one(seed: u64) -> Self {
        SimulationSpec {
            seed,
            ..Default::default()
        }
    }

    /// Case 2: `T = 8`, `p = 13`, `d = 2`.
    pub fn case_two(seed: u64) -> Self {
        SimulationSpec {
            times: 8,
            levels: vec![2; 13],
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times == 0 {
            return Err(Error::validation("simulation needs at least one time point"));
        }
        CategoricalSchema::new(self.levels.clone())?;
        if !self.sample_sizes.is_empty() && self.sample_sizes.len() != self.times {
            return Err(Error::validation(format!(
                "{} sample sizes given for {} time points",
                self.sample_sizes.len(),
                self.times
            )));
        }
        match self.case {
            SimulationCase::ModelBased => {
                StateHyper::from_sds(self.mu, self.phi, self.sigma_eps, self.sigma_eta)
                    .map_err(|e| Error::validation(e.to_string()))?;
                if !(self.dirichlet_a > 0.0) {
                    return Err(Error::validation("dirichlet_a must be positive"));
                }
            }
            SimulationCase::LoglinearRw => {
                if self.levels.iter().any(|&d| d != 2) {
                    return Err(Error::validation("the log-linear generator needs binary variables"));
                }
                if self.levels.len() > MAX_LOGLINEAR_VARS {
                    return Err(Error::validation(format!(
                        "the log-linear generator materialises 2^p cells and refuses p > {MAX_LOGLINEAR_VARS}"
                    )));
                }
                if !(self.rw_variance >= 0.0) {
                    return Err(Error::validation("rw_variance must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<CategoricalSchema> {
        CategoricalSchema::new(self.levels.clone())
    }

    pub fn sizes(&self) -> Vec<usize> {
        if self.sample_sizes.is_empty() {
            default_sample_sizes(self.times)
        } else {
            self.sample_sizes.clone()
        }
    }

    pub fn state_hyper(&self) -> Result<StateHyper> {
        StateHyper::from_sds(self.mu, self.phi, self.sigma_eps, self.sigma_eta)
    }
}

/// Exact `rho_{t j k}` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoValue {
    pub t: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// `rho` of every pair `j < k` at every time point of a mixture.
pub fn mixture_rho(m: &ParafacMixture<f64>) -> Result<Vec<RhoValue>> {
    let p = m.schema().num_vars();
    let mut out = Vec::new();
    for t in 0..m.num_times() {
        for j in 0..p {
            for k in j + 1..p {
                out.push(RhoValue {
                    t,
                    j,
                    k,
                    value: m.dependence_measure(t, j, k)?,
                });
            }
        }
    }
    Ok(out)
}

/// Draws `n` responses from a mixture ladder, ignoring the (tiny) remainder.
fn sample_block(
    m: &ParafacMixture<f64>,
    t: usize,
    n: usize,
    rng: &mut SeededRng,
) -> Result<ObservationBlock> {
    let p = m.schema().num_vars();
    let weights = m.ladder(t).weights().to_vec();
    let mut block = ObservationBlock::empty(p);
    let mut row = vec![None; p];
    for _ in 0..n {
        let h = sample_categorical(rng, &weights)?;
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = Some(sample_categorical(rng, m.atom(h, j).as_slice())? as u16);
        }
        block.push_subject(&row)?;
    }
    Ok(block)
}

/// Data from the dynamic model itself: atoms from the Dirichlet prior, state
/// trajectories from the AR(1) dynamics extended until every remainder is
/// below `TRUTH_REMAINDER`, then labels and responses.
pub fn generate_model_based(spec: &SimulationSpec) -> Result<(Dataset, ParafacMixture<f64>)> {
    spec.validate()?;
    if spec.case != SimulationCase::ModelBased {
        return Err(Error::validation("spec is not a model-based case"));
    }
    let schema = spec.schema()?;
    let hyper = spec.state_hyper()?;
    let dirichlet = DirichletHyper::symmetric(&schema, spec.dirichlet_a)?;
    let mut rng = SeededRng::new(spec.seed, 0);
    let link = LinkFunction::Probit;
    let mut states = StateTrajectory::empty(spec.times);
    let mut ladders = vec![LogLadder::from_states(&[], link); spec.times];
    let k = extend_to_truncation(
        &mut states,
        &mut ladders,
        &hyper,
        link,
        TRUTH_REMAINDER.ln(),
        100_000,
        &mut rng,
    )?;
    states.truncate(k);
    let atoms = (0..k)
        .map(|_| dirichlet.all().iter().map(|a| sample_dirichlet(&mut rng, a)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let truth = ParafacMixture::new(
        schema.clone(),
        atoms,
        (0..spec.times).map(|t| states.ladder(t, link)).collect(),
    )?;
    let blocks = spec
        .sizes()
        .iter()
        .enumerate()
        .map(|(t, &n)| sample_block(&truth, t, n, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((Dataset::from_blocks(schema, blocks)?, truth))
}

/// Binary-variable log-linear pmfs over `2^p` cells.
///
/// Cell index is `sum_j x_j 2^(p-1-j)` with `x_j` the zero-based level, so
/// the last variable varies fastest. The log-potential is
/// `sum_j lambda_j [x_j = 0] + sum_{j<k} lambda_jk [x_j = 0][x_k = 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoglinearTruth {
    pub num_vars: usize,
    /// `pmfs[t][cell]`.
    pub pmfs: Vec<Vec<f64>>,
}

/// Normalised pmf from main effects and pairwise interactions (`inter[j][k]`, `j < k`).
pub fn loglinear_pmf(main: &[f64], inter: &[Vec<f64>]) -> Vec<f64> {
    let p = main.len();
    let cells = 1usize << p;
    let mut logs = Vec::with_capacity(cells);
    for c in 0..cells {
        let first = |j: usize| (c >> (p - 1 - j)) & 1 == 0;
        let mut v = 0.0;
        for j in 0..p {
            if first(j) {
                v += main[j];
                for k in j + 1..p {
                    if first(k) {
                        v += inter[j][k];
                    }
                }
            }
        }
        logs.push(v);
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pmf: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    pmf
}

impl LoglinearTruth {
    /// Cell levels of index `c`.
    pub fn cell(&self, c: usize) -> Vec<usize> {
        (0..self.num_vars).map(|j| (c >> (self.num_vars - 1 - j)) & 1).collect()
    }

    pub fn pairwise_joint(&self, t: usize, j: usize, k: usize) -> Vec<Vec<f64>> {
        let p = self.num_vars;
        let mut joint = vec![vec![0.0; 2]; 2];
        for (c, &m) in self.pmfs[t].iter().enumerate() {
            joint[(c >> (p - 1 - j)) & 1][(c >> (p - 1 - k)) & 1] += m;
        }
        joint
    }

    pub fn rho(&self) -> Result<Vec<RhoValue>> {
        let mut out = Vec::new();
        for t in 0..self.pmfs.len() {
            for j in 0..self.num_vars {
                for k in j + 1..self.num_vars {
                    out.push(RhoValue {
                        t,
                        j,
                        k,
                        value: dependence_from_joint(&self.pairwise_joint(t, j, k))?,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Log-linear random-walk data: coefficients start at 0 and take one
/// `N(0, rw_variance)` step per wave, the first step included.
pub fn generate_loglinear_rw(spec: &SimulationSpec) -> Result<(Dataset, LoglinearTruth)> {
    spec.validate()?;
    if spec.case != SimulationCase::LoglinearRw {
        return Err(Error::validation("spec is not a log-linear case"));
    }
    let p = spec.levels.len();
    let schema = spec.schema()?;
    let mut rng = SeededRng::new(spec.seed, 0);
    let sd = spec.rw_variance.sqrt();
    let mut main = vec![0.0; p];
    let mut inter = vec![vec![0.0; p]; p];
    let mut pmfs = Vec::with_capacity(spec.times);
    for _ in 0..spec.times {
        for m in main.iter_mut() {
            *m += sd * sample_standard_normal(&mut rng);
        }
        for j in 0..p {
            for k in j + 1..p {
                inter[j][k] += sd * sample_standard_normal(&mut rng);
            }
        }
        pmfs.push(loglinear_pmf(&main, &inter));
    }
    let truth = LoglinearTruth { num_vars: p, pmfs };
    let mut blocks = Vec::with_capacity(spec.times);
    for (t, &n) in spec.sizes().iter().enumerate() {
        let cdf: Vec<f64> = truth.pmfs[t]
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let mut block = ObservationBlock::empty(p);
        for _ in 0..n {
            let u = crate::random::uniform_open(&mut rng) * cdf[cdf.len() - 1];
            let c = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
            let row: Vec<Option<u16>> = truth.cell(c).into_iter().map(|l| Some(l as u16)).collect();
            block.push_subject(&row)?;
        }
        blocks.push(block);
    }
    Ok((Dataset::from_blocks(schema, blocks)?, truth))
}
