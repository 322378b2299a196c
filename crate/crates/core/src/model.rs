//! Parafac mixtures of product multinomials.
//!
//! A mixture at time `t` is `pi_t(c) = sum_h nu_th prod_j psi_h^(j)[c_j]`.
//! The full probability tensor is never built; cell, marginal and pairwise
//! quantities are evaluated directly from atoms and weight ladders. All level
//! and variable indices in this module are zero-based.

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Number of variables and their level counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalSchema {
    levels: Vec<usize>,
}

impl CategoricalSchema {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::validation("schema needs at least one variable"));
        }
        if let Some((j, d)) = levels.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(Error::validation(format!(
                "variable {j} has {d} levels; at least 2 required"
            )));
        }
        Ok(CategoricalSchema { levels })
    }

    /// Same level count for every variable.
    pub fn uniform(p: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; p])
    }

    pub fn num_vars(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn level_count(&self, j: usize) -> usize {
        self.levels[j]
    }

    /// Total number of cells, `None` on overflow.
    pub fn num_cells(&self) -> Option<u128> {
        self.levels
            .iter()
            .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))
    }

    pub fn check_cell(&self, cell: &[usize]) -> Result<()> {
        if cell.len() != self.levels.len() {
            return Err(Error::domain(format!(
                "cell has {} coordinates, schema has {} variables",
                cell.len(),
                self.levels.len()
            )));
        }
        for (j, (&c, &d)) in cell.iter().zip(&self.levels).enumerate() {
            if c >= d {
                return Err(Error::domain(format!(
                    "level {c} out of range for variable {j} with {d} levels"
                )));
            }
        }
        Ok(())
    }

    pub fn check_var(&self, j: usize) -> Result<()> {
        if j >= self.levels.len() {
            return Err(Error::domain(format!(
                "variable {j} out of range ({} variables)",
                self.levels.len()
            )));
        }
        Ok(())
    }
}

/// Nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T: Scalar = f64> {
    entries: Vec<T>,
}

impl<T: Scalar> ProbabilityVector<T> {
    /// Validates entries without rescaling them.
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("empty probability vector"));
        }
        if entries.iter().any(|&e| !(e >= T::zero()) || !e.is_finite()) {
            return Err(Error::domain("probability entries must be finite and nonnegative"));
        }
        let total: T = entries.iter().copied().sum();
        if (total - T::one()).abs() > T::sum_tolerance() {
            return Err(Error::domain(format!(
                "probability vector sums to {total}, not 1"
            )));
        }
        Ok(ProbabilityVector { entries })
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(mut entries: Vec<T>) -> Result<Self> {
        let total: T = entries.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::domain("cannot normalise weights with nonpositive sum"));
        }
        entries.iter_mut().for_each(|e| *e /= total);
        Self::new(entries)
    }

    pub fn uniform(d: usize) -> Self {
        let v = T::one() / T::from_usize(d).expect("level count fits the scalar");
        ProbabilityVector {
            entries: vec![v; d],
        }
    }

    /// Point mass on `level`.
    pub fn degenerate(d: usize, level: usize) -> Self {
        let mut entries = vec![T::zero(); d];
        entries[level] = T::one();
        ProbabilityVector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.entries.clone()
    }

    pub fn get(&self, l: usize) -> T {
        self.entries[l]
    }
}

/// Stick-breaking weights for one time point, truncated after `len()` components.
///
/// `remainder` is the mass of all components past the truncation, kept
/// explicitly so that `sum(weights) + remainder == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLadder<T: Scalar = f64> {
    weights: Vec<T>,
    remainder: T,
}

impl<T: Scalar> WeightLadder<T> {
    pub fn new(weights: Vec<T>, remainder: T) -> Result<Self> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !weights.iter().all(|&w| unit(w)) || !unit(remainder) {
            return Err(Error::domain("weights and remainder must lie in [0, 1]"));
        }
        let total: T = weights.iter().copied().sum::<T>() + remainder;
        let tol = T::lit(1e-10).max(T::sum_tolerance());
        if (total - T::one()).abs() > tol {
            return Err(Error::domain(format!(
                "weights plus remainder sum to {total}, not 1"
            )));
        }
        Ok(WeightLadder { weights, remainder })
    }

    /// Ladder of a finite mixture: remainder is whatever the weights leave.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        let remainder = (T::one() - total).max(T::zero());
        Self::new(weights, remainder)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, h: usize) -> T {
        self.weights[h]
    }

    pub fn remainder(&self) -> T {
        self.remainder
    }

    /// Drops trailing components, moving their mass into the remainder.
    pub fn truncate(&mut self, len: usize) {
        while self.weights.len() > len {
            let w = self.weights.pop().expect("non-empty");
            self.remainder += w;
        }
    }
}

/// A probability evaluated on a truncated mixture together with the bound on
/// the mass that the truncation left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncated<T: Scalar = f64> {
    pub value: T,
    pub truncation_error: T,
}

/// Dirichlet concentration vectors, one per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletHyper {
    concentrations: Vec<Vec<f64>>,
}

impl DirichletHyper {
    pub fn new(concentrations: Vec<Vec<f64>>) -> Result<Self> {
        if concentrations.is_empty() {
            return Err(Error::validation("Dirichlet hyper needs at least one variable"));
        }
        for (j, a) in concentrations.iter().enumerate() {
            if a.len() < 2 {
                return Err(Error::validation(format!(
                    "variable {j} needs at least 2 concentrations"
                )));
            }
            if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::validation(format!(
                    "variable {j} has a nonpositive concentration"
                )));
            }
        }
        Ok(DirichletHyper { concentrations })
    }

    /// Every concentration equal to `a`.
    pub fn symmetric(schema: &CategoricalSchema, a: f64) -> Result<Self> {
        Self::new(schema.levels().iter().map(|&d| vec![a; d]).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.concentrations.len()
    }

    pub fn concentrations(&self, j: usize) -> &[f64] {
        &self.concentrations[j]
    }

    pub fn all(&self) -> &[Vec<f64>] {
        &self.concentrations
    }

    /// `sum_l a_jl`.
    pub fn total(&self, j: usize) -> f64 {
        self.concentrations[j].iter().sum()
    }

    pub fn matches(&self, schema: &CategoricalSchema) -> bool {
        self.concentrations.len() == schema.num_vars()
            && self
                .concentrations
                .iter()
                .zip(schema.levels())
                .all(|(a, &d)| a.len() == d)
    }
}

/// Shared atoms plus one weight ladder per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParafacMixture<T: Scalar = f64> {
    schema: CategoricalSchema,
    /// `atoms[h][j]` is `psi_h^(j)`.
    atoms: Vec<Vec<ProbabilityVector<T>>>,
    /// `weights[t]` is the ladder at time `t`.
    weights: Vec<WeightLadder<T>>,
}

impl<T: Scalar> ParafacMixture<T> {
    pub fn new(
        schema: CategoricalSchema,
        atoms: Vec<Vec<ProbabilityVector<T>>>,
        weights: Vec<WeightLadder<T>>,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::validation("mixture needs at least one component"));
        }
        if weights.is_empty() {
            return Err(Error::validation("mixture needs at least one time point"));
        }
        for (h, comp) in atoms.iter().enumerate() {
            if comp.len() != schema.num_vars() {
                return Err(Error::validation(format!(
                    "component {h} has {} atoms for {} variables",
                    comp.len(),
                    schema.num_vars()
                )));
            }
            for (j, psi) in comp.iter().enumerate() {
                if psi.len() != schema.level_count(j) {
                    return Err(Error::validation(format!(
                        "atom ({h}, {j}) has {} entries, variable has {} levels",
                        psi.len(),
                        schema.level_count(j)
                    )));
                }
            }
        }
        for (t, ladder) in weights.iter().enumerate() {
            if ladder.len() != atoms.len() {
                return Err(Error::validation(format!(
                    "ladder at time {t} has {} weights for {} components",
                    ladder.len(),
                    atoms.len()
                )));
            }
        }
        Ok(ParafacMixture {
            schema,
            atoms,
            weights,
        })
    }

    pub fn schema(&self) -> &CategoricalSchema {
        &self.schema
    }

    pub fn num_components(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_times(&self) -> usize {
        self.weights.len()
    }

    pub fn atom(&self, h: usize, j: usize) -> &ProbabilityVector<T> {
        &self.atoms[h][j]
    }

    pub fn atoms(&self) -> &[Vec<ProbabilityVector<T>>] {
        &self.atoms
    }

    pub fn ladder(&self, t: usize) -> &WeightLadder<T> {
        &self.weights[t]
    }

    pub fn ladders(&self) -> &[WeightLadder<T>] {
        &self.weights
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t >= self.weights.len() {
            return Err(Error::domain(format!(
                "time {t} out of range ({} time points)",
                self.weights.len()
            )));
        }
        Ok(())
    }

    /// `sum_h nu_th prod_j psi_h^(j)[cell_j]`, flagged with the remainder mass.
    pub fn cell_probability(&self, t: usize, cell: &[usize]) -> Result<Truncated<T>> {
        self.check_time(t)?;
        self.schema.check_cell(cell)?;
        let ladder = &self.weights[t];
        let value = self
            .atoms
            .iter()
            .zip(ladder.weights())
            .map(|(comp, &nu)| {
                comp.iter()
                    .zip(cell)
                    .fold(nu, |acc, (psi, &c)| acc * psi.get(c))
            })
            .sum();
        Ok(Truncated {
            value,
            truncation_error: ladder.remainder(),
        })
    }

    /// `P(x_j = l)` at time `t`: `sum_h nu_th psi_h^(j)[l]`.
    pub fn marginal_probability(&self, t: usize, j: usize, l: usize) -> Result<T> {
        self.check_time(t)?;
        self.schema.check_var(j)?;
        if l >= self.schema.level_count(j) {
            return Err(Error::domain(format!("level {l} out of range for variable {j}")));
        }
        Ok(self
            .atoms
            .iter()
            .zip(self.weights[t].weights())
            .map(|(comp, &nu)| nu * comp[j].get(l))
            .sum())
    }

    /// Joint table of variables `j` (rows) and `k` (columns) at time `t`.
    pub fn pairwise_joint(&self, t: usize, j: usize, k: usize) -> Result<Vec<Vec<T>>> {
        self.check_time(t)?;
        self.schema.check_var(j)?;
        self.schema.check_var(k)?;
        let (dj, dk) = (self.schema.level_count(j), self.schema.level_count(k));
        let mut joint = vec![vec![T::zero(); dk]; dj];
        for (comp, &nu) in self.atoms.iter().zip(self.weights[t].weights()) {
            for (a, row) in joint.iter_mut().enumerate() {
                let left = nu * comp[j].get(a);
                for (b, cell) in row.iter_mut().enumerate() {
                    *cell += left * comp[k].get(b);
                }
            }
        }
        Ok(joint)
    }

    /// Dependence measure between variables `j` and `k` at time `t`.
    pub fn dependence_measure(&self, t: usize, j: usize, k: usize) -> Result<T> {
        if j == k {
            return Err(Error::domain("dependence measure needs two distinct variables"));
        }
        let joint = self.pairwise_joint(t, j, k)?;
        let row: Vec<T> = (0..self.schema.level_count(j))
            .map(|l| self.marginal_probability(t, j, l))
            .collect::<Result<_>>()?;
        let col: Vec<T> = (0..self.schema.level_count(k))
            .map(|l| self.marginal_probability(t, k, l))
            .collect::<Result<_>>()?;
        dependence_with_marginals(&joint, &row, &col)
    }
}

/// Dependence measure of a two-way table, with marginals taken as its row and
/// column sums.
///
/// `rho^2 = 1/(min(d_j, d_k) - 1) * sum (joint - m_j m_k)^2 / (m_j m_k)`; a
/// term whose marginal product and joint are both zero contributes zero.
pub fn dependence_from_joint<T: Scalar>(joint: &[Vec<T>]) -> Result<T> {
    if joint.is_empty() || joint[0].is_empty() {
        return Err(Error::domain("empty joint table"));
    }
    let row: Vec<T> = joint.iter().map(|r| r.iter().copied().sum()).collect();
    let col: Vec<T> = (0..joint[0].len())
        .map(|b| joint.iter().map(|r| r[b]).sum())
        .collect();
    dependence_with_marginals(joint, &row, &col)
}

pub fn dependence_with_marginals<T: Scalar>(joint: &[Vec<T>], row: &[T], col: &[T]) -> Result<T> {
    let (dj, dk) = (row.len(), col.len());
    if dj < 2 || dk < 2 || joint.len() != dj || joint.iter().any(|r| r.len() != dk) {
        return Err(Error::domain("joint table shape does not match its marginals"));
    }
    let mut sum = T::zero();
    for (a, r) in joint.iter().enumerate() {
        for (b, &p) in r.iter().enumerate() {
            let prod = row[a] * col[b];
            if prod > T::zero() {
                let diff = p - prod;
                sum += diff * diff / prod;
            } else if p > T::zero() {
                return Err(Error::domain(format!(
                    "joint cell ({a}, {b}) has mass {p} but a zero marginal"
                )));
            }
        }
    }
    let denom = T::from_usize(dj.min(dk) - 1).expect("small integer");
    Ok((sum / denom).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbabilityVector<f64> {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn all_cells(levels: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &d in levels {
            out = out
                .into_iter()
                .flat_map(|c| {
                    (0..d).map(move |l| {
                        let mut n = c.clone();
                        n.push(l);
                        n
                    })
                })
                .collect();
        }
        out
    }

    fn random_mixture(seed: u64, levels: &[usize], k: usize, times: usize) -> ParafacMixture {
        use crate::random::{sample_dirichlet, SeededRng};
        let mut rng = SeededRng::new(seed, 0);
        let atoms = (0..k)
            .map(|_| {
                levels
                    .iter()
                    .map(|&d| sample_dirichlet(&mut rng, &vec![1.0; d]).unwrap())
                    .collect()
            })
            .collect();
        let ladders = (0..times)
            .map(|_| {
                let mut w = sample_dirichlet(&mut rng, &vec![1.0; k + 1]).unwrap().to_vec();
                let r = w.pop().unwrap();
                WeightLadder::new(w, r).unwrap()
            })
            .collect();
        ParafacMixture::new(CategoricalSchema::new(levels.to_vec()).unwrap(), atoms, ladders)
            .unwrap()
    }

    #[test]
    fn schema_validation() {
        assert!(CategoricalSchema::new(vec![]).is_err());
        assert!(CategoricalSchema::new(vec![2, 1]).is_err());
        let s = CategoricalSchema::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.num_cells(), Some(24));
        assert!(s.check_cell(&[1, 2, 3]).is_ok());
        assert!(s.check_cell(&[2, 0, 0]).is_err());
        assert!(s.check_cell(&[0, 0]).is_err());
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1, 1.1]).is_err());
        let v = ProbabilityVector::<f32>::normalized(vec![1.0, 3.0]).unwrap();
        assert!((v.get(1) - 0.75).abs() < 1e-7);
    }

    #[test]
    fn single_uniform_component_gives_quarter() {
        let schema = CategoricalSchema::uniform(2, 2).unwrap();
        let m = ParafacMixture::new(
            schema,
            vec![vec![ProbabilityVector::uniform(2), ProbabilityVector::uniform(2)]],
            vec![WeightLadder::new(vec![1.0], 0.0).unwrap()],
        )
        .unwrap();
        for cell in all_cells(&[2, 2]) {
            let p = m.cell_probability(0, &cell).unwrap();
            assert_eq!(p.value, 0.25);
            assert_eq!(p.truncation_error, 0.0);
        }
        assert_eq!(m.marginal_probability(0, 1, 0).unwrap(), 0.5);
        assert_eq!(m.dependence_measure(0, 0, 1).unwrap(), 0.0);
    }

    fn diagonal_mixture() -> ParafacMixture {
        let schema = CategoricalSchema::uniform(2, 2).unwrap();
        ParafacMixture::new(
            schema,
            vec![
                vec![ProbabilityVector::degenerate(2, 0), ProbabilityVector::degenerate(2, 0)],
                vec![ProbabilityVector::degenerate(2, 1), ProbabilityVector::degenerate(2, 1)],
            ],
            vec![WeightLadder::new(vec![0.5, 0.5], 0.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_atoms() {
        let m = diagonal_mixture();
        assert_eq!(m.cell_probability(0, &[0, 0]).unwrap().value, 0.5);
        assert_eq!(m.cell_probability(0, &[0, 1]).unwrap().value, 0.0);
        // Four terms of 0.25 each, min(d) - 1 = 1.
        assert!((m.dependence_measure(0, 0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_hand_case() {
        let schema = CategoricalSchema::uniform(1, 2).unwrap();
        let m = ParafacMixture::new(
            schema,
            vec![vec![pv(&[0.2, 0.8])], vec![pv(&[0.9, 0.1])]],
            vec![WeightLadder::new(vec![0.3, 0.7], 0.0).unwrap()],
        )
        .unwrap();
        assert!((m.marginal_probability(0, 0, 0).unwrap() - 0.69).abs() < 1e-15);
    }

    #[test]
    fn index_errors() {
        let m = diagonal_mixture();
        assert!(m.cell_probability(1, &[0, 0]).is_err());
        assert!(m.cell_probability(0, &[0, 2]).is_err());
        assert!(m.marginal_probability(0, 2, 0).is_err());
        assert!(m.dependence_measure(0, 1, 1).is_err());
    }

    #[test]
    fn zero_marginal_convention() {
        // Level 2 of variable 0 never occurs: its terms are 0/0 and contribute nothing.
        let joint = vec![vec![0.3, 0.2], vec![0.1, 0.4], vec![0.0, 0.0]];
        let with_empty: f64 = dependence_from_joint(&joint).unwrap();
        let without = dependence_from_joint(&joint[..2]).unwrap();
        assert!((with_empty - without).abs() < 1e-15);
        let bad = dependence_with_marginals(&[vec![0.5, 0.0], vec![0.0, 0.5]], &[0.5, 0.5], &[1.0, 0.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn cell_probability_matches_naive_sum() {
        let levels = [2, 2, 2];
        let m = random_mixture(11, &levels, 3, 2);
        for t in 0..2 {
            for cell in all_cells(&levels) {
                // Naive: loop components then variables with explicit indexing.
                let mut naive = 0.0;
                for h in 0..3 {
                    let mut prod = m.ladder(t).weights()[h];
                    for j in 0..3 {
                        prod *= m.atoms()[h][j].as_slice()[cell[j]];
                    }
                    naive += prod;
                }
                let got = m.cell_probability(t, &cell).unwrap().value;
                assert!((got - naive).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dependence_matches_brute_force_table() {
        let levels = [3, 2];
        let m = random_mixture(12, &levels, 3, 1);
        // Build the full 3x2 table by enumerating cells, then apply the formula directly.
        let mut table = [[0.0; 2]; 3];
        for a in 0..3 {
            for b in 0..2 {
                table[a][b] = m.cell_probability(0, &[a, b]).unwrap().value;
            }
        }
        let row: Vec<f64> = (0..3).map(|a| m.marginal_probability(0, 0, a).unwrap()).collect();
        let col: Vec<f64> = (0..2).map(|b| m.marginal_probability(0, 1, b).unwrap()).collect();
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..2 {
                s += (table[a][b] - row[a] * col[b]).powi(2) / (row[a] * col[b]);
            }
        }
        let expect = (s / 1.0).sqrt();
        let got = m.dependence_measure(0, 0, 1).unwrap();
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn generic_over_f32() {
        let schema = CategoricalSchema::uniform(2, 2).unwrap();
        let m: ParafacMixture<f32> = ParafacMixture::new(
            schema,
            vec![
                vec![ProbabilityVector::degenerate(2, 0), ProbabilityVector::degenerate(2, 0)],
                vec![ProbabilityVector::degenerate(2, 1), ProbabilityVector::degenerate(2, 1)],
            ],
            vec![WeightLadder::new(vec![0.5f32, 0.5], 0.0).unwrap()],
        )
        .unwrap();
        assert!((m.dependence_measure(0, 0, 1).unwrap() - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn cells_sum_to_one_minus_remainder(seed in 0u64..10_000, p in 1usize..=3, d in 2usize..=4, k in 1usize..=4) {
            let levels = vec![d; p];
            let m = random_mixture(seed, &levels, k, 2);
            for t in 0..2 {
                let total: f64 = all_cells(&levels)
                    .iter()
                    .map(|c| m.cell_probability(t, c).unwrap().value)
                    .sum();
                prop_assert!((total - (1.0 - m.ladder(t).remainder())).abs() < 1e-10);
                let marg: f64 = (0..d).map(|l| m.marginal_probability(t, 0, l).unwrap()).sum();
                let nu: f64 = m.ladder(t).weights().iter().sum();
                prop_assert!((marg - nu).abs() < 1e-12);
            }
        }

        #[test]
        fn dependence_symmetric_and_relabel_invariant(seed in 0u64..10_000, shift in 1usize..3) {
            let levels = [3, 4];
            let m = random_mixture(seed, &levels, 3, 1);
            let a = m.dependence_measure(0, 0, 1).unwrap();
            let b = m.dependence_measure(0, 1, 0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0);

            // Cyclically relabel the levels of variable 0 in every atom.
            let atoms: Vec<Vec<ProbabilityVector>> = m.atoms().iter().map(|comp| {
                let mut v = comp[0].to_vec();
                v.rotate_left(shift);
                vec![ProbabilityVector::new(v).unwrap(), comp[1].clone()]
            }).collect();
            let relabeled = ParafacMixture::new(m.schema().clone(), atoms, m.ladders().to_vec()).unwrap();
            let c = relabeled.dependence_measure(0, 0, 1).unwrap();
            prop_assert!((a - c).abs() < 1e-12);
        }
    }
}
