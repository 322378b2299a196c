//! Recovery and predictive metrics.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::ObservationBlock;
use crate::error::{Error, Result};

use super::simulate::RhoValue;

/// Pearson correlation; `None` when either side is constant or too short.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Correlations between true and estimated `rho` per time point and pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTable {
    /// `(t, correlation)`; `None` marks an undefined correlation.
    pub per_time: Vec<(usize, Option<f64>)>,
    pub pooled: Option<f64>,
}

/// Matches estimates to truth on `(t, j, k)` (with `j < k`), so the order of
/// either input is irrelevant. Every truth entry must have an estimate.
pub fn evaluate_rho_recovery(estimates: &[RhoValue], truth: &[RhoValue]) -> Result<RecoveryTable> {
    let key = |r: &RhoValue| (r.t, r.j.min(r.k), r.j.max(r.k));
    let est: BTreeMap<_, f64> = estimates.iter().map(|r| (key(r), r.value)).collect();
    let mut by_time: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut sorted: Vec<&RhoValue> = truth.iter().collect();
    sorted.sort_by_key(|r| key(r));
    for r in sorted {
        let e = est.get(&key(r)).ok_or_else(|| {
            Error::validation(format!("no estimate for rho at t={} ({}, {})", r.t, r.j, r.k))
        })?;
        let entry = by_time.entry(r.t).or_default();
        entry.0.push(r.value);
        entry.1.push(*e);
    }
    let per_time = by_time.iter().map(|(&t, (a, b))| (t, pearson(a, b))).collect();
    let all_t: Vec<f64> = by_time.values().flat_map(|(a, _)| a.iter().copied()).collect();
    let all_e: Vec<f64> = by_time.values().flat_map(|(_, b)| b.iter().copied()).collect();
    Ok(RecoveryTable {
        per_time,
        pooled: pearson(&all_t, &all_e),
    })
}

/// Counts of a margin (a list of variables) over subjects with every listed
/// variable observed. Cells are zero-based level tuples; zero counts are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountTable {
    pub margin: Vec<usize>,
    pub counts: BTreeMap<Vec<u16>, usize>,
}

impl CountTable {
    pub fn new(margin: Vec<usize>) -> Self {
        CountTable {
            margin,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, subject: &[Option<u16>]) {
        let cell: Option<Vec<u16>> = self.margin.iter().map(|&j| subject[j]).collect();
        if let Some(cell) = cell {
            *self.counts.entry(cell).or_insert(0) += 1;
        }
    }

    pub fn from_block(block: &ObservationBlock, margin: Vec<usize>) -> Self {
        let mut table = CountTable::new(margin);
        for s in block.subjects() {
            table.add(s);
        }
        table
    }

    pub fn get(&self, cell: &[u16]) -> usize {
        self.counts.get(cell).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// AD and MAPE of each replicate against the observed table, and their averages.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveCriteria {
    pub ad: Vec<f64>,
    pub mape: Vec<f64>,
    pub mean_ad: f64,
    pub mean_mape: f64,
}

/// `AD = sum |N_rep - N_obs|` over every cell; `MAPE = mean |N_rep - N_obs| / N_obs`
/// over cells with a positive observed count. Cells observed as zero enter
/// AD only.
pub fn predictive_criteria(replicates: &[CountTable], observed: &CountTable) -> Result<PredictiveCriteria> {
    if replicates.is_empty() {
        return Err(Error::validation("no replicated tables"));
    }
    if observed.counts.is_empty() {
        return Err(Error::validation("observed table is empty"));
    }
    let mut ad = Vec::with_capacity(replicates.len());
    let mut mape = Vec::with_capacity(replicates.len());
    for rep in replicates {
        if rep.margin != observed.margin {
            return Err(Error::validation("replicate and observed margins differ"));
        }
        let cells: BTreeSet<&Vec<u16>> = rep.counts.keys().chain(observed.counts.keys()).collect();
        let mut a = 0.0;
        for c in cells {
            a += (rep.get(c) as f64 - observed.get(c) as f64).abs();
        }
        let m = observed
            .counts
            .iter()
            .map(|(c, &n)| (rep.get(c) as f64 - n as f64).abs() / n as f64)
            .sum::<f64>()
            / observed.counts.len() as f64;
        ad.push(a);
        mape.push(m);
    }
    let n = replicates.len() as f64;
    Ok(PredictiveCriteria {
        mean_ad: ad.iter().sum::<f64>() / n,
        mean_mape: mape.iter().sum::<f64>() / n,
        ad,
        mape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(t: usize, j: usize, k: usize, value: f64) -> RhoValue {
        RhoValue { t, j, k, value }
    }

    #[test]
    fn perfect_recovery_and_order_invariance() {
        let truth = vec![rv(0, 0, 1, 0.1), rv(0, 0, 2, 0.5), rv(0, 1, 2, 0.3), rv(1, 0, 1, 0.2), rv(1, 0, 2, 0.1), rv(1, 1, 2, 0.6)];
        let table = evaluate_rho_recovery(&truth, &truth).unwrap();
        assert!((table.pooled.unwrap() - 1.0).abs() < 1e-12);
        let mut shuffled = truth.clone();
        shuffled.reverse();
        shuffled[0] = rv(1, 2, 1, 0.6);
        let again = evaluate_rho_recovery(&shuffled, &truth).unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn noise_lowers_correlation() {
        let truth: Vec<RhoValue> = (0..40).map(|i| rv(0, i, i + 1, (i as f64 * 0.37).sin().abs())).collect();
        let noisy = |scale: f64| -> Vec<RhoValue> {
            truth
                .iter()
                .enumerate()
                .map(|(i, r)| rv(r.t, r.j, r.k, r.value + scale * ((i * 7919 % 13) as f64 / 13.0 - 0.5)))
                .collect()
        };
        let small = evaluate_rho_recovery(&noisy(0.1), &truth).unwrap().pooled.unwrap();
        let large = evaluate_rho_recovery(&noisy(1.0), &truth).unwrap().pooled.unwrap();
        assert!(small < 1.0 && large < small);
    }

    #[test]
    fn constant_vectors_are_undefined() {
        let truth = vec![rv(0, 0, 1, 0.2), rv(0, 0, 2, 0.2)];
        let est = vec![rv(0, 0, 1, 0.1), rv(0, 0, 2, 0.3)];
        let t = evaluate_rho_recovery(&est, &truth).unwrap();
        assert_eq!(t.pooled, None);
        assert!(evaluate_rho_recovery(&est[..1], &truth).is_err());
    }

    fn table(cells: &[(u16, usize)]) -> CountTable {
        let mut t = CountTable::new(vec![0]);
        for &(c, n) in cells {
            if n > 0 {
                t.counts.insert(vec![c], n);
            }
        }
        t
    }

    #[test]
    fn hand_computed_criteria() {
        let obs = table(&[(0, 10), (1, 10)]);
        let same = predictive_criteria(&[obs.clone()], &obs).unwrap();
        assert_eq!((same.mean_ad, same.mean_mape), (0.0, 0.0));
        let c = predictive_criteria(&[table(&[(0, 12), (1, 8)])], &obs).unwrap();
        assert!((c.mean_ad - 4.0).abs() < 1e-15);
        assert!((c.mean_mape - 0.2).abs() < 1e-15);
        // A cell observed as zero enters AD only.
        let c = predictive_criteria(&[table(&[(0, 10), (1, 10), (2, 3)])], &obs).unwrap();
        assert_eq!(c.mean_ad, 3.0);
        assert_eq!(c.mean_mape, 0.0);
    }

    #[test]
    fn masked_subjects_skip_margins() {
        let block = ObservationBlock::new(2, vec![vec![Some(0), None], vec![Some(1), Some(0)]]).unwrap();
        let t = CountTable::from_block(&block, vec![0, 1]);
        assert_eq!(t.total(), 1);
        assert_eq!(CountTable::from_block(&block, vec![0]).total(), 2);
    }
}
