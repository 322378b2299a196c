//! Time-indexed categorical observations with a missingness mask.

use crate::error::{Error, Result};
use crate::model::CategoricalSchema;

/// Responses collected at one time point, stored row-major (`n x p`).
///
/// `None` marks a masked entry; present entries are zero-based levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationBlock {
    num_vars: usize,
    entries: Vec<Option<u16>>,
}

impl ObservationBlock {
    pub fn new(num_vars: usize, rows: Vec<Vec<Option<u16>>>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::validation("observation block needs at least one variable"));
        }
        let mut entries = Vec::with_capacity(rows.len() * num_vars);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != num_vars {
                return Err(Error::validation(format!(
                    "subject {i} has {} responses, expected {num_vars}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        Ok(ObservationBlock { num_vars, entries })
    }

    pub fn empty(num_vars: usize) -> Self {
        ObservationBlock {
            num_vars,
            entries: Vec::new(),
        }
    }

    pub fn num_subjects(&self) -> usize {
        self.entries.len() / self.num_vars
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subject(&self, i: usize) -> &[Option<u16>] {
        &self.entries[i * self.num_vars..(i + 1) * self.num_vars]
    }

    pub fn subjects(&self) -> impl Iterator<Item = &[Option<u16>]> {
        self.entries.chunks(self.num_vars)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u16> {
        self.entries[i * self.num_vars + j]
    }

    /// True when entry `(i, j)` is missing.
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_none()
    }

    /// True when no subject has variable `j` recorded.
    pub fn variable_absent(&self, j: usize) -> bool {
        self.subjects().all(|s| s[j].is_none())
    }

    pub fn push_subject(&mut self, row: &[Option<u16>]) -> Result<()> {
        if row.len() != self.num_vars {
            return Err(Error::validation("subject length does not match the block"));
        }
        self.entries.extend_from_slice(row);
        Ok(())
    }

    /// Per-level counts of variable `j` over unmasked entries.
    pub fn level_counts(&self, j: usize, levels: usize) -> Vec<usize> {
        let mut counts = vec![0; levels];
        for s in self.subjects() {
            if let Some(l) = s[j] {
                counts[l as usize] += 1;
            }
        }
        counts
    }
}

/// Ragged per-time observations sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: CategoricalSchema,
    time_labels: Vec<i64>,
    blocks: Vec<ObservationBlock>,
}

impl Dataset {
    pub fn new(
        schema: CategoricalSchema,
        time_labels: Vec<i64>,
        blocks: Vec<ObservationBlock>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::validation("dataset needs at least one time point"));
        }
        if time_labels.len() != blocks.len() {
            return Err(Error::validation("one time label per block is required"));
        }
        if time_labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("time labels must be strictly increasing"));
        }
        for (t, b) in blocks.iter().enumerate() {
            if b.num_vars() != schema.num_vars() {
                return Err(Error::validation(format!(
                    "block {t} has {} variables, schema has {}",
                    b.num_vars(),
                    schema.num_vars()
                )));
            }
            for (i, s) in b.subjects().enumerate() {
                for (j, x) in s.iter().enumerate() {
                    if let Some(l) = x {
                        if *l as usize >= schema.level_count(j) {
                            return Err(Error::validation(format!(
                                "time {t}, subject {i}, variable {j}: level {} out of range",
                                l + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(Dataset {
            schema,
            time_labels,
            blocks,
        })
    }

    /// Dataset labelled `1..=T`.
    pub fn from_blocks(schema: CategoricalSchema, blocks: Vec<ObservationBlock>) -> Result<Self> {
        let labels = (1..=blocks.len() as i64).collect();
        Self::new(schema, labels, blocks)
    }

    /// `T` empty blocks: the prior-only configuration.
    pub fn empty(schema: CategoricalSchema, times: usize) -> Result<Self> {
        let p = schema.num_vars();
        Self::from_blocks(schema, (0..times).map(|_| ObservationBlock::empty(p)).collect())
    }

    pub fn schema(&self) -> &CategoricalSchema {
        &self.schema
    }

    pub fn num_times(&self) -> usize {
        self.blocks.len()
    }

    pub fn time_labels(&self) -> &[i64] {
        &self.time_labels
    }

    pub fn block(&self, t: usize) -> &ObservationBlock {
        &self.blocks[t]
    }

    pub fn blocks(&self) -> &[ObservationBlock] {
        &self.blocks
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(ObservationBlock::num_subjects).collect()
    }

    pub fn total_subjects(&self) -> usize {
        self.blocks.iter().map(ObservationBlock::num_subjects).sum()
    }

    /// First `times` waves, used to hold out the tail for forecasting.
    pub fn head(&self, times: usize) -> Result<Dataset> {
        if times == 0 || times > self.num_times() {
            return Err(Error::validation(format!(
                "cannot keep {times} of {} time points",
                self.num_times()
            )));
        }
        Dataset::new(
            self.schema.clone(),
            self.time_labels[..times].to_vec(),
            self.blocks[..times].to_vec(),
        )
    }

    /// Single-wave dataset for per-time fits.
    pub fn slice_time(&self, t: usize) -> Result<Dataset> {
        if t >= self.num_times() {
            return Err(Error::domain(format!("time index {t} out of range")));
        }
        Dataset::new(
            self.schema.clone(),
            vec![self.time_labels[t]],
            vec![self.blocks[t].clone()],
        )
    }

    /// Replace the responses of a block; used by simulation-based checks.
    pub fn replace_block(&mut self, t: usize, block: ObservationBlock) -> Result<()> {
        if block.num_vars() != self.schema.num_vars() {
            return Err(Error::validation("block does not match the schema"));
        }
        self.blocks[t] = block;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CategoricalSchema {
        CategoricalSchema::new(vec![2, 3]).unwrap()
    }

    #[test]
    fn masks_and_counts() {
        let b = ObservationBlock::new(2, vec![vec![Some(0), None], vec![Some(1), Some(2)], vec![Some(1), Some(2)]])
            .unwrap();
        assert_eq!(b.num_subjects(), 3);
        assert!(b.is_masked(0, 1));
        assert_eq!(b.level_counts(0, 2), vec![1, 2]);
        assert_eq!(b.level_counts(1, 3), vec![0, 0, 2]);
        assert!(!b.variable_absent(1));
    }

    #[test]
    fn rejects_out_of_range_levels_and_bad_labels() {
        let b = ObservationBlock::new(2, vec![vec![Some(0), Some(3)]]).unwrap();
        assert!(Dataset::from_blocks(schema(), vec![b]).is_err());
        let ok = ObservationBlock::new(2, vec![vec![Some(0), Some(2)]]).unwrap();
        assert!(Dataset::new(schema(), vec![3, 3], vec![ok.clone(), ok.clone()]).is_err());
        assert!(Dataset::new(schema(), vec![4, 3], vec![ok.clone(), ok]).is_err());
        assert!(ObservationBlock::new(2, vec![vec![Some(0)]]).is_err());
    }

    #[test]
    fn head_and_slice() {
        let b = ObservationBlock::new(2, vec![vec![Some(0), Some(1)]]).unwrap();
        let d = Dataset::from_blocks(schema(), vec![b.clone(), ObservationBlock::empty(2), b]).unwrap();
        assert_eq!(d.head(2).unwrap().sample_sizes(), vec![1, 0]);
        assert_eq!(d.slice_time(2).unwrap().time_labels(), &[3]);
        assert_eq!(d.total_subjects(), 2);
        assert!(d.head(0).is_err());
    }
}
