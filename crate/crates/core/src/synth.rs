//! Synthetic corpora drawn from independent Bernoulli message models.
//!
//! Corpus A is mostly drawn from `p_a` and corpus B mostly from `p_b`; a
//! fixed fraction of each corpus is swapped to the other model. Files drawn
//! from `p_a` are labelled valid and files drawn from `p_b` rejected.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryRelationMatrix, ColumnId, GroundTruth, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_messages: usize,
    pub size_a: usize,
    pub size_b: usize,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub contamination_a: f64,
    pub contamination_b: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub a: BinaryRelationMatrix,
    pub b: BinaryRelationMatrix,
    pub truth_a: GroundTruth,
    pub truth_b: GroundTruth,
}

/// Draws `n` probabilities uniformly from `[lo, hi)`.
pub fn draw_probabilities<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Number of swapped files: `round(c · size)`.
pub fn contaminated_count(c: f64, size: usize) -> usize {
    (c * size as f64).round() as usize
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.p_a.len() != self.n_messages || self.p_b.len() != self.n_messages {
            return Err(Error::InvalidArgument(format!(
                "probability vectors must have {} entries",
                self.n_messages
            )));
        }
        if let Some(p) = self.p_a.iter().chain(&self.p_b).find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        for c in [self.contamination_a, self.contamination_b] {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!("contamination {c} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticCorpus> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (a, truth_a) = self.corpus(&mut rng, "A", self.size_a, self.contamination_a, Label::Valid);
        let (b, truth_b) = self.corpus(&mut rng, "B", self.size_b, self.contamination_b, Label::Rejected);
        Ok(SyntheticCorpus { a, b, truth_a, truth_b })
    }

    fn corpus(
        &self,
        rng: &mut ChaCha8Rng,
        label: &str,
        size: usize,
        contamination: f64,
        majority: Label,
    ) -> (BinaryRelationMatrix, GroundTruth) {
        let mut labels = vec![majority; size];
        for i in index::sample(rng, size, contaminated_count(contamination, size)) {
            labels[i] = majority.other();
        }
        let columns = labels
            .iter()
            .map(|l| {
                let p = match l {
                    Label::Valid => &self.p_a,
                    Label::Rejected => &self.p_b,
                };
                p.iter()
                    .enumerate()
                    .filter(|&(_, &pk)| rng.random_bool(pk))
                    .map(|(k, _)| k as u32)
                    .collect()
            })
            .collect();
        let cols = (1..=size).map(ColumnId::plain).collect();
        let m = BinaryRelationMatrix::from_sparse_columns(label, (1..=self.n_messages).collect(), cols, columns)
            .expect("generated columns are sorted and in range");
        let truth = labels.into_iter().enumerate().map(|(i, l)| (i + 1, l)).collect();
        (m, truth)
    }
}
