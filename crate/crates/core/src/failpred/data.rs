use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgfeat::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// Feature vectors with binary labels; `true` marks a lineup failure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub vectors: Vec<FeatureVector>,
    pub labels: Vec<bool>,
    pub split: Option<SplitTag>,
}

impl LabeledDataset {
    pub fn new(vectors: Vec<FeatureVector>, labels: Vec<bool>) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        Ok(LabeledDataset {
            vectors,
            labels,
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.values.len())
    }

    pub fn failures(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn successes(&self) -> usize {
        self.len() - self.failures()
    }

    pub fn subset(&self, indices: &[usize], split: Option<SplitTag>) -> LabeledDataset {
        LabeledDataset {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split,
        }
    }

    pub fn class_indices(&self, label: bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.vectors.iter().map(|v| v.values.as_slice()).collect()
    }
}

/// Largest-remainder apportionment of `total` over `fractions`.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let ideal: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut out: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut rest = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

/// Per-class, per-split sample counts. Split totals follow largest-remainder
/// rounding of the overall size; each class/split cell is the floor or the
/// ceiling of its ideal share, so no cell deviates by a whole sample.
pub fn stratified_counts(class_sizes: &[usize], fractions: &[f64]) -> Result<Vec<Vec<usize>>> {
    let total: usize = class_sizes.iter().sum();
    let targets = apportion(total, fractions);
    let ideal: Vec<Vec<f64>> = class_sizes
        .iter()
        .map(|&n| fractions.iter().map(|f| f * n as f64).collect())
        .collect();
    let mut cells: Vec<Vec<usize>> = ideal
        .iter()
        .map(|row| row.iter().map(|x| x.floor() as usize).collect())
        .collect();
    let mut row_need: Vec<usize> = class_sizes
        .iter()
        .zip(&cells)
        .map(|(n, row)| n - row.iter().sum::<usize>())
        .collect();
    let mut col_need: Vec<usize> = (0..fractions.len())
        .map(|s| targets[s] - cells.iter().map(|row| row[s]).sum::<usize>())
        .collect();

    // Fill the 0/1 remainder matrix column by column, giving each unit to the
    // classes with the most outstanding units (Gale-Ryser greedy), preferring
    // larger fractional parts among equals.
    let mut cols: Vec<usize> = (0..fractions.len()).collect();
    cols.sort_by(|&a, &b| col_need[b].cmp(&col_need[a]).then(a.cmp(&b)));
    for s in cols {
        let mut rows: Vec<usize> = (0..class_sizes.len()).filter(|&c| row_need[c] > 0).collect();
        rows.sort_by(|&a, &b| {
            let fa = ideal[a][s] - ideal[a][s].floor();
            let fb = ideal[b][s] - ideal[b][s].floor();
            row_need[b].cmp(&row_need[a]).then(fb.total_cmp(&fa)).then(a.cmp(&b))
        });
        for c in rows.into_iter().take(col_need[s]) {
            cells[c][s] += 1;
            row_need[c] -= 1;
            col_need[s] -= 1;
        }
        if col_need[s] != 0 {
            return Err(Error::InvalidArgument("cannot stratify split counts".into()));
        }
    }
    Ok(cells)
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions {fractions:?} must sum to 1"
        )));
    }
    Ok(())
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.72, 0.08, 0.20];

/// Stratified train/validation/test split, deterministic in `seed`.
pub fn stratified_split(
    data: &LabeledDataset,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    check_fractions(&fractions)?;
    let mut per_class = [data.class_indices(false), data.class_indices(true)];
    for (label, idx) in per_class.iter().enumerate() {
        if idx.len() < 3 {
            return Err(Error::ClassTooSmall {
                class: label as u8,
                count: idx.len(),
                needed: 3,
            });
        }
    }
    let counts = stratified_counts(&[per_class[0].len(), per_class[1].len()], &fractions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (c, idx) in per_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        let mut at = 0;
        for (s, part) in parts.iter_mut().enumerate() {
            part.extend_from_slice(&idx[at..at + counts[c][s]]);
            at += counts[c][s];
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok((
        data.subset(&parts[0], Some(SplitTag::Train)),
        data.subset(&parts[1], Some(SplitTag::Val)),
        data.subset(&parts[2], Some(SplitTag::Test)),
    ))
}

/// Stratified k-fold assignment; each fold's indices are sorted.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut offset = 0;
    for label in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < folds {
            return Err(Error::ClassTooSmall {
                class: label as u8,
                count: idx.len(),
                needed: folds,
            });
        }
        idx.shuffle(&mut rng);
        // continue dealing where the previous class stopped to balance fold sizes
        for (j, i) in idx.into_iter().enumerate() {
            out[(offset + j) % folds].push(i);
        }
        offset = (offset + labels.iter().filter(|&&l| l == label).count()) % folds;
    }
    for f in out.iter_mut() {
        f.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(neg: usize, pos: usize) -> LabeledDataset {
        let n = neg + pos;
        let vectors = (0..n)
            .map(|i| FeatureVector {
                image_id: format!("s{i}").as_str().into(),
                values: vec![i as f64],
            })
            .collect();
        let labels = (0..n).map(|i| i >= neg).collect();
        LabeledDataset::new(vectors, labels).unwrap()
    }

    #[test]
    fn balanced_hundred() {
        let (tr, va, te) = stratified_split(&dataset(50, 50), DEFAULT_SPLIT, 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (72, 8, 20));
        assert_eq!((tr.failures(), va.failures(), te.failures()), (36, 4, 10));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let d = dataset(70, 30);
        let a = stratified_split(&d, DEFAULT_SPLIT, 9).unwrap();
        let b = stratified_split(&d, DEFAULT_SPLIT, 9).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<f64> = [&a.0, &a.1, &a.2]
            .iter()
            .flat_map(|s| s.vectors.iter().map(|v| v.values[0]))
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn tiny_class_rejected() {
        assert!(matches!(
            stratified_split(&dataset(10, 2), DEFAULT_SPLIT, 0),
            Err(Error::ClassTooSmall { class: 1, count: 2, .. })
        ));
    }

    #[test]
    fn folds_cover_everything_once() {
        let labels: Vec<bool> = (0..53).map(|i| i % 4 == 0).collect();
        let folds = stratified_folds(&labels, 5, 3).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..53).collect::<Vec<_>>());
        for f in &folds {
            let pos = f.iter().filter(|&&i| labels[i]).count();
            assert!((2..=3).contains(&pos), "{pos}");
            assert!((10..=11).contains(&f.len()));
        }
    }
}
