//! Precision/recall/F1 and inter-annotator agreement.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no items to score")]
    Empty,
    #[error("rater sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("agreement is undefined: {0}")]
    Undefined(String),
    #[error("invalid rating table: {0}")]
    InvalidTable(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores from raw counts. Any 0/0 ratio is reported as 0.
pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Prf {
        precision,
        recall,
        f1,
    }
}

/// Cohen's kappa for two raters assigning one category per item.
///
/// When chance agreement is total (both raters always use the same single
/// category) kappa is 1 if they agree everywhere, and undefined otherwise.
pub fn cohen_kappa<T: Eq + Hash + Ord>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    let mut ca: BTreeMap<&T, usize> = BTreeMap::new();
    let mut cb: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *ca.entry(x).or_default() += 1;
    }
    for y in b {
        *cb.entry(y).or_default() += 1;
    }
    let p_e: f64 = ca
        .iter()
        .map(|(k, &na)| (na as f64 / n) * (*cb.get(k).unwrap_or(&0) as f64 / n))
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return if (1.0 - p_o).abs() < 1e-12 {
            Ok(1.0)
        } else {
            Err(MetricsError::Undefined("expected agreement is 1".into()))
        };
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa over an items x categories table of rater counts. Every
/// row must sum to the same number of raters (at least 2), and there must
/// be at least 2 items.
pub fn fleiss_kappa(table: &[Vec<usize>]) -> Result<f64, MetricsError> {
    if table.len() < 2 {
        return Err(MetricsError::InvalidTable("need at least 2 items".into()));
    }
    let k = table[0].len();
    if k == 0 || table.iter().any(|r| r.len() != k) {
        return Err(MetricsError::InvalidTable("rows must share one nonzero width".into()));
    }
    let raters: usize = table[0].iter().sum();
    if raters < 2 {
        return Err(MetricsError::InvalidTable("need at least 2 raters per item".into()));
    }
    if let Some((i, _)) = table
        .iter()
        .enumerate()
        .find(|(_, r)| r.iter().sum::<usize>() != raters)
    {
        return Err(MetricsError::InvalidTable(format!(
            "row {i} does not sum to {raters}"
        )));
    }
    let n_items = table.len() as f64;
    let r = raters as f64;
    let p_bar = table
        .iter()
        .map(|row| {
            let s: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (s - r) / (r * (r - 1.0))
        })
        .sum::<f64>()
        / n_items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = table.iter().map(|row| row[j]).sum::<usize>() as f64 / (n_items * r);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Multi-label Cohen's kappa: each label is scored as presence/absence
/// between the two raters, then the per-label kappas are macro-averaged.
pub fn multilabel_cohen_kappa<L: Ord + Clone + Hash>(
    labels: &[L],
    a: &[BTreeSet<L>],
    b: &[BTreeSet<L>],
) -> Result<f64, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for l in labels {
        let xa: Vec<bool> = a.iter().map(|s| s.contains(l)).collect();
        let xb: Vec<bool> = b.iter().map(|s| s.contains(l)).collect();
        total += cohen_kappa(&xa, &xb)?;
    }
    Ok(total / labels.len() as f64)
}

/// Multi-label Fleiss' kappa: `ratings[item][rater]` is a label set. Each
/// label becomes a two-column present/absent table; kappas are
/// macro-averaged over labels.
pub fn multilabel_fleiss_kappa<L: Ord + Clone>(
    labels: &[L],
    ratings: &[Vec<BTreeSet<L>>],
) -> Result<f64, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for l in labels {
        let table: Vec<Vec<usize>> = ratings
            .iter()
            .map(|raters| {
                let yes = raters.iter().filter(|s| s.contains(l)).count();
                vec![yes, raters.len() - yes]
            })
            .collect();
        total += fleiss_kappa(&table)?;
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf_zero_division_is_zero() {
        assert_eq!(precision_recall_f1(0, 0, 0), Prf::default());
        let p = precision_recall_f1(0, 3, 0);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn prf_basic() {
        let p = precision_recall_f1(3, 1, 2);
        assert!((p.precision - 0.75).abs() < 1e-12);
        assert!((p.recall - 0.6).abs() < 1e-12);
        assert!((p.f1 - 6.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cohen_perfect_agreement_single_category() {
        assert_eq!(cohen_kappa(&["x", "x"], &["x", "x"]).unwrap(), 1.0);
    }

    #[test]
    fn cohen_length_mismatch_and_empty() {
        assert!(cohen_kappa(&["x"], &["x", "y"]).is_err());
        let e: [&str; 0] = [];
        assert_eq!(cohen_kappa(&e, &e), Err(MetricsError::Empty));
    }

    #[test]
    fn fleiss_rejects_bad_tables() {
        assert!(fleiss_kappa(&[vec![2, 0]]).is_err());
        assert!(fleiss_kappa(&[vec![1, 0], vec![0, 1]]).is_err());
        assert!(fleiss_kappa(&[vec![2, 0], vec![1, 2]]).is_err());
        assert!(fleiss_kappa(&[vec![2, 0], vec![2]]).is_err());
    }

    #[test]
    fn fleiss_all_same_category_is_one() {
        assert_eq!(fleiss_kappa(&[vec![3, 0], vec![3, 0]]).unwrap(), 1.0);
    }
}
