//! Accuracy, majority-class baseline, lift, Cohen's kappa and recovery.
//!
//! Invalid model outputs (`None` predictions) are scored as incorrect and,
//! for kappa, form their own category on the prediction marginal.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::data::{counts_by, PredictionSet};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Metrics for one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditMetrics<T> {
    pub dataset_id: String,
    pub model_id: String,
    pub accuracy: T,
    pub majority_baseline: T,
    pub lift: T,
    pub kappa: T,
    pub n: usize,
}

/// Largest class count over `n`. Ties do not matter: only the count is used.
pub fn majority_baseline<T: Scalar, L: Eq + Hash>(truth: &[L]) -> Result<T> {
    if truth.is_empty() {
        return Err(Error::Empty("majority baseline of no labels"));
    }
    let max = counts_by(truth.iter()).into_values().max().unwrap_or(0);
    Ok(T::of_usize(max) / T::of_usize(truth.len()))
}

pub fn accuracy_of<T: Scalar, L: PartialEq>(truth: &[L], predicted: &[Option<L>]) -> Result<T> {
    check_lengths(truth.len(), predicted.len())?;
    let correct = truth
        .iter()
        .zip(predicted)
        .filter(|(t, p)| p.as_ref() == Some(*t))
        .count();
    Ok(T::of_usize(correct) / T::of_usize(truth.len()))
}

pub fn accuracy<T: Scalar>(preds: &PredictionSet) -> Result<T> {
    accuracy_of(&preds.truth(), &preds.predictions())
}

#[inline]
pub fn lift<T: Scalar>(accuracy: T, majority_baseline: T) -> T {
    accuracy - majority_baseline
}

/// Cohen's kappa from integer counts.
///
/// With `n` rows, `a` agreements and `s = Σ_c truth_c · pred_c`,
/// `κ = (a·n − s) / (n² − s)`. Working in integers keeps the
/// chance-only case (`a·n == s`) at exactly zero.
pub fn kappa_of<T: Scalar, L: Eq + Hash>(truth: &[L], predicted: &[Option<L>]) -> Result<T> {
    check_lengths(truth.len(), predicted.len())?;
    let n = truth.len() as u128;
    let agree = truth
        .iter()
        .zip(predicted)
        .filter(|(t, p)| p.as_ref() == Some(*t))
        .count() as u128;
    let truth_counts = counts_by(truth.iter());
    let pred_counts: HashMap<Option<&L>, usize> = counts_by(predicted.iter().map(Option::as_ref));
    let chance: u128 = truth_counts
        .iter()
        .map(|(label, &tc)| tc as u128 * pred_counts.get(&Some(*label)).copied().unwrap_or(0) as u128)
        .sum();
    let denom = n * n - chance;
    if denom == 0 {
        return if agree == n { Ok(T::one()) } else { Err(Error::DegenerateAgreement) };
    }
    let numer = (agree * n) as i128 - chance as i128;
    Ok(T::of(numer as f64) / T::of(denom as f64))
}

pub fn cohen_kappa<T: Scalar>(preds: &PredictionSet) -> Result<T> {
    kappa_of(&preds.truth(), &preds.predictions())
}

/// `100 · model / reference`.
pub fn recovery<T: Scalar>(model_accuracy: T, reference_accuracy: T) -> Result<T> {
    if !(reference_accuracy > T::zero()) {
        return Err(Error::ZeroReference);
    }
    Ok(T::of(100.0) * model_accuracy / reference_accuracy)
}

pub fn audit_dataset<T: Scalar>(preds: &PredictionSet) -> Result<AuditMetrics<T>> {
    let truth = preds.truth();
    let predicted = preds.predictions();
    let accuracy = accuracy_of(&truth, &predicted)?;
    let majority_baseline = majority_baseline(&truth)?;
    Ok(AuditMetrics {
        dataset_id: preds.dataset_id.clone(),
        model_id: preds.model_id.clone(),
        accuracy,
        majority_baseline,
        lift: lift(accuracy, majority_baseline),
        kappa: kappa_of(&truth, &predicted)?,
        n: truth.len(),
    })
}

fn check_lengths(truth: usize, predicted: usize) -> Result<()> {
    if truth == 0 {
        return Err(Error::Empty("prediction set"));
    }
    if truth != predicted {
        return Err(Error::LengthMismatch(truth, predicted));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Predicted, PredictionRecord};
    use proptest::prelude::*;

    fn set(truth: &[&str], pred: &[Option<&str>]) -> PredictionSet {
        let records = truth
            .iter()
            .zip(pred)
            .enumerate()
            .map(|(i, (t, p))| PredictionRecord {
                row_id: i as u64,
                true_label: t.to_string(),
                predicted: match p {
                    Some(l) => Predicted::Label(l.to_string()),
                    None => Predicted::Invalid("???".into()),
                },
            })
            .collect();
        PredictionSet::new("d", "m", records).unwrap()
    }

    /// Confusion-matrix kappa with floating marginals.
    fn kappa_oracle(truth: &[u8], pred: &[Option<u8>]) -> f64 {
        let n = truth.len() as f64;
        let cats: Vec<Option<u8>> = (0..8).map(Some).chain(std::iter::once(None)).collect();
        let mut m = [[0f64; 9]; 9];
        let idx = |c: Option<u8>| cats.iter().position(|x| *x == c).unwrap();
        for (t, p) in truth.iter().zip(pred) {
            m[idx(Some(*t))][idx(*p)] += 1.0;
        }
        let po: f64 = (0..9).map(|i| m[i][i]).sum::<f64>() / n;
        let pe: f64 = (0..9)
            .map(|i| (0..9).map(|j| m[i][j]).sum::<f64>() / n * (0..9).map(|j| m[j][i]).sum::<f64>() / n)
            .sum();
        (po - pe) / (1.0 - pe)
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_baseline::<f64, _>(&["A", "A", "A"]).unwrap(), 1.0);
        assert_eq!(majority_baseline::<f64, _>(&["A", "B"]).unwrap(), 0.5);
        assert_eq!(majority_baseline::<f64, _>(&["B", "A"]).unwrap(), 0.5);
        assert!((majority_baseline::<f64, _>(&["A", "A", "B"]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(majority_baseline::<f64, &str>(&[]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let p = set(&["a", "b"], &[Some("a"), Some("b")]);
        assert_eq!(accuracy::<f64>(&p).unwrap(), 1.0);
        let p = set(&["a", "b"], &[None, None]);
        assert_eq!(accuracy::<f64>(&p).unwrap(), 0.0);
        let p = set(&["a", "a", "b", "b", "a"], &[Some("a"), Some("a"), Some("b"), Some("b"), Some("b")]);
        assert_eq!(accuracy::<f64>(&p).unwrap(), 0.8);
        assert!(accuracy::<f64>(&set(&[], &[])).is_err());
    }

    #[test]
    fn lift_examples() {
        assert!((lift(0.958f64, 0.959) - -0.001).abs() < 1e-12);
        assert!((lift(0.845f64, 0.932) - -0.087).abs() < 1e-12);
        assert_eq!(lift(0.37f64, 0.37), 0.0);
    }

    #[test]
    fn kappa_examples() {
        let p = set(&["a", "b", "a"], &[Some("a"), Some("b"), Some("a")]);
        assert_eq!(cohen_kappa::<f64>(&p).unwrap(), 1.0);
        let p = set(&["a", "a", "b"], &[Some("a"), Some("a"), Some("a")]);
        assert_eq!(cohen_kappa::<f64>(&p).unwrap(), 0.0);
        let truth = ["A", "A", "A", "B", "B"];
        let pred = [Some("A"), Some("A"), Some("B"), Some("B"), Some("B")];
        let k = kappa_of::<f64, _>(&truth, &pred).unwrap();
        let oracle = kappa_oracle(&[0, 0, 0, 1, 1], &[Some(0), Some(0), Some(1), Some(1), Some(1)]);
        assert!((oracle - 0.32 / 0.52).abs() < 1e-12);
        assert!((k - oracle).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_marginals() {
        // both marginals on one class, full agreement
        let p = set(&["a", "a"], &[Some("a"), Some("a")]);
        assert_eq!(cohen_kappa::<f64>(&p).unwrap(), 1.0);
    }

    #[test]
    fn recovery_examples() {
        assert_eq!(recovery(0.5f64, 0.5).unwrap(), 100.0);
        assert!((recovery(58.6f64, 63.5).unwrap() - 92.2).abs() <= 0.2);
        assert!((recovery(47.7f64, 63.5).unwrap() - 75.0).abs() <= 0.2);
        assert!(matches!(recovery(0.5f64, 0.0), Err(Error::ZeroReference)));
    }

    #[test]
    fn audit_brain_stroke_pattern() {
        let truth: Vec<&str> = (0..1000).map(|i| if i < 959 { "0" } else { "1" }).collect();
        let pred: Vec<Option<&str>> = vec![Some("0"); 1000];
        let m = audit_dataset::<f64>(&set(&truth, &pred)).unwrap();
        assert_eq!(m.accuracy, 0.959);
        assert_eq!(m.majority_baseline, 0.959);
        assert_eq!(m.lift, 0.0);
        assert_eq!(m.kappa, 0.0);
    }

    #[test]
    fn audit_perfect_balanced() {
        let truth = ["0", "1", "0", "1"];
        let pred = truth.map(Some);
        let m = audit_dataset::<f64>(&set(&truth, &pred)).unwrap();
        assert_eq!((m.accuracy, m.majority_baseline, m.lift, m.kappa), (1.0, 0.5, 0.5, 1.0));
    }

    #[test]
    fn audit_embeds_kappa_example() {
        let truth = ["A", "A", "A", "B", "B"];
        let pred = [Some("A"), Some("A"), Some("B"), Some("B"), Some("B")];
        let m = audit_dataset::<f64>(&set(&truth, &pred)).unwrap();
        assert!((m.kappa - 0.6153846153846154).abs() < 1e-12);
        let m32 = audit_dataset::<f32>(&set(&truth, &pred)).unwrap();
        assert!((m32.kappa - 0.615_384_6).abs() < 1e-6);
    }

    fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<Option<u8>>)> {
        (1usize..=50, 1u8..=5).prop_flat_map(|(n, k)| {
            (
                proptest::collection::vec(0..k, n),
                proptest::collection::vec(proptest::option::weighted(0.9, 0..k), n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn kappa_matches_confusion_oracle((truth, pred) in instance()) {
            match kappa_of::<f64, _>(&truth, &pred) {
                Ok(k) => {
                    prop_assert!((-1.0..=1.0).contains(&k));
                    let o = kappa_oracle(&truth, &pred);
                    if o.is_finite() {
                        prop_assert!((k - o).abs() < 1e-12, "{} vs {}", k, o);
                    }
                }
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn lift_identity_and_bounds((truth, pred) in instance()) {
            let ps = set(
                &truth.iter().map(|t| ["a","b","c","d","e"][*t as usize]).collect::<Vec<_>>(),
                &pred.iter().map(|p| p.map(|x| ["a","b","c","d","e"][x as usize])).collect::<Vec<_>>(),
            );
            let m = audit_dataset::<f64>(&ps).unwrap();
            prop_assert_eq!(m.lift, m.accuracy - m.majority_baseline);
            let classes = truth.iter().collect::<std::collections::HashSet<_>>().len();
            prop_assert!(m.majority_baseline >= 1.0 / classes as f64);
        }

        #[test]
        fn constant_prediction_law(truth in proptest::collection::vec(0u8..4, 1..50), c in 0u8..4) {
            let pred = vec![Some(c); truth.len()];
            let k = kappa_of::<f64, _>(&truth, &pred).unwrap();
            let acc: f64 = accuracy_of(&truth, &pred).unwrap();
            let maj: f64 = majority_baseline(&truth).unwrap();
            let all_same = truth.iter().all(|t| *t == c);
            if all_same { prop_assert_eq!(k, 1.0) } else { prop_assert_eq!(k, 0.0) }
            prop_assert!(lift(acc, maj) <= 0.0);
            let count_c = truth.iter().filter(|t| **t == c).count();
            let max = (0..4u8).map(|x| truth.iter().filter(|t| **t == x).count()).max().unwrap();
            prop_assert_eq!(lift(acc, maj) == 0.0, count_c == max);
        }

        #[test]
        fn label_permutation_invariance((truth, pred) in instance(), shift in 1u8..5) {
            let relabel = |x: u8| (x + shift) % 5;
            let t2: Vec<u8> = truth.iter().map(|&x| relabel(x)).collect();
            let p2: Vec<Option<u8>> = pred.iter().map(|p| p.map(relabel)).collect();
            prop_assert_eq!(accuracy_of::<f64, _>(&truth, &pred).unwrap(), accuracy_of::<f64, _>(&t2, &p2).unwrap());
            prop_assert_eq!(majority_baseline::<f64, _>(&truth).unwrap(), majority_baseline::<f64, _>(&t2).unwrap());
            prop_assert_eq!(kappa_of::<f64, _>(&truth, &pred).unwrap(), kappa_of::<f64, _>(&t2, &p2).unwrap());
        }
    }
}
