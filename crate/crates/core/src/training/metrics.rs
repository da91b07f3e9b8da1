use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::predict_topk;

fn check_labels(probs: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let (rows, classes) = probs.dims2()?;
    if rows != labels.len() {
        return Err(Error::Contract(format!(
            "{rows} prediction rows but {} labels",
            labels.len()
        )));
    }
    if let Some((position, &index)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::Label {
            index,
            position,
            bound: classes,
        });
    }
    Ok((rows, classes))
}

/// Top-1 class per row (ties go to the lower index).
pub fn top1(probs: &Tensor) -> Result<Vec<usize>> {
    Ok(predict_topk(probs, 1)?.into_iter().map(|r| r[0]).collect())
}

/// Fraction of rows whose label is among the `k` most probable classes.
pub fn top_k_accuracy(probs: &Tensor, labels: &[usize], k: usize) -> Result<f64> {
    let (rows, _) = check_labels(probs, labels)?;
    let hits = predict_topk(probs, k)?
        .iter()
        .zip(labels)
        .filter(|(top, label)| top.contains(label))
        .count();
    Ok(hits as f64 / rows as f64)
}

/// `matrix[observed][predicted]` counts of top-1 predictions.
pub fn confusion_matrix(probs: &Tensor, labels: &[usize]) -> Result<Vec<Vec<u64>>> {
    let (_, classes) = check_labels(probs, labels)?;
    let mut matrix = vec![vec![0u64; classes]; classes];
    for (&observed, predicted) in labels.iter().zip(top1(probs)?) {
        matrix[observed][predicted] += 1;
    }
    Ok(matrix)
}

/// Per-class top-1 accuracy; `None` for classes with no examples.
pub fn per_genre_accuracy(probs: &Tensor, labels: &[usize]) -> Result<Vec<Option<f64>>> {
    Ok(confusion_matrix(probs, labels)?
        .iter()
        .enumerate()
        .map(|(g, row)| {
            let support: u64 = row.iter().sum();
            (support > 0).then(|| row[g] as f64 / support as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn one_hot(predictions: &[usize], classes: usize) -> Tensor {
        let mut v = vec![0.0; predictions.len() * classes];
        for (r, &p) in predictions.iter().enumerate() {
            v[r * classes + p] = 1.0;
        }
        Tensor::new(&[predictions.len(), classes], v).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let labels = [0, 3, 14, 7];
        let probs = one_hot(&labels, 15);
        for k in 1..=15 {
            assert_eq!(top_k_accuracy(&probs, &labels, k).unwrap(), 1.0);
        }
        let m = confusion_matrix(&probs, &labels).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c, u64::from(i == j && labels.contains(&i)));
            }
        }
    }

    #[test]
    fn half_correct() {
        let probs = one_hot(&[1, 2, 0, 0], 4);
        assert_eq!(top_k_accuracy(&probs, &[1, 2, 3, 3], 1).unwrap(), 0.5);
    }

    #[test]
    fn k_equal_to_classes_is_always_one() {
        let probs = Tensor::new(&[2, 3], vec![0.2, 0.5, 0.3, 0.9, 0.05, 0.05]).unwrap();
        assert_eq!(top_k_accuracy(&probs, &[0, 2], 3).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_lengths_are_contract_errors() {
        let probs = one_hot(&[0, 1], 3);
        assert!(matches!(
            top_k_accuracy(&probs, &[0], 1),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            confusion_matrix(&probs, &[0, 3]),
            Err(Error::Label { .. })
        ));
    }

    #[test]
    fn unsupported_genre_is_undefined_not_zero() {
        let probs = one_hot(&[0, 0, 0], 15);
        let acc = per_genre_accuracy(&probs, &[0, 2, 2]).unwrap();
        assert_eq!(acc[0], Some(1.0));
        assert_eq!(acc[2], Some(0.0));
        assert_eq!(acc[1], None);
        assert!(acc[3..].iter().all(Option::is_none));
    }

    #[test]
    fn fighting_248_of_480() {
        let fighting = 2;
        let labels = vec![fighting; 480];
        let predictions: Vec<usize> = (0..480)
            .map(|i| if i < 248 { fighting } else { 3 })
            .collect();
        let probs = one_hot(&predictions, 15);
        let acc = per_genre_accuracy(&probs, &labels).unwrap()[fighting].unwrap();
        assert_eq!(acc, 248.0 / 480.0);
        assert!((acc * 100.0 - 51.7).abs() <= 0.05);
        assert_eq!(
            confusion_matrix(&probs, &labels).unwrap()[fighting][fighting],
            248
        );
    }

    proptest! {
        #[test]
        fn counting_identities(
            pairs in prop::collection::vec((0usize..15, 0usize..15), 1..300),
        ) {
            let (labels, predictions): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let probs = one_hot(&predictions, 15);
            let m = confusion_matrix(&probs, &labels).unwrap();
            let n = labels.len();
            let trace: u64 = (0..15).map(|i| m[i][i]).sum();
            let correct = labels.iter().zip(&predictions).filter(|(a, b)| a == b).count();
            prop_assert_eq!(trace as usize, correct);
            prop_assert_eq!(top_k_accuracy(&probs, &labels, 1).unwrap(), correct as f64 / n as f64);
            prop_assert_eq!(m.iter().flatten().sum::<u64>() as usize, n);
            for g in 0..15 {
                let support = labels.iter().filter(|&&l| l == g).count() as u64;
                let predicted = predictions.iter().filter(|&&p| p == g).count() as u64;
                prop_assert_eq!(m[g].iter().sum::<u64>(), support);
                prop_assert_eq!(m.iter().map(|r| r[g]).sum::<u64>(), predicted);
            }
        }

        #[test]
        fn accuracy_grows_with_k(
            values in prop::collection::vec(0.0f64..1.0, 60),
            labels in prop::collection::vec(0usize..6, 10),
        ) {
            let probs = Tensor::new(&[10, 6], values).unwrap();
            let mut last = 0.0;
            for k in 1..=6 {
                let acc = top_k_accuracy(&probs, &labels, k).unwrap();
                prop_assert!(acc >= last);
                last = acc;
            }
        }
    }
}
