//! Classification and ranking metrics.

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of clips whose top-scoring class is one of their labels.
pub fn accuracy(scores: &[Vec<f64>], labels: &[Vec<usize>]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| l.contains(&argmax(s)))
        .count();
    hits as f64 / scores.len() as f64
}

/// Average precision of a ranking: `Σ_k precision@k · rel(k) / n_positive`.
///
/// Items are ranked by descending score; equal scores keep their input
/// order. Returns `None` when there are no positives.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let positives = relevant.iter().filter(|&&r| r).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if relevant[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Per-class average precision and their mean over classes with positives.
pub fn mean_average_precision(
    scores: &[Vec<f64>],
    labels: &[Vec<usize>],
    classes: usize,
) -> (Option<f64>, Vec<Option<f64>>) {
    let per_class: Vec<Option<f64>> = (0..classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let rel: Vec<bool> = labels.iter().map(|l| l.contains(&c)).collect();
            average_precision(&s, &rel)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    (mean, per_class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.25; 4]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn uniform_scores_accuracy_depends_on_tie_break() {
        let scores = vec![vec![0.25; 4]];
        assert_eq!(accuracy(&scores, &[vec![0]]), 1.0);
        assert_eq!(accuracy(&scores, &[vec![2]]), 0.0);
        assert_eq!(accuracy(&scores, &[vec![3, 0]]), 1.0);
    }

    #[test]
    fn perfect_ranking_has_unit_ap() {
        assert_eq!(average_precision(&[0.9, 0.1], &[true, false]), Some(1.0));
        assert_eq!(
            average_precision(&[0.2, 0.9, 0.8], &[false, true, true]),
            Some(1.0)
        );
    }

    #[test]
    fn alternating_relevance() {
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn classes_without_positives_are_excluded() {
        let scores = vec![vec![0.7, 0.2, 0.1], vec![0.3, 0.6, 0.1]];
        let (map, per) = mean_average_precision(&scores, &[vec![0], vec![1]], 3);
        assert_eq!(per, vec![Some(1.0), Some(1.0), None]);
        assert_eq!(map, Some(1.0));
    }

    /// Enumerates precision at each hit directly from a sorted copy.
    fn ap_oracle(scores: &[f64], rel: &[bool]) -> Option<f64> {
        let mut pairs: Vec<(f64, usize, bool)> = scores
            .iter()
            .zip(rel)
            .enumerate()
            .map(|(i, (&s, &r))| (s, i, r))
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let n_pos = rel.iter().filter(|&&r| r).count();
        if n_pos == 0 {
            return None;
        }
        let mut total = 0.0;
        for k in 0..pairs.len() {
            if pairs[k].2 {
                let hits_in_top_k = pairs[..=k].iter().filter(|p| p.2).count();
                total += hits_in_top_k as f64 / (k + 1) as f64;
            }
        }
        Some(total / n_pos as f64)
    }

    proptest! {
        #[test]
        fn ap_matches_enumeration(items in prop::collection::vec((0u8..6, any::<bool>()), 1..30)) {
            let scores: Vec<f64> = items.iter().map(|(s, _)| *s as f64).collect();
            let rel: Vec<bool> = items.iter().map(|(_, r)| *r).collect();
            let got = average_precision(&scores, &rel);
            let want = ap_oracle(&scores, &rel);
            match (got, want) {
                (Some(a), Some(b)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!((0.0..=1.0).contains(&a));
                }
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }
}
