use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Video-level binary metrics, deceptive as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub n_videos: usize,
    pub n_scored: usize,
    pub n_abstained: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `pairs` holds (prediction, truth) per test video; `None` is an abstention
/// and is excluded from every rate but counted in `n_abstained`.
pub fn evaluate(pairs: &[(Option<Label>, Label)]) -> Result<Metrics> {
    let (mut tp, mut fp, mut fn_, mut tn, mut abstained) = (0, 0, 0, 0, 0);
    for &(pred, truth) in pairs {
        match (pred, truth) {
            (None, _) => abstained += 1,
            (Some(Label::Deceptive), Label::Deceptive) => tp += 1,
            (Some(Label::Deceptive), Label::Truthful) => fp += 1,
            (Some(Label::Truthful), Label::Deceptive) => fn_ += 1,
            (Some(Label::Truthful), Label::Truthful) => tn += 1,
        }
    }
    let scored = tp + fp + fn_ + tn;
    if scored == 0 {
        return Err(Error::data("no scored videos to evaluate"));
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(tp + tn, scored),
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
        tn,
        n_videos: pairs.len(),
        n_scored: scored,
        n_abstained: abstained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Deceptive as D, Truthful as T};

    fn confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> Vec<(Option<Label>, Label)> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat_n((Some(D), D), tp));
        v.extend(std::iter::repeat_n((Some(D), T), fp));
        v.extend(std::iter::repeat_n((Some(T), D), fn_));
        v.extend(std::iter::repeat_n((Some(T), T), tn));
        v
    }

    #[test]
    fn confusion_oracle() {
        let m = evaluate(&confusion(3, 1, 2, 4)).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn empty_denominators_and_abstentions() {
        let m = evaluate(&confusion(0, 0, 0, 5)).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (0.0, 0.0, 0.0, 1.0));
        let mut pairs = confusion(1, 0, 0, 1);
        pairs.push((None, D));
        let m = evaluate(&pairs).unwrap();
        assert_eq!((m.n_videos, m.n_scored, m.n_abstained), (3, 2, 1));
        assert!(matches!(evaluate(&[(None, D)]), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn counts_partition(pairs in proptest::collection::vec(
            (proptest::option::of(any::<bool>()), any::<bool>()), 1..60)) {
            let to = |b: bool| if b { D } else { T };
            let pairs: Vec<_> = pairs.into_iter().map(|(p, t)| (p.map(to), to(t))).collect();
            match evaluate(&pairs) {
                Ok(m) => {
                    prop_assert_eq!(m.tp + m.fp + m.fn_ + m.tn, m.n_scored);
                    prop_assert_eq!(m.n_scored + m.n_abstained, m.n_videos);
                    for r in [m.accuracy, m.precision, m.recall, m.f1] {
                        prop_assert!((0.0..=1.0).contains(&r));
                    }
                }
                Err(_) => prop_assert!(pairs.iter().all(|p| p.0.is_none())),
            }
        }
    }
}
