use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl LabelCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

/// The six headline numbers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
}

impl Summary {
    pub fn mean(items: &[Summary]) -> Summary {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&Summary) -> f64| items.iter().map(f).sum::<f64>() / n;
        Summary {
            macro_precision: sum(|s| s.macro_precision),
            macro_recall: sum(|s| s.macro_recall),
            macro_f1: sum(|s| s.macro_f1),
            micro_precision: sum(|s| s.micro_precision),
            micro_recall: sum(|s| s.micro_recall),
            micro_f1: sum(|s| s.micro_f1),
        }
    }
}

/// Per-label counts with macro and micro averages. Empty denominators give
/// zero; macro averages run over every label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nodes: usize,
    pub labels: Vec<LabelCounts>,
    #[serde(flatten)]
    pub summary: Summary,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(
    predictions: &[Vec<bool>],
    truth: &[Vec<bool>],
    label_names: &[String],
) -> Result<MetricsReport, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::Shape(format!(
            "{} predictions for {} nodes",
            predictions.len(),
            truth.len()
        )));
    }
    let l = label_names.len();
    let mut labels: Vec<LabelCounts> = label_names
        .iter()
        .map(|name| LabelCounts {
            label: name.clone(),
            tp: 0,
            fp: 0,
            fn_: 0,
        })
        .collect();
    for (i, (p, t)) in predictions.iter().zip(truth).enumerate() {
        if p.len() != l || t.len() != l {
            return Err(EvalError::Shape(format!(
                "node {i} has {} predicted and {} true bits, expected {l}",
                p.len(),
                t.len()
            )));
        }
        for (c, (&pb, &tb)) in labels.iter_mut().zip(p.iter().zip(t)) {
            match (pb, tb) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let n = l.max(1) as f64;
    let (tp, fp, fn_) = labels
        .iter()
        .fold((0, 0, 0), |(a, b, c), x| (a + x.tp, b + x.fp, c + x.fn_));
    let micro_precision = ratio(tp, tp + fp);
    let micro_recall = ratio(tp, tp + fn_);
    let summary = Summary {
        macro_precision: labels.iter().map(LabelCounts::precision).sum::<f64>() / n,
        macro_recall: labels.iter().map(LabelCounts::recall).sum::<f64>() / n,
        macro_f1: labels.iter().map(LabelCounts::f1).sum::<f64>() / n,
        micro_precision,
        micro_recall,
        micro_f1: harmonic(micro_precision, micro_recall),
    };
    Ok(MetricsReport {
        nodes: truth.len(),
        labels,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("l{i}")).collect()
    }

    #[test]
    fn hand_example() {
        let truth = vec![vec![true, true], vec![false, true]];
        let pred = vec![vec![true, false], vec![true, true]];
        let r = compute_metrics(&pred, &truth, &names(2)).unwrap();
        let two_thirds = 2.0 / 3.0;
        for v in [
            r.summary.micro_precision,
            r.summary.micro_recall,
            r.summary.micro_f1,
            r.summary.macro_f1,
        ] {
            assert!((v - two_thirds).abs() < 1e-12, "{v}");
        }
        assert!((r.labels[0].f1() - two_thirds).abs() < 1e-12);
        assert!((r.labels[1].f1() - two_thirds).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let truth = vec![vec![true, false], vec![false, true]];
        let r = compute_metrics(&truth, &truth, &names(2)).unwrap();
        assert_eq!(r.summary.micro_f1, 1.0);
        assert_eq!(r.summary.macro_precision, 1.0);
        let empty = vec![vec![false; 2]; 2];
        let r = compute_metrics(&empty, &truth, &names(2)).unwrap();
        assert_eq!(r.summary, Summary::default());
    }

    #[test]
    fn shape_errors() {
        let t = vec![vec![true]];
        assert!(compute_metrics(&[], &t, &names(1)).is_err());
        assert!(compute_metrics(&[vec![true, false]], &t, &names(1)).is_err());
    }
}
