//! Regression, ROC/AUC and classification metrics plus paired significance tests.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the truth is constant and the fit is not exact.
    pub r2: Option<f64>,
}

pub fn regression_report(pred: &[f64], truth: &[f64]) -> Result<RegressionReport> {
    check_pair(pred.len(), truth.len())?;
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let (mut abs, mut ss_res, mut ss_tot) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(truth) {
        abs += (p - t).abs();
        ss_res += (p - t) * (p - t);
        ss_tot += (t - mean) * (t - mean);
    }
    let mse = ss_res / n;
    let r2 = if ss_tot > 0.0 {
        Some(1.0 - ss_res / ss_tot)
    } else if ss_res == 0.0 {
        Some(1.0)
    } else {
        None
    };
    Ok(RegressionReport {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
        r2,
    })
}

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(a, b));
    }
    if a == 0 {
        return Err(Error::invalid("empty input"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Area under the step path by the trapezoid rule.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok((pos, neg))
}

/// Midranks (1-based) of `values`, ties sharing their average rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// ROC curve and AUC; the AUC is the Mann-Whitney statistic with half credit for ties.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    check_pair(scores.len(), labels.len())?;
    let (pos, neg) = class_counts(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }

    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let auc = (rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64;

    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Binary classification report. Precision (and so F1) is 0 when nothing is predicted positive.
pub fn classification_report(pred: &[u8], labels: &[u8]) -> Result<ClassificationReport> {
    check_pair(pred.len(), labels.len())?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fn_ += 1,
            _ => return Err(Error::invalid("labels must be 0 or 1")),
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassificationReport {
        accuracy: ratio(tp + tn, pred.len()),
        precision,
        recall,
        f1,
        tp,
        fp,
        tn,
        fn_,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Paired two-sided t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_pair(a.len(), b.len())?;
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest { t: mean.signum() * f64::INFINITY, df, p: 0.0 }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let p = student_t_two_sided(t, df);
    Ok(TTest { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeLong {
    pub auc_a: f64,
    pub auc_b: f64,
    pub z: f64,
    /// Two-sided.
    pub p: f64,
}

/// DeLong's test for two correlated AUCs computed on the same samples.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[u8]) -> Result<DeLong> {
    check_pair(scores_a.len(), labels.len())?;
    check_pair(scores_b.len(), labels.len())?;
    let (m, n) = class_counts(labels)?;

    // Structural components: V10 over positives, V01 over negatives.
    let components = |scores: &[f64]| {
        let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(s, _)| *s).collect();
        let psi = |x: f64, y: f64| {
            if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            }
        };
        let v10: Vec<f64> = pos.iter().map(|&x| neg.iter().map(|&y| psi(x, y)).sum::<f64>() / n as f64).collect();
        let v01: Vec<f64> = neg.iter().map(|&y| pos.iter().map(|&x| psi(x, y)).sum::<f64>() / m as f64).collect();
        let auc = v10.iter().sum::<f64>() / m as f64;
        (auc, v10, v01)
    };
    let (auc_a, v10a, v01a) = components(scores_a);
    let (auc_b, v10b, v01b) = components(scores_b);

    let cov = |x: &[f64], y: &[f64], mx: f64, my: f64| {
        let k = x.len();
        if k < 2 {
            return 0.0;
        }
        x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / (k - 1) as f64
    };
    let s10 = cov(&v10a, &v10a, auc_a, auc_a) + cov(&v10b, &v10b, auc_b, auc_b)
        - 2.0 * cov(&v10a, &v10b, auc_a, auc_b);
    let s01 = cov(&v01a, &v01a, auc_a, auc_a) + cov(&v01b, &v01b, auc_b, auc_b)
        - 2.0 * cov(&v01a, &v01b, auc_a, auc_b);
    let var = s10 / m as f64 + s01 / n as f64;
    let diff = auc_a - auc_b;

    if var <= 1e-15 {
        let (z, p) = if diff.abs() < 1e-15 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(DeLong { auc_a, auc_b, z, p });
    }
    let z = diff / var.sqrt();
    let p = (2.0 * Normal::standard().sf(z.abs())).min(1.0);
    Ok(DeLong { auc_a, auc_b, z, p })
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df` degrees
/// of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Number of scores at or above `threshold`.
pub fn positives_at(scores: &[f64], threshold: f64) -> usize {
    scores.iter().filter(|&&s| s >= threshold).count()
}
