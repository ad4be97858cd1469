//! Learning-curve AUC, recognizer micro-F1 and multi-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Hit@1 as a function of annotation proportion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    points: Vec<(f64, f64)>,
}

impl LearningCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(domain("curve has non-finite coordinates"));
        }
        if points.first().is_some_and(|p| p.0 < 0.0) {
            return Err(domain("curve starts below x = 0"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(domain("curve x values must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Trapezoidal area under the curve from its first point to `x_max`,
/// divided by the integrated x-range. The last segment is clipped at
/// `x_max`; a curve ending before `x_max` is integrated up to its end.
pub fn auc_at(curve: &LearningCurve, x_max: f64) -> Result<f64> {
    let pts = curve.points();
    let mut poly: Vec<(f64, f64)> = Vec::new();
    for (k, &(x, y)) in pts.iter().enumerate() {
        if x <= x_max {
            poly.push((x, y));
            continue;
        }
        if k > 0 && pts[k - 1].0 < x_max {
            let (x0, y0) = pts[k - 1];
            let t = (x_max - x0) / (x - x0);
            poly.push((x_max, y0 + t * (y - y0)));
        }
        break;
    }
    if poly.len() < 2 {
        return Err(domain(format!("fewer than two curve points up to x = {x_max}")));
    }
    let area: f64 = poly
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    let span = poly.last().unwrap().0 - poly[0].0;
    Ok(area / span)
}

/// Micro-averaged F1 over the two classes. For single-label binary
/// decisions this is the fraction of correct predictions.
pub fn micro_f1(predictions: &[bool], truth: &[bool]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(domain("predictions and truth cover different entities"));
    }
    if truth.is_empty() {
        return Err(domain("micro-F1 of an empty set"));
    }
    // Summing TP/FP/FN over both classes: every mistake is one FP and one FN.
    let tp = predictions.iter().zip(truth).filter(|(p, t)| p == t).count() as f64;
    let wrong = truth.len() as f64 - tp;
    Ok(2.0 * tp / (2.0 * tp + 2.0 * wrong))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (n − 1); zero for a single run.
    pub sd: Vec<f64>,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Pointwise mean and standard deviation of curves on a shared x grid.
pub fn aggregate_runs(curves: &[LearningCurve]) -> Result<AggregateCurve> {
    let first = curves.first().ok_or_else(|| domain("no curves to aggregate"))?;
    let xs = first.xs();
    if curves.iter().any(|c| c.xs() != xs) {
        return Err(domain("curves have different x grids"));
    }
    let mut mean = Vec::with_capacity(xs.len());
    let mut sd = Vec::with_capacity(xs.len());
    for k in 0..xs.len() {
        let ys: Vec<f64> = curves.iter().map(|c| c.points()[k].1).collect();
        let (m, s) = mean_sd(&ys);
        mean.push(m);
        sd.push(s);
    }
    Ok(AggregateCurve { xs, mean, sd })
}
