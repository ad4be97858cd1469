//! Per-entity uncertainty acquisition functions over matching scores.
//!
//! The top-2 margin works on raw scores. Entropy, least confidence and the
//! probability margin work on rows normalized by a temperature softmax. BALD
//! and the standard-deviation measure need several stochastic scorings.

use ndarray::Array2;

use crate::acquisition::{AcquisitionVector, RankOrder};
use crate::dataset::EntityId;
use crate::error::{config, domain, Result};
use crate::model::ScoreMatrix;

/// Categorical distribution over a row's target candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityRow {
    pub entity: EntityId,
    pub probs: Vec<f64>,
}

impl ProbabilityRow {
    pub fn new(entity: EntityId, probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(domain(format!("row for {entity} has a negative or non-finite probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(domain(format!("row for {entity} sums to {total}")));
        }
        Ok(Self { entity, probs })
    }
}

fn top_two(row: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for v in row {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second)
}

fn require_width(width: usize) -> Result<()> {
    if width < 2 {
        return Err(domain("margin needs at least two target candidates"));
    }
    Ok(())
}

/// f^u(e¹) = −(top1 − top2) on raw scores; larger is more uncertain.
pub fn margin_uncertainty(scores: &ScoreMatrix) -> Result<AcquisitionVector> {
    require_width(scores.cols().len())?;
    AcquisitionVector::new(scores.rows().iter().enumerate().map(|(i, &e)| {
        let (a, b) = top_two(scores.row(i).iter().copied());
        (e, -(a - b))
    }))
}

/// Row-wise softmax of `score / temperature`, max-shifted for stability.
pub fn scores_to_probs(scores: &ScoreMatrix, temperature: f64) -> Result<Vec<ProbabilityRow>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(config(format!("temperature {temperature} must be positive")));
    }
    scores
        .rows()
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let row = scores.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&s| ((s - max) / temperature).exp()).collect();
            let z: f64 = exps.iter().sum();
            Ok(ProbabilityRow {
                entity: e,
                probs: exps.into_iter().map(|x| x / z).collect(),
            })
        })
        .collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// H(p) = −Σ pᵢ ln pᵢ with 0·ln 0 = 0.
pub fn entropy_uncertainty(rows: &[ProbabilityRow]) -> Result<AcquisitionVector> {
    AcquisitionVector::new(rows.iter().map(|r| (r.entity, entropy(&r.probs))))
}

/// 1 − max p.
pub fn least_confidence(rows: &[ProbabilityRow]) -> Result<AcquisitionVector> {
    AcquisitionVector::new(
        rows.iter()
            .map(|r| (r.entity, 1.0 - r.probs.iter().copied().fold(0.0, f64::max))),
    )
}

pub enum MarginInput<'a> {
    Probabilities(&'a [ProbabilityRow]),
    Scores(&'a ScoreMatrix),
}

/// top1 − top2 in probability or raw-score form. Small means uncertain, so
/// the vector is tagged [`RankOrder::LowerFirst`].
pub fn smallest_margin(input: MarginInput<'_>) -> Result<AcquisitionVector> {
    let v = match input {
        MarginInput::Probabilities(rows) => {
            for r in rows {
                require_width(r.probs.len())?;
            }
            AcquisitionVector::new(rows.iter().map(|r| {
                let (a, b) = top_two(r.probs.iter().copied());
                (r.entity, a - b)
            }))?
        }
        MarginInput::Scores(s) => {
            require_width(s.cols().len())?;
            AcquisitionVector::new(s.rows().iter().enumerate().map(|(i, &e)| {
                let (a, b) = top_two(s.row(i).iter().copied());
                (e, a - b)
            }))?
        }
    };
    Ok(v.with_order(RankOrder::LowerFirst))
}

/// Element-wise mean of equally shaped score matrices.
pub fn expected_scores(samples: &[ScoreMatrix]) -> Result<ScoreMatrix> {
    let first = samples.first().ok_or_else(|| domain("no score samples"))?;
    let mut sum = Array2::<f64>::zeros(first.values().raw_dim());
    for s in samples {
        if s.rows() != first.rows() || s.cols() != first.cols() {
            return Err(domain("score samples have different shapes"));
        }
        sum += s.values();
    }
    sum.mapv_inplace(|x| x / samples.len() as f64);
    Ok(ScoreMatrix::new(first.rows().to_vec(), first.cols().to_vec(), sum))
}

/// Checks that every sample covers the same rows with the same widths.
fn check_samples(samples: &[Vec<ProbabilityRow>]) -> Result<()> {
    if samples.len() < 2 {
        return Err(config("at least two probability samples are required"));
    }
    let first = &samples[0];
    for s in &samples[1..] {
        if s.len() != first.len()
            || s.iter()
                .zip(first)
                .any(|(a, b)| a.entity != b.entity || a.probs.len() != b.probs.len())
        {
            return Err(domain("probability samples cover different candidates"));
        }
    }
    Ok(())
}

/// Mean distribution across samples for row `i`.
fn mean_row(samples: &[Vec<ProbabilityRow>], i: usize) -> Vec<f64> {
    let width = samples[0][i].probs.len();
    let mut m = vec![0.0; width];
    for s in samples {
        for (a, &p) in m.iter_mut().zip(&s[i].probs) {
            *a += p;
        }
    }
    let t = samples.len() as f64;
    m.iter_mut().for_each(|x| *x /= t);
    m
}

/// Mutual information: H(mean p) − mean H(p).
pub fn bald(samples: &[Vec<ProbabilityRow>]) -> Result<AcquisitionVector> {
    check_samples(samples)?;
    let t = samples.len() as f64;
    AcquisitionVector::new((0..samples[0].len()).map(|i| {
        let total = entropy(&mean_row(samples, i));
        let expected = samples.iter().map(|s| entropy(&s[i].probs)).sum::<f64>() / t;
        // Jensen guarantees ≥ 0; clamp rounding noise.
        (samples[0][i].entity, (total - expected).max(0.0))
    }))
}

/// Mean over candidates of the per-candidate standard deviation across
/// samples, σᵢ = sqrt(E[pᵢ²] − E[pᵢ]²).
pub fn std_dev_uncertainty(samples: &[Vec<ProbabilityRow>]) -> Result<AcquisitionVector> {
    check_samples(samples)?;
    let t = samples.len() as f64;
    AcquisitionVector::new((0..samples[0].len()).map(|i| {
        let mean = mean_row(samples, i);
        let width = mean.len();
        let mut total = 0.0;
        for (k, &m) in mean.iter().enumerate() {
            let sq = samples.iter().map(|s| s[i].probs[k] * s[i].probs[k]).sum::<f64>() / t;
            total += (sq - m * m).max(0.0).sqrt();
        }
        let f = if width == 0 { 0.0 } else { total / width as f64 };
        (samples[0][i].entity, f)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(values: Array2<f64>) -> ScoreMatrix {
        let rows = (0..values.nrows() as u32).map(EntityId).collect();
        let cols = (0..values.ncols() as u32).map(EntityId).collect();
        ScoreMatrix::new(rows, cols, values)
    }

    fn row(p: &[f64]) -> ProbabilityRow {
        ProbabilityRow::new(EntityId(0), p.to_vec()).unwrap()
    }

    #[test]
    fn margin_examples() {
        let m = margin_uncertainty(&matrix(array![[5.0, 5.0, 1.0]])).unwrap();
        assert_eq!(m.values(), &[0.0]);
        let m = margin_uncertainty(&matrix(array![[3.0, 1.0]])).unwrap();
        assert_eq!(m.values(), &[-2.0]);
        assert!(margin_uncertainty(&matrix(array![[1.0], [2.0]])).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = scores_to_probs(&matrix(array![[2.0, 2.0, 2.0, 2.0]]), 1.0).unwrap();
        assert!(p[0].probs.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let p = scores_to_probs(&matrix(array![[0.0, 1e4]]), 1.0).unwrap();
        assert!((p[0].probs[1] - 1.0).abs() < 1e-12);
        let p = scores_to_probs(&matrix(array![[1.0, 2.0, 3.0]]), 1.0).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (k, s) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((p[0].probs[k] - s.exp() / z).abs() < 1e-12);
        }
        assert!(scores_to_probs(&matrix(array![[1.0, 2.0]]), 0.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        let e = entropy_uncertainty(&[row(&[0.0, 1.0, 0.0])]).unwrap();
        assert_eq!(e.values(), &[0.0]);
        let e = entropy_uncertainty(&[row(&[0.25; 4])]).unwrap();
        assert!((e.values()[0] - 4f64.ln()).abs() < 1e-12);
        let e = entropy_uncertainty(&[row(&[0.5, 0.25, 0.25])]).unwrap();
        assert!((e.values()[0] - 1.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn least_confidence_examples() {
        assert_eq!(least_confidence(&[row(&[1.0, 0.0])]).unwrap().values(), &[0.0]);
        assert_eq!(least_confidence(&[row(&[0.25; 4])]).unwrap().values(), &[0.75]);
        let v = least_confidence(&[row(&[0.6, 0.3, 0.1])]).unwrap().values()[0];
        assert!((v - 0.4).abs() < 1e-12);
    }

    #[test]
    fn smallest_margin_examples() {
        let v = smallest_margin(MarginInput::Probabilities(&[row(&[0.4, 0.4, 0.2])])).unwrap();
        assert_eq!(v.values(), &[0.0]);
        assert_eq!(v.order(), RankOrder::LowerFirst);
        let v = smallest_margin(MarginInput::Probabilities(&[row(&[0.7, 0.2, 0.1])])).unwrap();
        assert!((v.values()[0] - 0.5).abs() < 1e-12);
        assert!(smallest_margin(MarginInput::Probabilities(&[row(&[1.0])])).is_err());
        let m = matrix(array![[0.3, -1.0, 2.0], [4.0, 4.0, 0.0]]);
        let sm = smallest_margin(MarginInput::Scores(&m)).unwrap();
        let mu = margin_uncertainty(&m).unwrap();
        for (a, b) in sm.values().iter().zip(mu.values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn expected_scores_examples() {
        let x = matrix(array![[1.0, -2.0], [0.5, 3.0]]);
        assert_eq!(expected_scores(std::slice::from_ref(&x)).unwrap(), x);
        let neg = matrix(-x.values().clone());
        let z = expected_scores(&[x.clone(), neg]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let wide = matrix(array![[1.0, 2.0, 3.0]]);
        assert!(expected_scores(&[x, wide]).is_err());
        assert!(expected_scores(&[]).is_err());
    }

    #[test]
    fn bald_examples() {
        let s = vec![vec![row(&[0.3, 0.7])], vec![row(&[0.3, 0.7])]];
        assert!(bald(&s).unwrap().values()[0].abs() < 1e-15);
        let s = vec![vec![row(&[1.0, 0.0])], vec![row(&[0.0, 1.0])]];
        assert!((bald(&s).unwrap().values()[0] - 2f64.ln()).abs() < 1e-12);
        let bad = vec![vec![row(&[1.0, 0.0])], vec![row(&[0.5, 0.25, 0.25])]];
        assert!(bald(&bad).is_err());
        assert!(bald(&s[..1]).is_err());
    }

    #[test]
    fn std_dev_examples() {
        let s = vec![vec![row(&[0.3, 0.7])], vec![row(&[0.3, 0.7])]];
        assert!(std_dev_uncertainty(&s).unwrap().values()[0].abs() < 1e-15);
        // Both candidates flip between 0 and 1: σ = 0.5 each.
        let s = vec![vec![row(&[1.0, 0.0])], vec![row(&[0.0, 1.0])]];
        assert!((std_dev_uncertainty(&s).unwrap().values()[0] - 0.5).abs() < 1e-15);
    }
}
