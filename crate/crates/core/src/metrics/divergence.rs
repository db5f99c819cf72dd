use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Bins per color channel of the joint RGB histogram.
pub const COLOR_BINS_PER_CHANNEL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Add one to every bin count before normalizing.
    #[default]
    AddOne,
    None,
}

/// `KL(P || Q)` in nats over two count vectors of equal length.
pub fn kl_divergence(p_counts: &[f64], q_counts: &[f64], smoothing: Smoothing) -> Result<f64> {
    if p_counts.len() != q_counts.len() {
        return Err(Error::DimensionMismatch {
            expected: p_counts.len(),
            got: q_counts.len(),
        });
    }
    if p_counts.is_empty() {
        return Err(Error::Precondition("KL over an empty support".into()));
    }
    if p_counts.iter().chain(q_counts).any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidInput(
            "histogram counts must be finite and non-negative".into(),
        ));
    }
    let bump = match smoothing {
        Smoothing::AddOne => 1.0,
        Smoothing::None => 0.0,
    };
    let p_total: f64 = p_counts.iter().map(|c| c + bump).sum();
    let q_total: f64 = q_counts.iter().map(|c| c + bump).sum();
    if p_total <= 0.0 || q_total <= 0.0 {
        return Err(Error::Precondition("histogram has no mass".into()));
    }
    let mut kl = 0.0;
    for (pc, qc) in p_counts.iter().zip(q_counts) {
        let p = (pc + bump) / p_total;
        if p == 0.0 {
            continue;
        }
        let q = (qc + bump) / q_total;
        if q == 0.0 {
            return Err(Error::InvalidInput(
                "reference distribution has zero mass where the first does not".into(),
            ));
        }
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

/// Joint 8×8×8 RGB histogram counts of a colored cloud.
pub fn color_histogram(cloud: &PointCloud) -> Result<Vec<f64>> {
    let colors = cloud
        .colors()
        .ok_or_else(|| Error::Precondition("color histogram needs a colored cloud".into()))?;
    let n = COLOR_BINS_PER_CHANNEL;
    let bin = |c: f64| ((c * n as f64).floor() as usize).min(n - 1);
    let mut counts = vec![0.0; n * n * n];
    for c in colors {
        counts[(bin(c[0]) * n + bin(c[1])) * n + bin(c[2])] += 1.0;
    }
    Ok(counts)
}

/// KL divergence between the color distributions of `a` (P) and `b` (Q),
/// Laplace-smoothed.
pub fn color_histogram_kl(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    kl_divergence(&color_histogram(a)?, &color_histogram(b)?, Smoothing::AddOne)
}

/// `KL(generated || reference)` over category counts sharing one universe.
pub fn category_kl(
    generated: &BTreeMap<String, f64>,
    reference: &BTreeMap<String, f64>,
    smoothing: Smoothing,
) -> Result<f64> {
    if !generated.keys().eq(reference.keys()) {
        return Err(Error::InvalidInput(
            "category histograms cover different category sets".into(),
        ));
    }
    let p: Vec<f64> = generated.values().copied().collect();
    let q: Vec<f64> = reference.values().copied().collect();
    kl_divergence(&p, &q, smoothing)
}

#[cfg(test)]
mod tests {
    use nalgebra::Point3;

    use super::*;

    fn colored(color: [f64; 3], n: usize) -> PointCloud {
        PointCloud::with_colors(
            (0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect(),
            vec![color; n],
        )
        .unwrap()
    }

    #[test]
    fn two_bin_closed_form() {
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5], Smoothing::None).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn identical_histograms_are_zero() {
        let c = colored([0.2, 0.4, 0.9], 20);
        assert_eq!(color_histogram_kl(&c, &c).unwrap(), 0.0);
        let h: BTreeMap<String, f64> = [("bed".to_string(), 3.0), ("cup".to_string(), 1.0)].into();
        assert_eq!(category_kl(&h, &h, Smoothing::AddOne).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_colors_are_positive() {
        let red = colored([1.0, 0.0, 0.0], 30);
        let blue = colored([0.0, 0.0, 1.0], 30);
        assert!(color_histogram_kl(&red, &blue).unwrap() > 0.0);
        let plain = PointCloud::from_xyz(&[[0.0; 3]]).unwrap();
        assert!(color_histogram_kl(&red, &plain).is_err());
    }

    #[test]
    fn category_closed_form_and_errors() {
        let p: BTreeMap<String, f64> = [("a".into(), 1.0), ("b".into(), 0.0)].into();
        let q: BTreeMap<String, f64> = [("a".into(), 0.5), ("b".into(), 0.5)].into();
        let kl = category_kl(&p, &q, Smoothing::None).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-12);
        let other: BTreeMap<String, f64> = [("a".into(), 1.0), ("c".into(), 1.0)].into();
        assert!(category_kl(&p, &other, Smoothing::AddOne).is_err());
    }

    #[test]
    fn unsmoothed_support_violation() {
        assert!(kl_divergence(&[1.0, 1.0], &[1.0, 0.0], Smoothing::None).is_err());
        assert!(kl_divergence(&[1.0, 1.0], &[1.0, 0.0], Smoothing::AddOne).is_ok());
    }
}
