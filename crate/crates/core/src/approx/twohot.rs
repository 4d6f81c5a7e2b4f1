use std::sync::Arc;

use crate::error::{Error, Result};

/// Strictly increasing bucket centres of the categorical value head.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins(Arc<[f64]>);

impl Bins {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("need at least two bins"));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bins must be finite and strictly increasing"));
        }
        Ok(Self(values.into()))
    }

    /// `count` evenly spaced centres from `low` to `high` inclusive.
    pub fn linear(count: usize, low: f64, high: f64) -> Result<Self> {
        if count < 2 || !(low < high) {
            return Err(Error::invalid(format!(
                "bad bin layout: {count} bins over [{low}, {high}]"
            )));
        }
        let step = (high - low) / (count - 1) as f64;
        let mut values: Vec<f64> = (0..count).map(|i| low + step * i as f64).collect();
        values[count - 1] = high;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn low(&self) -> f64 {
        self.0[0]
    }

    pub fn high(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// Weights over [`Bins`]; the critic's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution {
    pub bins: Bins,
    pub weights: Vec<f64>,
}

impl ValueDistribution {
    pub fn new(bins: Bins, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != bins.len() {
            return Err(Error::Shape {
                context: "value distribution",
                expected: bins.len(),
                actual: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("value distribution weights are not on the simplex"));
        }
        Ok(Self { bins, weights })
    }

    pub fn expected_value(&self) -> f64 {
        expected_value(self.bins.values(), &self.weights)
    }
}

pub fn expected_value(bins: &[f64], weights: &[f64]) -> f64 {
    bins.iter().zip(weights).map(|(b, w)| b * w).sum()
}

/// Two-hot encoding of `x`: all mass on the two adjacent bins bracketing it,
/// split so that the expected bin value equals `x`. Values outside the bin
/// range are clamped first.
pub fn two_hot_encode(x: f64, bins: &Bins) -> Vec<f64> {
    let b = bins.values();
    let n = b.len();
    let mut out = vec![0.0; n];
    let x = x.clamp(b[0], b[n - 1]);
    // m: last index with b[m] <= x
    let m = b.partition_point(|&v| v <= x) - 1;
    if m == n - 1 || b[m] == x {
        out[m] = 1.0;
        return out;
    }
    let width = b[m + 1] - b[m];
    out[m] = (b[m + 1] - x).abs() / width;
    out[m + 1] = (b[m] - x).abs() / width;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let bins = Bins::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(two_hot_encode(0.75, &bins), vec![0.25, 0.75, 0.0]);
        assert_eq!(two_hot_encode(1.0, &bins), vec![0.0, 1.0, 0.0]);
        assert_eq!(two_hot_encode(3.7, &bins), vec![0.0, 0.0, 1.0]);
        assert_eq!(two_hot_encode(-2.0, &bins), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn expectations() {
        let bins = Bins::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let uniform = ValueDistribution::new(bins, vec![1.0 / 3.0; 3]).unwrap();
        assert!(uniform.expected_value().abs() < 1e-15);
        assert_eq!(expected_value(&[0.0, 1.0, 2.0], &[0.25, 0.75, 0.0]), 0.75);
    }

    #[test]
    fn linear_layout() {
        let bins = Bins::linear(41, -5.0, 5.0).unwrap();
        assert_eq!(bins.len(), 41);
        assert_eq!(bins.low(), -5.0);
        assert_eq!(bins.high(), 5.0);
        assert!((bins.values()[20]).abs() < 1e-12);
        assert!(Bins::new(vec![0.0, 0.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn round_trip_and_support(x in -6.0f64..6.0) {
            let bins = Bins::linear(41, -5.0, 5.0).unwrap();
            let w = two_hot_encode(x, &bins);
            let nonzero: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
            proptest::prop_assert!(nonzero.len() <= 2);
            if nonzero.len() == 2 {
                proptest::prop_assert_eq!(nonzero[1], nonzero[0] + 1);
            }
            proptest::prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let clamped = x.clamp(-5.0, 5.0);
            proptest::prop_assert!((expected_value(bins.values(), &w) - clamped).abs() <= 1e-9);
        }
    }
}
