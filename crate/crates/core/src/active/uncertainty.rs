use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-6;

fn check_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Validation("empty probability vector".into()));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Validation(format!("invalid probabilities {probs:?}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::Validation(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    Ok(-probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>())
}

/// Difference between the two largest probabilities (1 for one class).
pub fn margin(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    let (mut first, mut second) = (f64::NEG_INFINITY, 0.0);
    for &p in probs {
        if p > first {
            second = first.max(0.0);
            first = p;
        } else if p > second {
            second = p;
        }
    }
    Ok(first - second)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMeasure {
    #[default]
    Entropy,
    Margin,
}

impl UncertaintyMeasure {
    /// Larger means more uncertain.
    pub fn score(self, probs: &[f64]) -> Result<f64> {
        match self {
            UncertaintyMeasure::Entropy => entropy(probs),
            UncertaintyMeasure::Margin => margin(probs).map(|m| 1.0 - m),
        }
    }
}

impl std::str::FromStr for UncertaintyMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(UncertaintyMeasure::Entropy),
            "margin" => Ok(UncertaintyMeasure::Margin),
            other => Err(Error::Validation(format!("unknown uncertainty measure {other:?}"))),
        }
    }
}
