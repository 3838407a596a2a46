//! Perturbation-size metrics and the medians the benchmark reports.
//!
//! The headline benchmark number for a set of attacked images is the median
//! over images of the mean squared perturbation `(1/d)·‖v‖₂²`, where `d` is
//! the full pixel count `h·w·c` of the image and `v` the final perturbation.

use thiserror::Error;

use crate::point::Point;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metric over zero-length input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in metric input")]
    NonFinite,
}

/// Mean squared perturbation `(1/d)·‖a - b‖₂²` between two points.
pub fn mean_squared_perturbation(a: &Point, b: &Point) -> Result<f64, MetricsError> {
    mse_of_diff(&a.values, &b.values)
}

/// Mean squared perturbation from the raw vectors.
pub fn mse_of_diff(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sq: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(sq / a.len() as f64)
}

/// `(1/d)·‖v‖₂²` of a perturbation vector itself.
pub fn mse_of_perturbation(v: &[f64]) -> Result<f64, MetricsError> {
    if v.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(v.iter().map(|&x| x * x).sum::<f64>() / v.len() as f64)
}

/// Median with the even-length convention: mean of the two central values.
pub fn median(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok(0.5 * (sorted[n / 2 - 1] + sorted[n / 2]))
    }
}

/// Median over images of the mean squared perturbation, from one final
/// perturbation vector per image.
pub fn median_mse(perturbations: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if perturbations.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mses = perturbations
        .iter()
        .map(|v| mse_of_perturbation(v))
        .collect::<Result<Vec<_>, _>>()?;
    median(&mses)
}
