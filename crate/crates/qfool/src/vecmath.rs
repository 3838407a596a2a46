//! Small dense-vector helpers used throughout the attack loops.

/// Dot product; panics on length mismatch.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot on vectors of different lengths");
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two equal-length vectors.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "distance on vectors of different lengths");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "sub on vectors of different lengths");
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `acc += scale · v`, in place.
pub fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    assert_eq!(acc.len(), v.len(), "axpy on vectors of different lengths");
    for (a, &x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

/// Returns `a / ||a||`, or `None` when the norm is exactly zero.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 {
        return None;
    }
    Some(a.iter().map(|&x| x / n).collect())
}

/// Cosine of the angle between two vectors; zero vectors give `None`.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_norm_distance() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(distance(&[1.0, 1.0], &[4.0, 5.0]), 5.0);
    }

    #[test]
    fn normalized_unit_length() {
        let v = normalized(&[3.0, 4.0]).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        assert!(normalized(&[0.0, 0.0]).is_none());
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        let c = cosine(&[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!(c.abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]), Some(1.0));
    }
}
