//! Two-class sphere oracle: inside vs. outside a ball. The curvature is
//! controlled by the radius, which makes it the standard smoke test for
//! boundary-following behavior beyond flat hyperplanes.

use crate::oracle::{check_shape, AnalyticBoundary, DecisionOracle, OracleError};
use crate::point::{Domain, Label, Point};
use crate::vecmath;

/// Label 0 inside `‖x - c‖ ≤ R`, label 1 outside.
#[derive(Clone, Debug)]
pub struct SphereOracle {
    center: Vec<f64>,
    radius: f64,
    domain: Domain,
}

impl SphereOracle {
    pub fn new(center: Vec<f64>, radius: f64, domain: Domain) -> Result<Self, OracleError> {
        if center.len() != domain.len() {
            return Err(OracleError::Format(format!(
                "sphere center has {} entries in a {}-dimensional domain",
                center.len(),
                domain.len()
            )));
        }
        if !(radius > 0.0) {
            return Err(OracleError::Format(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(SphereOracle {
            center,
            radius,
            domain,
        })
    }

    /// Center with every coordinate equal to `c`, as written in oracle spec
    /// strings (`sphere:c,R`).
    pub fn uniform_center(c: f64, radius: f64, domain: Domain) -> Result<Self, OracleError> {
        Self::new(vec![c; domain.len()], radius, domain)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn radial(&self, point: &Point) -> (Vec<f64>, f64) {
        let v = vecmath::sub(&point.values, &self.center);
        let r = vecmath::norm(&v);
        (v, r)
    }
}

impl DecisionOracle for SphereOracle {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        check_shape(self.domain.shape, point)?;
        let (_, r) = self.radial(point);
        Ok(if r <= self.radius { Label(0) } else { Label(1) })
    }
}

impl AnalyticBoundary for SphereOracle {
    fn boundary_normal(&self, point: &Point) -> Result<Vec<f64>, OracleError> {
        check_shape(self.domain.shape, point)?;
        let (v, r) = self.radial(point);
        if r == 0.0 {
            return Err(OracleError::Format(
                "boundary normal is undefined at the sphere center".into(),
            ));
        }
        let sign = if r <= self.radius { 1.0 } else { -1.0 };
        Ok(v.iter().map(|&x| sign * x / r).collect())
    }

    fn min_perturbation_norm(&self, point: &Point) -> Result<f64, OracleError> {
        check_shape(self.domain.shape, point)?;
        let (_, r) = self.radial(point);
        Ok((self.radius - r).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Shape;

    fn sphere() -> SphereOracle {
        SphereOracle::uniform_center(0.0, 1.0, Domain::unit(Shape::flat(3))).unwrap()
    }

    #[test]
    fn labels_split_at_the_radius() {
        let s = sphere();
        assert_eq!(s.classify(&Point::flat(vec![0.5, 0.0, 0.0])).unwrap(), Label(0));
        assert_eq!(s.classify(&Point::flat(vec![0.8, 0.8, 0.0])).unwrap(), Label(1));
        // The closed ball includes its surface.
        assert_eq!(s.classify(&Point::flat(vec![1.0, 0.0, 0.0])).unwrap(), Label(0));
    }

    #[test]
    fn inside_normal_points_outward() {
        let s = sphere();
        let p = Point::flat(vec![0.6, 0.0, 0.0]);
        let n = s.boundary_normal(&p).unwrap();
        assert!((n[0] - 1.0).abs() < 1e-12);
        assert!((s.min_perturbation_norm(&p).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn outside_normal_points_back_in() {
        let s = SphereOracle::uniform_center(0.0, 0.5, Domain::unit(Shape::flat(2))).unwrap();
        let p = Point::flat(vec![0.9, 0.0]);
        let n = s.boundary_normal(&p).unwrap();
        assert!((n[0] + 1.0).abs() < 1e-12);
        assert!((s.min_perturbation_norm(&p).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn center_has_no_normal() {
        let s = sphere();
        assert!(s.boundary_normal(&Point::flat(vec![0.0; 3])).is_err());
    }
}
