//! Points, shapes, labels, and the box domain every oracle classifies over.
//!
//! A [`Point`] is a flat `f64` vector tagged with an image-style [`Shape`]
//! `(height, width, channels)`. Plain feature vectors use [`Shape::flat`].
//! Attacks never step outside the oracle's [`Domain`]: every probe is clipped
//! into the box `[lo, hi]^d` before it is sent to the oracle.

use serde::{Deserialize, Serialize};

/// Height × width × channels of the points an oracle accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape { height, width, channels }
    }

    /// Shape of a plain `d`-dimensional feature vector.
    pub fn flat(d: usize) -> Self {
        Shape { height: 1, width: d, channels: 1 }
    }

    /// Total number of scalar entries `d = h·w·c`.
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smaller of the two spatial extents, used to size frequency subspaces.
    pub fn min_side(&self) -> usize {
        self.height.min(self.width)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Opaque top-1 class index returned by an oracle. Only equality matters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub i64);

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Valid coordinate range `[lo, hi]`, the same for every coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const UNIT: Bounds = Bounds { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "bounds must satisfy lo < hi, got [{lo}, {hi}]");
        Bounds { lo, hi }
    }

    /// Per-coordinate extent `hi - lo`.
    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::UNIT
    }
}

/// The space an oracle classifies: a shape plus box bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub bounds: Bounds,
}

impl Domain {
    pub fn new(shape: Shape, bounds: Bounds) -> Self {
        Domain { shape, bounds }
    }

    pub fn unit(shape: Shape) -> Self {
        Domain { shape, bounds: Bounds::UNIT }
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    /// Euclidean diameter of the box, `(hi - lo)·√d`.
    pub fn diameter(&self) -> f64 {
        self.bounds.range() * (self.len() as f64).sqrt()
    }

    /// Returns `point` with every coordinate clamped into the box.
    pub fn clip(&self, point: &Point) -> Point {
        let values = point.values.iter().map(|&v| self.bounds.clamp(v)).collect();
        Point { shape: point.shape, values }
    }

    pub fn clip_in_place(&self, point: &mut Point) {
        for v in &mut point.values {
            *v = self.bounds.clamp(*v);
        }
    }

    pub fn contains(&self, point: &Point) -> bool {
        point.shape == self.shape
            && point.values.iter().all(|&v| v >= self.bounds.lo && v <= self.bounds.hi)
    }
}

/// A flat vector of intensities with its shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub shape: Shape,
    pub values: Vec<f64>,
}

impl Point {
    /// Panics if `values.len()` disagrees with `shape`; I/O paths validate
    /// lengths before constructing.
    pub fn new(shape: Shape, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            shape.len(),
            "point has {} values but shape {} needs {}",
            values.len(),
            shape,
            shape.len()
        );
        Point { shape, values }
    }

    pub fn flat(values: Vec<f64>) -> Self {
        let shape = Shape::flat(values.len());
        Point { shape, values }
    }

    pub fn zeros(shape: Shape) -> Self {
        Point { shape, values: vec![0.0; shape.len()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self + scale · direction`, without clipping.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Point {
        assert_eq!(direction.len(), self.values.len());
        let values = self
            .values
            .iter()
            .zip(direction)
            .map(|(&v, &d)| v + scale * d)
            .collect();
        Point { shape: self.shape, values }
    }

    /// Euclidean distance to another point of the same shape.
    pub fn l2_distance(&self, other: &Point) -> f64 {
        crate::vecmath::distance(&self.values, &other.values)
    }

    /// Perturbation vector `self - base`.
    pub fn perturbation_from(&self, base: &Point) -> Vec<f64> {
        assert_eq!(self.len(), base.len());
        self.values
            .iter()
            .zip(&base.values)
            .map(|(&a, &b)| a - b)
            .collect()
    }
}
