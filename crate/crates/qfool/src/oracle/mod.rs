//! Decision oracles: top-1 label access and nothing else.
//!
//! Attacks see a model only through [`DecisionOracle::classify`]. Analytic
//! oracles (affine, sphere) additionally expose closed-form boundary geometry
//! through [`AnalyticBoundary`] — strictly for tests and diagnostics; no
//! attack code path may touch it.
//!
//! Wrappers compose: `CountingOracle(CacheOracle(inner))` bills repeated
//! queries against the ledger (the default accounting), while
//! `CacheOracle(CountingOracle(inner))` makes cache hits free.

mod affine;
mod http;
mod mlp;
mod sphere;

pub use affine::AffineMulticlassOracle;
pub use http::{HttpOracle, HttpOracleConfig};
pub use mlp::MlpOracle;
pub use sphere::SphereOracle;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::ledger::{Phase, QueryLedger};
use crate::point::{Domain, Label, Point, Shape};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("point shape {got} does not match oracle shape {expected}")]
    ShapeMismatch { expected: Shape, got: Shape },
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch element {index} failed: {source}")]
    BatchElement {
        index: usize,
        #[source]
        source: Box<OracleError>,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed oracle definition: {0}")]
    Format(String),
    #[error("transport failure talking to remote oracle: {0}")]
    Transport(String),
    #[error("remote oracle protocol violation: {0}")]
    Protocol(String),
    #[error("remote oracle still failing after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("{0} does not expose analytic boundary geometry")]
    NoAnalyticGeometry(&'static str),
}

/// Black-box top-1 classifier over a box domain.
pub trait DecisionOracle: Send + Sync {
    fn domain(&self) -> Domain;

    /// Top-1 label of `point`. Total on the box; callers clip first.
    fn classify(&self, point: &Point) -> Result<Label, OracleError>;

    /// Labels for a batch, in input order. Implementations may parallelize
    /// internally but the output order and any error reported must be
    /// deterministic (first failing index wins).
    fn classify_batch(&self, points: &[Point]) -> Result<Vec<Label>, OracleError> {
        if points.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        points
            .iter()
            .enumerate()
            .map(|(index, p)| {
                self.classify(p).map_err(|source| OracleError::BatchElement {
                    index,
                    source: Box::new(source),
                })
            })
            .collect()
    }

    /// Whether `classify_batch` is anything smarter than a sequential loop.
    fn supports_batch(&self) -> bool {
        false
    }
}

impl<T: DecisionOracle + ?Sized> DecisionOracle for &T {
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        (**self).classify(point)
    }
    fn classify_batch(&self, points: &[Point]) -> Result<Vec<Label>, OracleError> {
        (**self).classify_batch(points)
    }
    fn supports_batch(&self) -> bool {
        (**self).supports_batch()
    }
}

impl<T: DecisionOracle + ?Sized> DecisionOracle for Box<T> {
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        (**self).classify(point)
    }
    fn classify_batch(&self, points: &[Point]) -> Result<Vec<Label>, OracleError> {
        (**self).classify_batch(points)
    }
    fn supports_batch(&self) -> bool {
        (**self).supports_batch()
    }
}

/// Closed-form boundary geometry for analytic oracles. Test-side ground
/// truth only — attack loops must never call this.
pub trait AnalyticBoundary: DecisionOracle {
    /// Unit direction at `point` that leaves the current class fastest.
    fn boundary_normal(&self, point: &Point) -> Result<Vec<f64>, OracleError>;

    /// Euclidean distance from `point` to the nearest decision boundary,
    /// ignoring box constraints.
    fn min_perturbation_norm(&self, point: &Point) -> Result<f64, OracleError>;
}

/// Ground-truth gradient direction of an analytic oracle at `point`.
pub fn true_gradient(
    oracle: &dyn AnalyticBoundary,
    point: &Point,
) -> Result<Vec<f64>, OracleError> {
    oracle.boundary_normal(point)
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_shape(expected: Shape, point: &Point) -> Result<(), OracleError> {
    if point.shape != expected {
        return Err(OracleError::ShapeMismatch {
            expected,
            got: point.shape,
        });
    }
    Ok(())
}

/// Wrapper that records every classify attempt in a [`QueryLedger`].
pub struct CountingOracle<O> {
    inner: O,
    ledger: Arc<QueryLedger>,
}

impl<O: DecisionOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            ledger: Arc::new(QueryLedger::new(u64::MAX)),
        }
    }

    pub fn with_ledger(inner: O, ledger: Arc<QueryLedger>) -> Self {
        CountingOracle { inner, ledger }
    }

    pub fn ledger(&self) -> &Arc<QueryLedger> {
        &self.ledger
    }

    pub fn count(&self) -> u64 {
        self.ledger.used()
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: DecisionOracle> DecisionOracle for CountingOracle<O> {
    fn domain(&self) -> Domain {
        self.inner.domain()
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        self.ledger.record(Phase::Other, 1);
        self.inner.classify(point)
    }

    fn classify_batch(&self, points: &[Point]) -> Result<Vec<Label>, OracleError> {
        if points.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        self.ledger.record(Phase::Other, points.len() as u64);
        self.inner.classify_batch(points)
    }

    fn supports_batch(&self) -> bool {
        self.inner.supports_batch()
    }
}

/// Memoizes labels by exact bit pattern. Never changes a label; composition
/// order with [`CountingOracle`] decides whether repeat queries are billed.
pub struct CacheOracle<O> {
    inner: O,
    cache: Mutex<HashMap<Vec<u64>, Label>>,
}

impl<O: DecisionOracle> CacheOracle<O> {
    pub fn new(inner: O) -> Self {
        CacheOracle {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_points(&self) -> usize {
        self.cache.lock().expect("cache lock poisoned").len()
    }

    fn key(point: &Point) -> Vec<u64> {
        point.values.iter().map(|v| v.to_bits()).collect()
    }
}

impl<O: DecisionOracle> DecisionOracle for CacheOracle<O> {
    fn domain(&self) -> Domain {
        self.inner.domain()
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        let key = Self::key(point);
        if let Some(&label) = self.cache.lock().expect("cache lock poisoned").get(&key) {
            return Ok(label);
        }
        let label = self.inner.classify(point)?;
        self.cache
            .lock()
            .expect("cache lock poisoned")
            .insert(key, label);
        Ok(label)
    }

    fn supports_batch(&self) -> bool {
        false
    }
}

/// Parses an oracle specification string:
/// `affine:FILE`, `sphere:c,R`, `mlp:FILE`, `http:URL`.
///
/// Weight files define only the classifier math; `domain_hint` supplies shape
/// and bounds when the caller knows them (dataset manifest or CLI flags) and
/// must agree with the file's dimension. Sphere and HTTP oracles cannot infer
/// a dimension, so for them the hint is mandatory.
pub fn parse_oracle_spec(
    spec: &str,
    domain_hint: Option<Domain>,
) -> Result<Box<dyn DecisionOracle + Send + Sync>, OracleError> {
    let (scheme, rest) = spec
        .split_once(':')
        .ok_or_else(|| OracleError::Format(format!("oracle spec `{spec}` has no `:`")))?;
    match scheme {
        "affine" => {
            let oracle = AffineMulticlassOracle::load(Path::new(rest), domain_hint)?;
            Ok(Box::new(oracle))
        }
        "mlp" => {
            let oracle = MlpOracle::load(Path::new(rest), domain_hint)?;
            Ok(Box::new(oracle))
        }
        "sphere" => {
            let domain = domain_hint.ok_or_else(|| {
                OracleError::Format("sphere oracle needs an explicit shape (domain hint)".into())
            })?;
            let (c, r) = rest.split_once(',').ok_or_else(|| {
                OracleError::Format(format!("sphere spec `{rest}` is not `c,R`"))
            })?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|e| OracleError::Format(format!("sphere center `{c}`: {e}")))?;
            let r: f64 = r
                .trim()
                .parse()
                .map_err(|e| OracleError::Format(format!("sphere radius `{r}`: {e}")))?;
            Ok(Box::new(SphereOracle::uniform_center(c, r, domain)?))
        }
        "http" => {
            let domain = domain_hint.ok_or_else(|| {
                OracleError::Format("http oracle needs an explicit shape (domain hint)".into())
            })?;
            Ok(Box::new(HttpOracle::new(
                rest.to_string(),
                domain,
                HttpOracleConfig::default(),
            )))
        }
        other => Err(OracleError::Format(format!(
            "unknown oracle scheme `{other}` (expected affine, sphere, mlp, or http)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_oracle() -> AffineMulticlassOracle {
        // Class 1 iff x₀ > 0.5 on [0,1]².
        AffineMulticlassOracle::binary(
            vec![1.0, 0.0],
            0.5,
            Domain::unit(Shape::flat(2)),
        )
        .unwrap()
    }

    #[test]
    fn counting_wrapper_bills_every_attempt() {
        let counted = CountingOracle::new(binary_oracle());
        let p = Point::flat(vec![0.9, 0.1]);
        counted.classify(&p).unwrap();
        assert_eq!(counted.count(), 1);
        counted
            .classify_batch(&[p.clone(), p.clone(), p])
            .unwrap();
        assert_eq!(counted.count(), 4);
        assert!(matches!(
            counted.classify_batch(&[]),
            Err(OracleError::EmptyBatch)
        ));
        assert_eq!(counted.count(), 4);
    }

    #[test]
    fn cache_order_decides_billing() {
        let p = Point::flat(vec![0.9, 0.1]);

        // Billed: counting outside the cache sees every repeat.
        let billed = CountingOracle::new(CacheOracle::new(binary_oracle()));
        billed.classify(&p).unwrap();
        billed.classify(&p).unwrap();
        assert_eq!(billed.count(), 2);

        // Free cache: counting inside the cache sees only misses.
        let free = CacheOracle::new(CountingOracle::new(binary_oracle()));
        let a = free.classify(&p).unwrap();
        let b = free.classify(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(free.inner.count(), 1);
    }

    #[test]
    fn batch_failure_reports_first_bad_index() {
        let oracle = binary_oracle();
        let good = Point::flat(vec![0.9, 0.1]);
        let bad = Point::new(Shape::flat(3), vec![0.0; 3]);
        let err = oracle
            .classify_batch(&[good.clone(), bad, good])
            .unwrap_err();
        match err {
            OracleError::BatchElement { index, .. } => assert_eq!(index, 1),
            other => panic!("expected BatchElement, got {other:?}"),
        }
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[2.0, 2.0]), 0);
        assert_eq!(argmax_lowest(&[0.5]), 0);
    }

    #[test]
    fn spec_parsing_rejects_unknown_schemes() {
        assert!(matches!(
            parse_oracle_spec("nope:stuff", None),
            Err(OracleError::Format(_))
        ));
        assert!(matches!(
            parse_oracle_spec("garbage", None),
            Err(OracleError::Format(_))
        ));
        // Sphere without a shape hint cannot be built.
        assert!(parse_oracle_spec("sphere:0.0,1.0", None).is_err());
        let domain = Domain::unit(Shape::flat(4));
        let oracle = parse_oracle_spec("sphere:0.0,1.0", Some(domain)).unwrap();
        assert_eq!(oracle.domain().len(), 4);
    }
}
