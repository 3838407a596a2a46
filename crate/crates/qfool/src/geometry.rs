//! Boundary-finding primitives: every way the attacks turn label flips into
//! points that sit on a decision boundary.
//!
//! All searches return a [`BoundaryPair`] — two points at most a tolerance
//! apart that straddle the boundary — plus the exact number of oracle
//! queries they spent. Callers decide how queries are metered by passing an
//! oracle wrapper; these functions only count.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::ResolvedConfig;
use crate::oracle::{DecisionOracle, OracleError};
use crate::point::{Label, Point};
use crate::vecmath;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid bracket: {0}")]
    BracketInvalid(String),
    #[error("no misclassified point found within {queries_spent} queries (σ reached {sigma_reached:.3e})")]
    InitialPointNotFound {
        sigma_reached: f64,
        queries_spent: u64,
    },
    #[error("direction never leaves the original class inside the box")]
    DirectionNotAdversarial,
    #[error("direction has zero norm")]
    ZeroDirection,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Two points within `tolerance` of each other on opposite sides of a
/// decision boundary: `predicate` is false at `inside`, true at `outside`.
#[derive(Clone, Debug)]
pub struct BoundaryPair {
    pub inside: Point,
    pub outside: Point,
}

impl BoundaryPair {
    /// Euclidean gap between the two sides.
    pub fn gap(&self) -> f64 {
        self.inside.l2_distance(&self.outside)
    }
}

/// Bisects the segment between two pre-verified bracket endpoints. The
/// midpoint of two in-box points stays in the box, so no clipping is needed.
pub(crate) fn bisect_segment<O, F>(
    oracle: &O,
    mut inside: Point,
    mut outside: Point,
    predicate: &F,
    tolerance: f64,
) -> Result<(BoundaryPair, u64), GeometryError>
where
    O: DecisionOracle + ?Sized,
    F: Fn(Label) -> bool,
{
    let mut queries = 0;
    while inside.l2_distance(&outside) > tolerance {
        let mid_values: Vec<f64> = inside
            .values
            .iter()
            .zip(&outside.values)
            .map(|(&a, &b)| 0.5 * (a + b))
            .collect();
        let mid = Point::new(inside.shape, mid_values);
        if mid.values == inside.values || mid.values == outside.values {
            break; // f64 precision floor
        }
        queries += 1;
        if predicate(oracle.classify(&mid)?) {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    Ok((BoundaryPair { inside, outside }, queries))
}

/// Pins a boundary between `inside` (predicate false) and `outside`
/// (predicate true) down to `tolerance`.
///
/// Both endpoint labels are verified first (2 queries), after which each
/// halving costs one query, so the total is at most
/// `ceil(log2(gap₀ / tolerance)) + 2`. A bracket already within tolerance is
/// returned unchanged without spending any queries; identical endpoints are
/// rejected because they cannot straddle a boundary.
pub fn binary_search_boundary<O, F>(
    oracle: &O,
    inside: Point,
    outside: Point,
    predicate: &F,
    tolerance: f64,
) -> Result<(BoundaryPair, u64), GeometryError>
where
    O: DecisionOracle + ?Sized,
    F: Fn(Label) -> bool,
{
    if inside.shape != outside.shape {
        return Err(GeometryError::BracketInvalid(format!(
            "endpoint shapes differ: {} vs {}",
            inside.shape, outside.shape
        )));
    }
    if !(tolerance > 0.0) {
        return Err(GeometryError::BracketInvalid(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let gap = inside.l2_distance(&outside);
    if gap == 0.0 {
        return Err(GeometryError::BracketInvalid(
            "bracket endpoints are identical".into(),
        ));
    }
    if gap <= tolerance {
        return Ok((BoundaryPair { inside, outside }, 0));
    }
    let mut queries = 2;
    if predicate(oracle.classify(&inside)?) {
        return Err(GeometryError::BracketInvalid(
            "inside endpoint already satisfies the predicate".into(),
        ));
    }
    if !predicate(oracle.classify(&outside)?) {
        return Err(GeometryError::BracketInvalid(
            "outside endpoint does not satisfy the predicate".into(),
        ));
    }
    let (pair, bisect_queries) = bisect_segment(oracle, inside, outside, predicate, tolerance)?;
    queries += bisect_queries;
    Ok((pair, queries))
}

/// Escalating-noise search for the first boundary point (the attack's
/// starting point).
///
/// Draws `r ~ N(0, σ²I)` around `x0`, clips into the box, and queries; σ
/// doubles (by `sigma_growth`) after each draw that fails to change the
/// label, capped at the box diameter. The first label flip is refined by
/// bisection along the successful draw. At most `allowance` draw queries are
/// spent searching; running out yields [`GeometryError::InitialPointNotFound`].
pub fn find_initial_point<O, F, R>(
    oracle: &O,
    x0: &Point,
    predicate: &F,
    config: &ResolvedConfig,
    rng: &mut R,
    allowance: u64,
) -> Result<(BoundaryPair, u64), GeometryError>
where
    O: DecisionOracle + ?Sized,
    F: Fn(Label) -> bool,
    R: Rng + ?Sized,
{
    let domain = config.domain;
    let mut sigma = config.initial_sigma;
    let sigma_cap = domain.diameter();
    let mut queries: u64 = 0;
    loop {
        if queries >= allowance {
            return Err(GeometryError::InitialPointNotFound {
                sigma_reached: sigma,
                queries_spent: queries,
            });
        }
        let noise: Vec<f64> = (0..x0.len())
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let candidate = domain.clip(&x0.offset(&noise, 1.0));
        queries += 1;
        if predicate(oracle.classify(&candidate)?) {
            let (pair, bisect_queries) = bisect_segment(
                oracle,
                x0.clone(),
                candidate,
                predicate,
                config.binary_search_tolerance,
            )?;
            return Ok((pair, queries + bisect_queries));
        }
        sigma = (sigma * config.sigma_growth).min(sigma_cap);
    }
}

/// Finds the first predicate-satisfying point along the ray
/// `clip(x0 + β·direction)` and bisects onto the crossing.
///
/// `distance_hint` seeds the march at the scale where the boundary is
/// expected (callers pass the current perturbation norm); β doubles from
/// there until the label flips, then the bracket is bisected. Rays that
/// saturate against the box without ever flipping fail with
/// [`GeometryError::DirectionNotAdversarial`].
pub fn directional_search<O, F>(
    oracle: &O,
    x0: &Point,
    direction: &[f64],
    predicate: &F,
    distance_hint: f64,
    config: &ResolvedConfig,
) -> Result<(BoundaryPair, u64), GeometryError>
where
    O: DecisionOracle + ?Sized,
    F: Fn(Label) -> bool,
{
    let norm = vecmath::norm(direction);
    if norm == 0.0 {
        return Err(GeometryError::ZeroDirection);
    }
    let unit: Vec<f64> = direction.iter().map(|&v| v / norm).collect();
    let domain = config.domain;
    let tolerance = config.binary_search_tolerance;
    let point_at = |beta: f64| domain.clip(&x0.offset(&unit, beta));

    let beta_cap = 4.0 * domain.diameter();
    let mut beta = distance_hint.max(tolerance).min(beta_cap);
    let mut queries: u64 = 0;
    let mut inside_beta = 0.0;
    let mut last_point = x0.clone();
    let outside_beta = loop {
        let probe = point_at(beta);
        if probe.values == last_point.values {
            // Fully clipped: marching further cannot change the query.
            return Err(GeometryError::DirectionNotAdversarial);
        }
        queries += 1;
        if predicate(oracle.classify(&probe)?) {
            break beta;
        }
        inside_beta = beta;
        last_point = probe;
        if beta >= beta_cap {
            return Err(GeometryError::DirectionNotAdversarial);
        }
        beta = (beta * 2.0).min(beta_cap);
    };

    // Bisect on β so the result keeps the exact x0 + β·ξ form (modulo clip).
    let mut lo = inside_beta;
    let mut hi = outside_beta;
    let mut inside_point = point_at(lo);
    let mut outside_point = point_at(hi);
    while inside_point.l2_distance(&outside_point) > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let probe = point_at(mid);
        queries += 1;
        if predicate(oracle.classify(&probe)?) {
            hi = mid;
            outside_point = probe;
        } else {
            lo = mid;
            inside_point = probe;
        }
    }
    Ok((
        BoundaryPair {
            inside: inside_point,
            outside: outside_point,
        },
        queries,
    ))
}

/// Line search from `x0` toward `anchor` for the nearest entry into the
/// predicate's region (the targeted attack's projection step).
///
/// A coarse scan with `config.scan_probes` probes brackets the first
/// predicate-true segment — multi-class oracles can interpose other classes
/// along the line — and bisection pins its entry edge. With `verify_anchor`
/// the anchor's label is checked first (one query) and a non-matching anchor
/// is rejected; internal callers that just classified the anchor skip this.
pub fn targeted_line_search<O, F>(
    oracle: &O,
    x0: &Point,
    anchor: &Point,
    predicate: &F,
    config: &ResolvedConfig,
    verify_anchor: bool,
) -> Result<(BoundaryPair, u64), GeometryError>
where
    O: DecisionOracle + ?Sized,
    F: Fn(Label) -> bool,
{
    if x0.shape != anchor.shape {
        return Err(GeometryError::BracketInvalid(format!(
            "anchor shape {} differs from origin shape {}",
            anchor.shape, x0.shape
        )));
    }
    let length = x0.l2_distance(anchor);
    if length == 0.0 {
        return Err(GeometryError::BracketInvalid(
            "anchor coincides with the origin".into(),
        ));
    }
    let mut queries: u64 = 0;
    if verify_anchor {
        queries += 1;
        if !predicate(oracle.classify(anchor)?) {
            return Err(GeometryError::BracketInvalid(
                "anchor is not labeled with the target class".into(),
            ));
        }
    }
    let probes = config.scan_probes as u64;
    let point_at = |alpha: f64| {
        let values = x0
            .values
            .iter()
            .zip(&anchor.values)
            .map(|(&a, &b)| a + alpha * (b - a))
            .collect();
        Point::new(x0.shape, values)
    };

    // Scan forward; x0 itself (α = 0) is outside the target region.
    let mut inside = x0.clone();
    let mut outside = anchor.clone();
    for k in 1..probes {
        let alpha = k as f64 / probes as f64;
        let probe = point_at(alpha);
        queries += 1;
        if predicate(oracle.classify(&probe)?) {
            outside = probe;
            break;
        }
        inside = probe;
    }
    let (pair, bisect_queries) = bisect_segment(
        oracle,
        inside,
        outside,
        predicate,
        config.binary_search_tolerance,
    )?;
    Ok((pair, queries + bisect_queries))
}
