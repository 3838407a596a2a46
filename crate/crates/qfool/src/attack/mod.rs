//! The boundary-walk attack drivers and the machinery they share: the
//! inner-loop growth gate, phase-attributed query metering, and best-so-far
//! progress tracking.
//!
//! Both drivers follow the same outer shape. Find a first point on the
//! decision boundary, then repeat: estimate the boundary normal at the
//! current anchor from sign probes, turn the estimate into a candidate via a
//! line search from the original input, and keep growing the estimate while
//! each extra probe batch still buys enough improvement. When growth stops
//! paying, the best candidate becomes the next anchor.

mod nontargeted;
mod targeted;

pub use nontargeted::attack;
pub use targeted::attack_targeted;

use thiserror::Error;

use crate::config::ConfigError;
use crate::estimator::EstimatorError;
use crate::geometry::GeometryError;
use crate::ledger::{Phase, QueryLedger};
use crate::oracle::{DecisionOracle, OracleError};
use crate::point::{Domain, Label, Point};
use crate::subspace::SubspaceError;
use crate::trace::CurvePoint;

/// An iteration ends early once a candidate lands at or below this fraction
/// of the anchor's distance from the original input. A much closer anchor
/// means flatter local geometry, so probes are better spent there than on
/// refining the estimate at the old anchor. This is what keeps early
/// iterations cheap and funnels the bulk of the budget into the last one.
pub const ANCHOR_RESTART_RATIO: f64 = 0.5;

/// Probe batches re-drawn after an exactly-cancelling estimate before the
/// iteration is abandoned.
pub(crate) const DEGENERATE_RETRY_LIMIT: u32 = 3;

/// Probe-norm ceiling, as a multiple of `anchor distance / √(noise dims)`.
///
/// The ω controller only ever multiplies, and on a boundary that curves away
/// from the original input the probes keep landing adversarial (p₊ > ½), so
/// it ratchets ω up without bound until probes are pure clipping artifacts.
/// Capping ω near the scale where a curved boundary still splits probes
/// evenly stops the divergence; on flat boundaries the sign probes are
/// scale-invariant, so the cap costs nothing there.
pub(crate) const NOISE_CEILING_FACTOR: f64 = 2.0;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("no misclassified starting point within {queries_spent} queries (σ reached {sigma_reached:.3e})")]
    InitialPointNotFound { sigma_reached: f64, queries_spent: u64 },
    #[error("attack precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("boundary search failed: {0}")]
    Search(GeometryError),
}

impl From<GeometryError> for AttackError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::InitialPointNotFound { sigma_reached, queries_spent } => {
                AttackError::InitialPointNotFound { sigma_reached, queries_spent }
            }
            GeometryError::Oracle(o) => AttackError::Oracle(o),
            other => AttackError::Search(other),
        }
    }
}

impl From<EstimatorError> for AttackError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Oracle(o) => AttackError::Oracle(o),
            EstimatorError::DegenerateEstimate { samples } => AttackError::Precondition(format!(
                "gradient estimate degenerate after {samples} samples"
            )),
        }
    }
}

/// Decides whether an iteration keeps growing its estimate by another batch
/// of `n_u` probes.
///
/// `dist_curr` is the latest candidate's distance to the anchor
/// `‖x_adv − P_i‖`, `dist_prev` the previous candidate's `‖x'_adv − P_i‖`,
/// and `n_i` the probes already spent at this anchor. Growth continues while
/// the projected per-probe distance stays within a factor `epsilon` of the
/// previous pass's:
///
/// ```text
/// dist_curr / (n_i + n_u)  ≤  epsilon · dist_prev / n_i
/// ```
///
/// Two conventions cover the degenerate inputs the literal formula cannot:
/// `n_i == 0` (nothing spent yet) always continues, and `dist_prev == 0`
/// (the previous candidate *was* the anchor, true on every first pass)
/// always continues — taken literally it would cap every iteration at a
/// single batch.
pub fn inner_loop_gate(dist_curr: f64, dist_prev: f64, n_i: u64, n_u: u64, epsilon: f64) -> bool {
    debug_assert!(epsilon > 0.0 && epsilon < 1.0);
    if n_i == 0 || dist_prev == 0.0 {
        return true;
    }
    dist_curr / (n_i + n_u) as f64 <= epsilon * dist_prev / n_i as f64
}

/// Oracle wrapper that bills every classification against a ledger phase
/// before forwarding. Attack drivers wrap each call site in the phase that
/// spends the queries, so traces can show where the budget went.
pub(crate) struct PhasedOracle<'a, O: ?Sized> {
    pub inner: &'a O,
    pub ledger: &'a QueryLedger,
    pub phase: Phase,
}

impl<O: DecisionOracle + ?Sized> DecisionOracle for PhasedOracle<'_, O> {
    fn domain(&self) -> Domain {
        self.inner.domain()
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        self.ledger.record(self.phase, 1);
        self.inner.classify(point)
    }

    fn classify_batch(&self, points: &[Point]) -> Result<Vec<Label>, OracleError> {
        self.ledger.record(self.phase, points.len() as u64);
        self.inner.classify_batch(points)
    }

    fn supports_batch(&self) -> bool {
        self.inner.supports_batch()
    }
}

/// Probe sampler implied by the configuration: the low-frequency subspace
/// when a side is configured, the full input space otherwise.
pub(crate) fn build_sampler(config: &crate::config::ResolvedConfig) -> Result<crate::estimator::NoiseSampler, SubspaceError> {
    use crate::estimator::NoiseSampler;
    use crate::subspace::DctSubspace;
    Ok(match config.subspace_side {
        Some(side) => NoiseSampler::Subspace(DctSubspace::replicated(config.domain.shape, side)?),
        None => NoiseSampler::FullSpace,
    })
}

/// Trace name for a driver, marking subspace-constrained runs.
pub(crate) fn attack_name(base: &str, config: &crate::config::ResolvedConfig) -> String {
    if config.subspace_side.is_some() {
        format!("{base}-subspace")
    } else {
        base.to_string()
    }
}

/// Best adversarial point confirmed so far.
pub(crate) struct BestPoint {
    pub point: Point,
    pub label: Label,
    pub l2: f64,
}

/// Tracks the best-so-far adversarial point, builds the distance curve, and
/// notices when the optional early-stop threshold τ is reached.
pub(crate) struct ProgressTracker {
    original: Point,
    threshold: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub best: Option<BestPoint>,
    pub threshold_hit: Option<u64>,
}

impl ProgressTracker {
    pub fn new(original: Point, threshold: Option<f64>) -> Self {
        ProgressTracker {
            original,
            threshold,
            curve: Vec::new(),
            best: None,
            threshold_hit: None,
        }
    }

    /// Records `point` if it beats the best so far; returns whether it did.
    /// `used` is the ledger reading at the moment of confirmation.
    pub fn offer(&mut self, point: &Point, label: Label, used: u64) -> bool {
        let l2 = point.l2_distance(&self.original);
        let improved = match &self.best {
            Some(best) => l2 < best.l2,
            None => true,
        };
        if improved {
            let d = self.original.len() as f64;
            self.curve.push(CurvePoint { query: used, mse: l2 * l2 / d });
            self.best = Some(BestPoint { point: point.clone(), label, l2 });
            if self.threshold_hit.is_none() {
                if let Some(tau) = self.threshold {
                    if l2 <= tau {
                        self.threshold_hit = Some(used);
                    }
                }
            }
        }
        improved
    }

    pub fn best_l2(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.l2)
    }

    /// Whether the configured τ has been reached (never true without one).
    pub fn reached_threshold(&self) -> bool {
        self.threshold_hit.is_some()
    }
}

/// What a completed boundary walk hands back to its driver.
pub(crate) struct WalkResult {
    pub iterations: Vec<crate::trace::IterationRecord>,
    /// Direction estimate of the last iteration that produced one.
    pub last_direction: Option<Vec<f64>>,
}

/// The iteration engine both drivers run on.
///
/// Starting from `start` (a confirmed adversarial point), each iteration
/// accumulates sign probes at the anchor in batches of `unit_batch`, asks
/// `propose` to turn the current direction estimate into a candidate, and
/// keeps growing while [`inner_loop_gate`] approves and budget remains.
/// `propose` returns the candidate with its label, or `None` when the
/// direction led nowhere (non-fatal: the iteration ends and the walk
/// re-anchors). The next anchor is the iteration's best candidate, except
/// that a candidate farther from the original than the current anchor never
/// replaces it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn boundary_walk<O, R, F>(
    oracle: &O,
    ledger: &QueryLedger,
    x0: &Point,
    start: Point,
    rule: crate::estimator::SignRule,
    sampler: &crate::estimator::NoiseSampler,
    config: &crate::config::ResolvedConfig,
    tracker: &mut ProgressTracker,
    rng: &mut R,
    mut propose: F,
) -> Result<WalkResult, AttackError>
where
    O: DecisionOracle + ?Sized,
    R: rand::Rng + ?Sized,
    F: FnMut(&Point, &[f64], f64, &mut R) -> Result<Option<(Point, Label)>, AttackError>,
{
    use crate::estimator::GradientAccumulator;
    use crate::estimator::NoiseScaleState;
    use crate::trace::IterationRecord;

    let domain = config.domain;
    let n_u = config.unit_batch;
    let mut scale = NoiseScaleState::new(config.initial_noise_norm, config.noise_norm_floor());
    let mut anchor = start;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut last_direction: Option<Vec<f64>> = None;

    while ledger.can_afford(n_u) && !tracker.reached_threshold() {
        let iteration_start = ledger.used();
        let anchor_l2 = anchor.l2_distance(x0);
        let omega_ceiling =
            NOISE_CEILING_FACTOR * anchor_l2 / (sampler.dim(x0.len()) as f64).sqrt();
        let mut accumulator = GradientAccumulator::new(anchor.clone(), rule, sampler);
        let estimation_oracle =
            PhasedOracle { inner: oracle, ledger, phase: Phase::Estimation };
        let mut n_i: u64 = 0;
        let mut passes: u32 = 0;
        // ‖x_adv − P_i‖ of the latest candidate; before the first pass the
        // "previous candidate" is the anchor itself, i.e. distance zero.
        let mut last_dist: Option<f64> = None;
        let mut prev_dist: f64 = 0.0;
        let mut iteration_best: Option<(Point, Label, f64)> = None;
        let mut iteration_direction: Option<Vec<f64>> = None;
        let mut out_of_budget = false;

        loop {
            let proceed = match last_dist {
                None => true,
                Some(curr) => {
                    inner_loop_gate(curr, prev_dist, n_i, n_u, config.improvement_threshold)
                }
            };
            if !proceed {
                break;
            }
            if !ledger.can_afford(n_u) {
                out_of_budget = true;
                break;
            }

            // Grow the estimate; an exactly-cancelling probe set is retried
            // with fresh batches a bounded number of times.
            let mut estimate = None;
            for _ in 0..DEGENERATE_RETRY_LIMIT {
                scale.clamp_ceiling(omega_ceiling);
                let outcome =
                    accumulator.extend(&estimation_oracle, n_u, scale.omega(), &domain, rng)?;
                n_i += outcome.queries;
                scale.adapt_noise_norm(outcome.positive_fraction);
                match accumulator.estimate() {
                    Ok(e) => {
                        estimate = Some(e);
                        break;
                    }
                    Err(EstimatorError::DegenerateEstimate { .. }) => {
                        if !ledger.can_afford(n_u) {
                            out_of_budget = true;
                            break;
                        }
                    }
                    Err(oracle_failure) => return Err(oracle_failure.into()),
                }
            }
            let Some(estimate) = estimate else {
                break; // degenerate batches exhausted, or budget ran out
            };
            iteration_direction = Some(estimate.direction.clone());

            let hint = tracker
                .best_l2()
                .unwrap_or(anchor_l2)
                .max(config.binary_search_tolerance);
            passes += 1;
            match propose(&anchor, &estimate.direction, hint, rng)? {
                Some((candidate, label)) => {
                    let candidate_l2 = candidate.l2_distance(x0);
                    prev_dist = last_dist.unwrap_or(0.0);
                    last_dist = Some(candidate.l2_distance(&anchor));
                    tracker.offer(&candidate, label, ledger.used());
                    let improved = iteration_best
                        .as_ref()
                        .is_none_or(|(_, _, best)| candidate_l2 < *best);
                    if improved {
                        iteration_best = Some((candidate, label, candidate_l2));
                    }
                    if tracker.reached_threshold() {
                        break;
                    }
                    if candidate_l2 <= ANCHOR_RESTART_RATIO * anchor_l2 {
                        break; // re-anchor where the boundary is flatter
                    }
                }
                None => {
                    // Dead-end direction: let the gate decide whether more
                    // probes are still worth it at this anchor.
                    prev_dist = last_dist.unwrap_or(0.0);
                    last_dist = Some(f64::INFINITY);
                }
            }
        }

        if n_i == 0 {
            break;
        }
        // Monotonicity guard: an iteration that only found worse candidates
        // keeps the previous iterate as its result (and as the next anchor).
        let (chosen, chosen_l2) = match &iteration_best {
            Some((point, _, l2)) if *l2 < anchor_l2 => (point.clone(), *l2),
            _ => (anchor.clone(), anchor_l2),
        };
        iterations.push(IterationRecord {
            index: iterations.len(),
            start_point: anchor.values.clone(),
            direction: iteration_direction.clone().unwrap_or_default(),
            candidate: chosen.values.clone(),
            perturbation_norm: chosen_l2,
            estimation_queries: n_i,
            total_queries: ledger.used() - iteration_start,
            passes,
        });
        if let Some(direction) = iteration_direction {
            last_direction = Some(direction);
        }
        anchor = chosen;
        if out_of_budget {
            break;
        }
    }
    Ok(WalkResult { iterations, last_direction })
}
