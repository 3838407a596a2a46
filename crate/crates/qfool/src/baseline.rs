//! Comparison attacks. Both are deliberately weaker than the boundary walk
//! and exist to anchor benchmark orderings: a simplified random-walk
//! boundary attack and a pure noise-escalation attack. They share the oracle
//! trait, configuration, ledger accounting, and trace format with the main
//! attacks so comparisons at equal budget are fair.
//!
//! The boundary attack here is a simplification of the classic random-walk
//! scheme, not a faithful port: one proposal distribution (fixed orthogonal
//! wander plus a contraction toward the original) with a single
//! multiplicative step-size adaptation targeting 25% acceptance. It tracks
//! trends, not the original implementation's constants.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::attack::{AttackError, PhasedOracle, ProgressTracker};
use crate::config::ResolvedConfig;
use crate::geometry::{bisect_segment, find_initial_point};
use crate::ledger::{Phase, QueryLedger};
use crate::oracle::DecisionOracle;
use crate::point::{Label, Point};
use crate::trace::AttackTrace;
use crate::vecmath;

/// Fraction of a proposal's length spent wandering orthogonally to the
/// original-to-iterate direction. Kept below the contraction scale so the
/// stationary distance stays within ~12% of optimal on flat boundaries.
const ORTHOGONAL_MIX: f64 = 0.5;

/// Step-size growth on an accepted proposal. Rejections shrink by the cube
/// root, so the step size is stationary at a 25% acceptance rate.
const STEP_GROWTH: f64 = 1.5;

/// Initial contraction fraction per accepted proposal.
const INITIAL_CONTRACTION: f64 = 0.05;

const MAX_CONTRACTION: f64 = 0.5;
const MIN_CONTRACTION: f64 = 1e-9;

fn common_preconditions(
    oracle: &(impl DecisionOracle + ?Sized),
    x0: &Point,
    config: &ResolvedConfig,
) -> Result<(), AttackError> {
    if oracle.domain() != config.domain {
        return Err(AttackError::Precondition(format!(
            "config resolved for domain {:?} but oracle classifies {:?}",
            config.domain,
            oracle.domain()
        )));
    }
    if x0.shape != config.domain.shape {
        return Err(AttackError::Precondition(format!(
            "input shape {} does not match oracle shape {}",
            x0.shape, config.domain.shape
        )));
    }
    if !config.domain.contains(x0) {
        return Err(AttackError::Precondition(
            "original input lies outside the oracle's box".into(),
        ));
    }
    Ok(())
}

fn finish_trace(
    attack: &str,
    x0: &Point,
    y0: Label,
    target: Option<Label>,
    tracker: ProgressTracker,
    ledger: &QueryLedger,
    config: &ResolvedConfig,
    started: std::time::Instant,
) -> AttackTrace {
    let d = x0.len() as f64;
    let (success, final_point, final_label, final_mse, final_l2) = match tracker.best {
        Some(best) => (true, Some(best.point), Some(best.label), best.l2 * best.l2 / d, best.l2),
        // No adversarial point was ever found; the distance fields are
        // zeroed rather than infinite so traces stay plain JSON.
        None => (false, None, None, 0.0, 0.0),
    };
    AttackTrace {
        attack: attack.to_string(),
        success,
        original: x0.clone(),
        original_label: y0,
        final_label,
        final_mse,
        final_l2,
        final_point,
        target_label: target,
        parallelism_cosine: None,
        iterations: Vec::new(),
        curve: tracker.curve,
        total_queries: ledger.used(),
        phase_queries: ledger.phase_totals(),
        queries_to_threshold: tracker.threshold_hit,
        config: config.clone(),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

/// Simplified Boundary attack: random walk along the decision boundary.
///
/// Without `target` the walk starts from an escalating-noise adversarial
/// point and accepts any label other than the original's; with
/// `target = x_t` it starts from `x_t` and stays inside `x_t`'s class.
/// Each proposal contracts toward the original while wandering orthogonally;
/// the contraction adapts multiplicatively toward 25% acceptance. Whenever a
/// proposal is accepted the ray from the original through it is re-bisected
/// onto the boundary, keeping the iterate boundary-adjacent.
///
/// The trace reports the walk through its distance curve only; per-iteration
/// geometry records are a boundary-walk concept and stay empty here.
pub fn boundary_attack<O>(
    oracle: &O,
    x0: &Point,
    target: Option<&Point>,
    config: &ResolvedConfig,
) -> Result<AttackTrace, AttackError>
where
    O: DecisionOracle + ?Sized,
{
    let started = std::time::Instant::now();
    common_preconditions(oracle, x0, config)?;
    let domain = config.domain;
    let tolerance = config.binary_search_tolerance;
    let ledger = QueryLedger::new(config.total_budget);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let setup = PhasedOracle { inner: oracle, ledger: &ledger, phase: Phase::Setup };
    let y0 = setup.classify(x0)?;

    // `last_hit` remembers the label behind the most recent acceptance, so
    // bisections over multiclass regions report the label actually seen.
    let target_label = Cell::new(None::<Label>);
    let last_hit = Cell::new(y0);
    let accepts = |label: Label| {
        let hit = match target_label.get() {
            Some(t) => label == t,
            None => label != y0,
        };
        if hit {
            last_hit.set(label);
        }
        hit
    };

    let mut tracker = ProgressTracker::new(x0.clone(), config.perturbation_threshold);

    // Starting point: the target example, or an escalating-noise flip.
    let init = PhasedOracle { inner: oracle, ledger: &ledger, phase: Phase::InitialSearch };
    let mut current = match target {
        Some(example) => {
            if example.shape != domain.shape || !domain.contains(example) {
                return Err(AttackError::Precondition(
                    "target example does not fit the oracle's box".into(),
                ));
            }
            let t = init.classify(example)?;
            if t == y0 {
                return Err(AttackError::Precondition(format!(
                    "target example already shares the original's label {y0:?}"
                )));
            }
            target_label.set(Some(t));
            last_hit.set(t);
            let (pair, _) =
                bisect_segment(&init, x0.clone(), example.clone(), &accepts, tolerance)?;
            pair.outside
        }
        None => {
            let (pair, _) =
                find_initial_point(&init, x0, &accepts, config, &mut rng, ledger.remaining())?;
            pair.outside
        }
    };
    let mut current_label = last_hit.get();
    tracker.offer(&current, current_label, ledger.used());

    let walk = PhasedOracle { inner: oracle, ledger: &ledger, phase: Phase::Step };
    let mut contraction = INITIAL_CONTRACTION;
    while ledger.can_afford(1) && !tracker.reached_threshold() {
        let distance = current.l2_distance(x0);
        if distance <= tolerance {
            break;
        }
        let radial = current.perturbation_from(x0);
        let noise: Vec<f64> =
            (0..x0.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // Orthogonalize the wander against the radial direction, mix, and
        // land at the contracted distance.
        let along = vecmath::dot(&noise, &radial) / (distance * distance);
        let mut direction: Vec<f64> =
            noise.iter().zip(&radial).map(|(&n, &r)| n - along * r).collect();
        let tangent_norm = vecmath::norm(&direction);
        if tangent_norm == 0.0 {
            continue; // measure-zero draw; try again
        }
        for (dir, &r) in direction.iter_mut().zip(&radial) {
            *dir = *dir / tangent_norm * ORTHOGONAL_MIX + r / distance;
        }
        let Some(unit) = vecmath::normalized(&direction) else { continue };
        let proposal = domain.clip(&x0.offset(&unit, (1.0 - contraction) * distance));
        let label = walk.classify(&proposal)?;
        if accepts(label) {
            current = proposal;
            current_label = label;
            tracker.offer(&current, current_label, ledger.used());
            contraction = (contraction * STEP_GROWTH).min(MAX_CONTRACTION);

            // Pull the accepted iterate back onto the boundary along its
            // ray so the next proposal starts from the boundary, not from
            // deep inside the adversarial region.
            let bound = ((distance / tolerance).log2().ceil() as u64).saturating_add(1);
            if ledger.can_afford(bound) {
                let (pair, _) =
                    bisect_segment(&walk, x0.clone(), current.clone(), &accepts, tolerance)?;
                current = pair.outside;
                current_label = last_hit.get();
                tracker.offer(&current, current_label, ledger.used());
            }
        } else {
            contraction = (contraction / STEP_GROWTH.cbrt()).max(MIN_CONTRACTION);
        }
    }

    let name = if target.is_some() { "boundary-targeted" } else { "boundary" };
    Ok(finish_trace(name, x0, y0, target_label.get(), tracker, &ledger, config, started))
}

/// Additive-Gaussian-noise attack: the weakest baseline.
///
/// Each round draws one noise direction, escalates its scale σ until the
/// label flips (doubling per probe, capped at the box diameter), then
/// bisects the smallest flipping σ along that fixed draw. Rounds repeat with
/// fresh draws until the budget runs out; the best flip over all rounds
/// wins. A run where no draw ever flips the label (a constant oracle, or far
/// too small a budget) yields an unsuccessful trace.
pub fn gaussian_noise_attack<O>(
    oracle: &O,
    x0: &Point,
    config: &ResolvedConfig,
) -> Result<AttackTrace, AttackError>
where
    O: DecisionOracle + ?Sized,
{
    let started = std::time::Instant::now();
    common_preconditions(oracle, x0, config)?;
    let domain = config.domain;
    let tolerance = config.binary_search_tolerance;
    let ledger = QueryLedger::new(config.total_budget);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let setup = PhasedOracle { inner: oracle, ledger: &ledger, phase: Phase::Setup };
    let y0 = setup.classify(x0)?;
    let flips = |label: Label| label != y0;

    let mut tracker = ProgressTracker::new(x0.clone(), config.perturbation_threshold);
    let probe_oracle = PhasedOracle { inner: oracle, ledger: &ledger, phase: Phase::Step };
    let search_oracle = PhasedOracle { inner: oracle, ledger: &ledger, phase: Phase::Search };
    let sigma_cap = domain.diameter();

    'rounds: while ledger.can_afford(1) && !tracker.reached_threshold() {
        let draw: Vec<f64> =
            (0..x0.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if vecmath::norm(&draw) == 0.0 {
            continue;
        }
        // Escalate σ along this draw until the label flips.
        let mut sigma = config.initial_sigma;
        let (flip_point, flip_label) = loop {
            if !ledger.can_afford(1) {
                break 'rounds;
            }
            let candidate = domain.clip(&x0.offset(&draw, sigma));
            let label = probe_oracle.classify(&candidate)?;
            if flips(label) {
                break (candidate, label);
            }
            if sigma >= sigma_cap {
                continue 'rounds; // this draw never flips inside the box
            }
            sigma = (sigma * config.sigma_growth).min(sigma_cap);
        };
        tracker.offer(&flip_point, flip_label, ledger.used());

        // Bisect the smallest flipping scale along the fixed draw.
        let gap = x0.l2_distance(&flip_point);
        let bound = ((gap / tolerance).log2().ceil().max(0.0) as u64).saturating_add(1);
        if !ledger.can_afford(bound) {
            break;
        }
        let flipped = std::cell::Cell::new(flip_label);
        let predicate = |label: Label| {
            let hit = flips(label);
            if hit {
                flipped.set(label);
            }
            hit
        };
        let (pair, _) =
            bisect_segment(&search_oracle, x0.clone(), flip_point, &predicate, tolerance)?;
        tracker.offer(&pair.outside, flipped.get(), ledger.used());
    }

    Ok(finish_trace("gaussian", x0, y0, None, tracker, &ledger, config, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AttackConfig;
    use crate::oracle::{AffineMulticlassOracle, CountingOracle};
    use crate::point::{Domain, Shape};

    fn halfplane(d: usize, margin: f64) -> (AffineMulticlassOracle, Point) {
        let domain = Domain::unit(Shape::flat(d));
        let w = vec![1.0 / (d as f64).sqrt(); d];
        let x0 = Point::flat(vec![0.5; d]);
        let b = vecmath::dot(&w, &x0.values) + margin;
        (AffineMulticlassOracle::binary(w, b, domain).unwrap(), x0)
    }

    /// Always answers the same label: nothing to attack.
    struct ConstantOracle(Domain);
    impl DecisionOracle for ConstantOracle {
        fn domain(&self) -> Domain {
            self.0
        }
        fn classify(&self, _point: &Point) -> Result<Label, crate::oracle::OracleError> {
            Ok(Label(7))
        }
    }

    #[test]
    fn boundary_walk_converges_loosely_on_affine() {
        let (oracle, x0) = halfplane(20, 0.2);
        let config = AttackConfig { total_budget: 10_000, rng_seed: 3, ..AttackConfig::default() }
            .resolve(&oracle.domain())
            .unwrap();
        let trace = boundary_attack(&oracle, &x0, None, &config).unwrap();
        assert!(trace.success);
        assert_eq!(trace.attack, "boundary");
        assert!(trace.final_l2 >= 0.2 - config.binary_search_tolerance);
        assert!(trace.final_l2 <= 1.25 * 0.2, "final {}", trace.final_l2);
        let mses: Vec<f64> = trace.curve.iter().map(|c| c.mse).collect();
        assert!(mses.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn boundary_attack_is_deterministic_and_ledger_exact() {
        let (oracle, x0) = halfplane(10, 0.15);
        let counted = CountingOracle::new(oracle);
        let config = AttackConfig { total_budget: 2000, rng_seed: 8, ..AttackConfig::default() }
            .resolve(&counted.domain())
            .unwrap();
        let a = boundary_attack(&counted, &x0, None, &config).unwrap();
        assert_eq!(a.total_queries, counted.count());
        let b = boundary_attack(&counted, &x0, None, &config).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json());
    }

    #[test]
    fn boundary_attack_with_budget_for_init_only_returns_the_init_point() {
        let (oracle, x0) = halfplane(10, 0.1);
        // Enough for setup + a handful of escalation draws + the bisection,
        // but nothing beyond: the walk makes no proposals.
        let config = AttackConfig { total_budget: 40, rng_seed: 5, ..AttackConfig::default() }
            .resolve(&oracle.domain())
            .unwrap();
        let trace = boundary_attack(&oracle, &x0, None, &config).unwrap();
        assert!(trace.success, "init point itself is a valid result");
        assert!(trace.final_l2 >= 0.1);
    }

    #[test]
    fn targeted_boundary_walk_stays_in_class() {
        let domain = Domain::unit(Shape::flat(6));
        let mut w2 = vec![0.0; 6];
        w2[0] = 2.0;
        let oracle = AffineMulticlassOracle::new(
            vec![vec![0.0; 6], w2],
            vec![0.0, -1.0],
            domain,
        )
        .unwrap();
        let x0 = Point::flat(vec![0.2, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let mut example = vec![0.5; 6];
        example[0] = 0.9;
        let example = Point::flat(example);
        let config = AttackConfig { total_budget: 4000, rng_seed: 2, ..AttackConfig::default() }
            .resolve(&domain)
            .unwrap();
        let trace = boundary_attack(&oracle, &x0, Some(&example), &config).unwrap();
        assert_eq!(trace.attack, "boundary-targeted");
        assert_eq!(trace.target_label, Some(Label(1)));
        assert_eq!(trace.final_label, Some(Label(1)));
        let point = trace.final_point.unwrap();
        assert_eq!(oracle.classify(&point).unwrap(), Label(1));
        // Boundary for class 1 sits at x₀ = 0.5, so the optimum is 0.3.
        assert!(point.l2_distance(&x0) <= 1.25 * 0.3);
    }

    #[test]
    fn gaussian_attack_finds_flips_but_never_beats_the_optimum() {
        let (oracle, x0) = halfplane(12, 0.2);
        let config = AttackConfig { total_budget: 1500, rng_seed: 11, ..AttackConfig::default() }
            .resolve(&oracle.domain())
            .unwrap();
        let trace = gaussian_noise_attack(&oracle, &x0, &config).unwrap();
        assert!(trace.success);
        assert_eq!(trace.attack, "gaussian");
        assert!(trace.final_l2 >= 0.2 - config.binary_search_tolerance);
        assert!(config.domain.contains(&trace.final_point.unwrap()));
    }

    #[test]
    fn gaussian_attack_improves_with_budget() {
        let (oracle, x0) = halfplane(12, 0.2);
        let run = |budget: u64, seed: u64| {
            let config = AttackConfig { total_budget: budget, rng_seed: seed, ..AttackConfig::default() }
                .resolve(&oracle.domain())
                .unwrap();
            gaussian_noise_attack(&oracle, &x0, &config).unwrap().final_l2
        };
        let small: Vec<f64> = (0..10).map(|s| run(200, s)).collect();
        let large: Vec<f64> = (0..10).map(|s| run(4000, s)).collect();
        let med = |v: &[f64]| crate::metrics::median(v).unwrap();
        assert!(
            med(&large) < med(&small),
            "large-budget median {} should beat small-budget {}",
            med(&large),
            med(&small)
        );
    }

    #[test]
    fn gaussian_attack_on_constant_oracle_is_unsuccessful() {
        let domain = Domain::unit(Shape::flat(8));
        let oracle = ConstantOracle(domain);
        let config = AttackConfig { total_budget: 300, rng_seed: 0, ..AttackConfig::default() }
            .resolve(&domain)
            .unwrap();
        let x0 = Point::flat(vec![0.5; 8]);
        let trace = gaussian_noise_attack(&oracle, &x0, &config).unwrap();
        assert!(!trace.success);
        assert!(trace.final_point.is_none());
        assert!(trace.final_label.is_none());
        assert!(trace.curve.is_empty());
        assert!(trace.total_queries <= 300 + 1);
    }

    #[test]
    fn both_baselines_reject_foreign_domains() {
        let (oracle, _) = halfplane(6, 0.1);
        let config = AttackConfig::default().resolve(&oracle.domain()).unwrap();
        let wrong = Point::flat(vec![0.5; 7]);
        assert!(matches!(
            boundary_attack(&oracle, &wrong, None, &config),
            Err(AttackError::Precondition(_))
        ));
        assert!(matches!(
            gaussian_noise_attack(&oracle, &wrong, &config),
            Err(AttackError::Precondition(_))
        ));
    }
}
