//! Gradient estimation from sign queries at a boundary point, plus the
//! adaptive controller for the probe-noise norm.
//!
//! At a point `P` on the decision boundary, each probe `P + η` answers one
//! bit: did the label flip? Averaging the probe vectors weighted by that sign
//! recovers the boundary normal — slowly in the full input space, much faster
//! inside a low-frequency subspace. The probe norm ω is steered so that about
//! half the probes land on each side, which is where the sign queries carry
//! the most information.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::oracle::{DecisionOracle, OracleError};
use crate::point::{Domain, Label, Point};
use crate::subspace::DctSubspace;
use crate::vecmath;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("sign-weighted noise sum is zero across {samples} samples")]
    DegenerateEstimate { samples: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Maps an oracle label to the probe sign `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignRule {
    /// Non-targeted: +1 when the label has left the original class.
    NotOriginal(Label),
    /// Targeted: +1 when the label has reached the target class.
    IsTarget(Label),
}

impl SignRule {
    pub fn sign(&self, label: Label) -> i8 {
        let positive = match *self {
            SignRule::NotOriginal(original) => label != original,
            SignRule::IsTarget(target) => label == target,
        };
        if positive {
            1
        } else {
            -1
        }
    }
}

/// Non-targeted sign: −1 when the label is still the original, +1 otherwise.
pub fn label_to_sign(label: Label, original: Label) -> i8 {
    SignRule::NotOriginal(original).sign(label)
}

/// Adaptive noise-norm state: ω grows while probes almost never flip the
/// label (signs nearly all −1) and shrinks while they almost always do, with
/// the adjustment direction φ reversing whenever the imbalance changes side.
#[derive(Clone, Debug)]
pub struct NoiseScaleState {
    omega: f64,
    phi: f64,
    floor: f64,
    rho_history: Vec<f64>,
}

impl NoiseScaleState {
    /// Starts at `omega0` with the adjustment direction set to shrink first.
    pub fn new(omega0: f64, floor: f64) -> Self {
        assert!(omega0 > 0.0, "initial noise norm must be positive, got {omega0}");
        assert!(floor > 0.0, "noise-norm floor must be positive, got {floor}");
        NoiseScaleState {
            omega: omega0.max(floor),
            phi: -1.0,
            floor,
            rho_history: Vec::new(),
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Imbalances `ρ = 0.5 − p₊` seen so far, most recent last.
    pub fn history(&self) -> &[f64] {
        &self.rho_history
    }

    /// Caps ω at `ceiling` (but never below the floor). The controller can
    /// only ratchet ω upward while the probes keep landing on one side — on
    /// a persistently one-sided boundary (ρ keeps its sign, so φ never
    /// flips) that growth diverges — so callers that know the local
    /// geometry scale clamp ω to it between batches.
    pub fn clamp_ceiling(&mut self, ceiling: f64) {
        assert!(ceiling > 0.0, "noise-norm ceiling must be positive, got {ceiling}");
        self.omega = self.omega.min(ceiling).max(self.floor);
    }

    /// One controller step from a batch's positive fraction:
    /// `ρ = 0.5 − p₊`, `φ ← −sign(ρ)·φ` (unchanged for ρ = 0, which would
    /// otherwise zero φ and freeze the controller), `ω ← ω·(1 + φ·ρ)`,
    /// floored so ω never collapses below measurable scale.
    pub fn adapt_noise_norm(&mut self, positive_fraction: f64) {
        assert!(
            (0.0..=1.0).contains(&positive_fraction),
            "positive fraction must lie in [0,1], got {positive_fraction}"
        );
        let rho = 0.5 - positive_fraction;
        if rho != 0.0 {
            self.phi = -rho.signum() * self.phi;
        }
        let factor = 1.0 + self.phi * rho;
        debug_assert!((0.5..=1.5).contains(&factor));
        self.omega = (self.omega * factor).max(self.floor);
        self.rho_history.push(rho);
    }
}

/// Where probe noise is drawn from.
#[derive(Clone, Debug)]
pub enum NoiseSampler {
    /// Isotropic Gaussian over all `d` coordinates, rescaled to exact norm ω.
    FullSpace,
    /// Low-frequency DCT coefficients lifted to the full space.
    Subspace(DctSubspace),
}

impl NoiseSampler {
    /// Number of directions the noise actually spans: the subspace dimension
    /// when sampling is constrained, the ambient dimension otherwise.
    pub fn dim(&self, ambient_dim: usize) -> usize {
        match self {
            NoiseSampler::FullSpace => ambient_dim,
            NoiseSampler::Subspace(subspace) => subspace.dim(),
        }
    }

    /// One noise vector of exact norm `omega` in ℝ^`ambient_dim`.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        ambient_dim: usize,
        omega: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        assert!(omega > 0.0, "noise norm must be positive, got {omega}");
        match self {
            NoiseSampler::FullSpace => loop {
                let raw: Vec<f64> =
                    (0..ambient_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = vecmath::norm(&raw);
                if norm > 0.0 {
                    break raw.iter().map(|&v| v * omega / norm).collect();
                }
            },
            NoiseSampler::Subspace(subspace) => {
                assert_eq!(subspace.ambient_dim(), ambient_dim);
                subspace.sample_noise(1, omega, rng).pop().expect("one sample requested")
            }
        }
    }
}

/// The normalized sign-weighted probe average and the evidence behind it.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    /// Unit vector pointing out of the original class (into the target class
    /// in targeted mode).
    pub direction: Vec<f64>,
    /// Probes that went into the average.
    pub sample_count: usize,
    /// Fraction of probes with sign +1 across all samples.
    pub positive_fraction: f64,
}

/// Outcome of one probe batch.
#[derive(Clone, Copy, Debug)]
pub struct BatchOutcome {
    /// Fraction of this batch's probes with sign +1 — the controller signal.
    pub positive_fraction: f64,
    /// Oracle queries spent (one per probe).
    pub queries: u64,
}

/// Accumulates probe evidence at a fixed boundary point so that an estimate
/// can be refined batch by batch without discarding earlier probes.
pub struct GradientAccumulator<'a> {
    anchor: Point,
    rule: SignRule,
    sampler: &'a NoiseSampler,
    samples: Vec<(Vec<f64>, i8)>,
}

impl<'a> GradientAccumulator<'a> {
    pub fn new(anchor: Point, rule: SignRule, sampler: &'a NoiseSampler) -> Self {
        GradientAccumulator { anchor, rule, sampler, samples: Vec::new() }
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Records an already-signed probe, for replay and diagnostics.
    pub fn push_sample(&mut self, eta: Vec<f64>, sign: i8) {
        assert!(sign == 1 || sign == -1, "sign must be ±1, got {sign}");
        assert_eq!(eta.len(), self.anchor.len());
        self.samples.push((eta, sign));
    }

    /// Draws `count` probes of norm `omega`, queries the oracle at the
    /// clipped probe points in one batch, and stores the signed vectors.
    /// Noise is drawn sequentially from `rng` before any query, so results
    /// are bit-identical however the oracle parallelizes the batch.
    pub fn extend<O, R>(
        &mut self,
        oracle: &O,
        count: u64,
        omega: f64,
        domain: &Domain,
        rng: &mut R,
    ) -> Result<BatchOutcome, EstimatorError>
    where
        O: DecisionOracle + ?Sized,
        R: Rng + ?Sized,
    {
        assert!(count >= 1, "a probe batch needs at least one probe");
        let d = self.anchor.len();
        let noise: Vec<Vec<f64>> =
            (0..count).map(|_| self.sampler.draw(d, omega, rng)).collect();
        let probes: Vec<Point> =
            noise.iter().map(|eta| domain.clip(&self.anchor.offset(eta, 1.0))).collect();
        let labels = oracle.classify_batch(&probes)?;
        let mut positives = 0u64;
        for (eta, label) in noise.into_iter().zip(labels) {
            let z = self.rule.sign(label);
            if z > 0 {
                positives += 1;
            }
            self.samples.push((eta, z));
        }
        Ok(BatchOutcome {
            positive_fraction: positives as f64 / count as f64,
            queries: count,
        })
    }

    /// Normalized sign-weighted average of every stored probe. Fails when
    /// the probes cancel exactly (or none exist); the caller re-samples.
    pub fn estimate(&self) -> Result<GradientEstimate, EstimatorError> {
        let d = self.anchor.len();
        let mut sum = vec![0.0; d];
        let mut positives = 0usize;
        for (eta, z) in &self.samples {
            vecmath::axpy(&mut sum, *z as f64, eta);
            if *z > 0 {
                positives += 1;
            }
        }
        let direction = vecmath::normalized(&sum).ok_or(EstimatorError::DegenerateEstimate {
            samples: self.samples.len(),
        })?;
        Ok(GradientEstimate {
            direction,
            sample_count: self.samples.len(),
            positive_fraction: if self.samples.is_empty() {
                0.0
            } else {
                positives as f64 / self.samples.len() as f64
            },
        })
    }
}

/// One-shot estimate: `n` probes of norm `scale.omega()` at `p`, aggregated
/// into a direction. Exactly `n` queries are spent. Callers that hit
/// [`EstimatorError::DegenerateEstimate`] re-sample with fresh noise.
pub fn estimate_gradient<O, R>(
    oracle: &O,
    p: &Point,
    rule: SignRule,
    n: u64,
    scale: &NoiseScaleState,
    sampler: &NoiseSampler,
    domain: &Domain,
    rng: &mut R,
) -> Result<(GradientEstimate, u64), EstimatorError>
where
    O: DecisionOracle + ?Sized,
    R: Rng + ?Sized,
{
    let mut accumulator = GradientAccumulator::new(p.clone(), rule, sampler);
    let outcome = accumulator.extend(oracle, n, scale.omega(), domain, rng)?;
    let estimate = accumulator.estimate()?;
    Ok((estimate, outcome.queries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AffineMulticlassOracle;
    use crate::point::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_rules_follow_the_label() {
        let y0 = Label(3);
        assert_eq!(label_to_sign(Label(3), y0), -1);
        assert_eq!(label_to_sign(Label(7), y0), 1);
        let rule = SignRule::IsTarget(Label(5));
        assert_eq!(rule.sign(Label(5)), 1);
        assert_eq!(rule.sign(Label(3)), -1);
        assert_eq!(rule.sign(Label(0)), -1);
    }

    #[test]
    fn controller_steps_match_hand_computation() {
        // Mostly-flipping probes: ρ = 0.5 − 0.8 = −0.3, φ stays −1, ω grows
        // by the factor 1 + (−1)(−0.3) = 1.3.
        let mut state = NoiseScaleState::new(1.0, 1e-9);
        state.adapt_noise_norm(0.8);
        assert!((state.omega() - 1.3).abs() < 1e-12);
        assert_eq!(state.phi(), -1.0);

        // Balanced probes: nothing moves.
        let mut state = NoiseScaleState::new(1.0, 1e-9);
        state.adapt_noise_norm(0.5);
        assert_eq!(state.omega(), 1.0);
        assert_eq!(state.phi(), -1.0);

        // Mostly-non-flipping probes: ρ = 0.3, φ flips to +1, same growth.
        let mut state = NoiseScaleState::new(1.0, 1e-9);
        state.adapt_noise_norm(0.2);
        assert!((state.omega() - 1.3).abs() < 1e-12);
        assert_eq!(state.phi(), 1.0);
        assert_eq!(state.history(), &[0.3]);
    }

    #[test]
    fn controller_never_collapses_or_flips_sign() {
        let floor = 1e-4;
        let mut state = NoiseScaleState::new(1.0, floor);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            state.adapt_noise_norm(rng.gen_range(0.0..=1.0));
            assert!(state.omega() >= floor);
            assert!(state.phi() == 1.0 || state.phi() == -1.0);
        }
        // Driving p₊ to 1 forever shrinks ω onto the floor, never below.
        for _ in 0..200 {
            state.adapt_noise_norm(1.0);
        }
        assert_eq!(state.omega(), floor);
    }

    #[test]
    fn single_positive_probe_gives_its_own_direction() {
        let sampler = NoiseSampler::FullSpace;
        let mut acc =
            GradientAccumulator::new(Point::flat(vec![0.0, 0.0]), SignRule::NotOriginal(Label(0)), &sampler);
        acc.push_sample(vec![3.0, 0.0], 1);
        let est = acc.estimate().unwrap();
        assert_eq!(est.direction, vec![1.0, 0.0]);
        assert_eq!(est.sample_count, 1);
        assert_eq!(est.positive_fraction, 1.0);
    }

    #[test]
    fn tangential_components_cancel() {
        let sampler = NoiseSampler::FullSpace;
        let mut acc =
            GradientAccumulator::new(Point::flat(vec![0.0, 0.0]), SignRule::NotOriginal(Label(0)), &sampler);
        acc.push_sample(vec![1.0, 1.0], 1);
        acc.push_sample(vec![1.0, -1.0], 1);
        let est = acc.estimate().unwrap();
        assert!((est.direction[0] - 1.0).abs() < 1e-12);
        assert!(est.direction[1].abs() < 1e-12);
    }

    #[test]
    fn exact_cancellation_is_degenerate() {
        let sampler = NoiseSampler::FullSpace;
        let mut acc =
            GradientAccumulator::new(Point::flat(vec![0.0, 0.0]), SignRule::NotOriginal(Label(0)), &sampler);
        acc.push_sample(vec![1.0, 0.0], 1);
        acc.push_sample(vec![1.0, 0.0], -1);
        assert!(matches!(
            acc.estimate(),
            Err(EstimatorError::DegenerateEstimate { samples: 2 })
        ));
    }

    /// Binary oracle in d dimensions whose boundary passes through the box
    /// center with normal e₁.
    fn centered_halfplane(d: usize) -> (AffineMulticlassOracle, Point) {
        let domain = Domain::unit(Shape::flat(d));
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        let oracle = AffineMulticlassOracle::binary(w, 0.5, domain).unwrap();
        let p = Point::flat(vec![0.5; d]);
        (oracle, p)
    }

    fn median(mut values: Vec<f64>) -> f64 {
        values.sort_by(|a, b| a.total_cmp(b));
        values[values.len() / 2]
    }

    #[test]
    fn estimate_aligns_with_the_true_normal_and_improves_with_n() {
        let (oracle, p) = centered_halfplane(10);
        let domain = oracle.domain();
        let scale = NoiseScaleState::new(1e-3, 1e-9);
        let sampler = NoiseSampler::FullSpace;
        let rule = SignRule::NotOriginal(Label(0));
        let mut medians = Vec::new();
        for n in [10u64, 100, 1000] {
            let mut cosines = Vec::new();
            for seed in 0..50 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (est, queries) =
                    estimate_gradient(&oracle, &p, rule, n, &scale, &sampler, &domain, &mut rng)
                        .unwrap();
                assert_eq!(queries, n);
                let mut normal = vec![0.0; 10];
                normal[0] = 1.0;
                cosines.push(vecmath::cosine(&est.direction, &normal).unwrap());
            }
            medians.push(median(cosines));
        }
        assert!(medians[0] <= medians[1] && medians[1] <= medians[2], "{medians:?}");
        assert!(medians[2] >= 0.95, "median cosine at n=1000 was {}", medians[2]);
    }

    #[test]
    fn batches_accumulate_and_stay_deterministic() {
        let (oracle, p) = centered_halfplane(10);
        let domain = oracle.domain();
        let sampler = NoiseSampler::FullSpace;
        let rule = SignRule::NotOriginal(Label(0));
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = GradientAccumulator::new(p.clone(), rule, &sampler);
            let first = acc.extend(&oracle, 40, 1e-3, &domain, &mut rng).unwrap();
            assert_eq!(first.queries, 40);
            assert_eq!(acc.len(), 40);
            acc.extend(&oracle, 60, 1e-3, &domain, &mut rng).unwrap();
            assert_eq!(acc.len(), 100);
            acc.estimate().unwrap()
        };
        let a = run(42);
        let b = run(42);
        assert_eq!(a.direction, b.direction);
        assert!((vecmath::norm(&a.direction) - 1.0).abs() < 1e-12);
        // On a boundary through the anchor roughly half the probes flip.
        assert!(a.positive_fraction > 0.2 && a.positive_fraction < 0.8);
    }

    #[test]
    fn subspace_probes_beat_fullspace_on_bandlimited_normals() {
        // 32×32 oracle whose true normal lives in the 8×8 low-frequency
        // block: estimating inside that subspace wastes no queries on the
        // other 960 dimensions.
        let shape = Shape::new(32, 32, 1);
        let domain = Domain::unit(shape);
        let sub = DctSubspace::replicated(shape, 8).unwrap();
        let mut seed_rng = ChaCha8Rng::seed_from_u64(77);
        let gamma: Vec<f64> =
            (0..sub.dim()).map(|_| seed_rng.sample::<f64, _>(StandardNormal)).collect();
        let normal = vecmath::normalized(&sub.lift(&gamma).unwrap()).unwrap();
        let p = Point::new(shape, vec![0.5; shape.len()]);
        let b = vecmath::dot(&normal, &p.values);
        let oracle = AffineMulticlassOracle::binary(normal.clone(), b, domain).unwrap();

        let scale = NoiseScaleState::new(1e-3, 1e-9);
        let rule = SignRule::NotOriginal(Label(0));
        let run = |sampler: &NoiseSampler| {
            let mut cosines = Vec::new();
            for seed in 0..50 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (est, _) =
                    estimate_gradient(&oracle, &p, rule, 100, &scale, sampler, &domain, &mut rng)
                        .unwrap();
                cosines.push(vecmath::cosine(&est.direction, &normal).unwrap());
            }
            median(cosines)
        };
        let full = run(&NoiseSampler::FullSpace);
        let low = run(&NoiseSampler::Subspace(sub));
        assert!(
            low > full,
            "subspace median cosine {low} should beat full-space {full}"
        );
    }
}
