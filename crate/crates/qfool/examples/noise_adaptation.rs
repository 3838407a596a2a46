//! The noise-norm controller in isolation.
//!
//! Probes only carry information when some flip the label and some do not.
//! The controller nudges the probe norm ω after every batch: if too many
//! probes flipped, the norm shrinks; too few, it grows; the step direction
//! reverses each time the imbalance changes side. This drives the flip rate
//! toward one half.
//!
//! Here the "oracle" is a sphere of radius 1 probed from a point at radius
//! 1.001, so the right ω is small; watch it walk down from a deliberately
//! bad start.
//!
//! ```text
//! cargo run --example noise_adaptation
//! ```

use qfool::estimator::{GradientAccumulator, NoiseSampler, NoiseScaleState, SignRule};
use qfool::oracle::{DecisionOracle, SphereOracle};
use qfool::point::Bounds;
use qfool::{Domain, Point, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let d = 16;
    let domain = Domain::new(Shape::flat(d), Bounds::new(-2.0, 2.0));
    let center = vec![0.0; d];
    let oracle = SphereOracle::new(center, 1.0, domain).expect("valid sphere");

    // Anchor just outside the sphere: label flips only for tiny, well-aimed
    // noise, so a large ω is uninformative.
    let mut anchor = vec![0.0; d];
    anchor[0] = 1.001;
    let anchor = Point::new(Shape::flat(d), anchor);
    let y0 = oracle.classify(&anchor).expect("classifies");

    let mut scale = NoiseScaleState::new(0.5, 1e-12); // start ~500× too big
    let sampler = NoiseSampler::FullSpace;
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    println!("{:>5}  {:>12}  {:>6}  {:>14}", "batch", "omega", "phi", "flip fraction");
    for batch in 0..14 {
        let mut acc = GradientAccumulator::new(anchor.clone(), SignRule::NotOriginal(y0), &sampler);
        let outcome = acc
            .extend(&oracle, 50, scale.omega(), &oracle.domain(), &mut rng)
            .expect("probe batch");
        println!(
            "{batch:>5}  {:>12.6}  {:>6}  {:>14.2}",
            scale.omega(),
            scale.phi(),
            outcome.positive_fraction
        );
        scale.adapt_noise_norm(outcome.positive_fraction);
    }
    println!("\n(flip fraction settling near 0.50 means ω carries maximal information)");
}
