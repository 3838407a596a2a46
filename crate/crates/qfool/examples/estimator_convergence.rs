//! How fast the label-only gradient estimate aligns with the true normal.
//!
//! At a boundary point, probing with small random noise and keeping only
//! the flip/no-flip sign of each probe yields a direction estimate. This
//! prints the cosine between that estimate and the known hyperplane normal
//! as the probe count grows.
//!
//! ```text
//! cargo run --example estimator_convergence
//! ```

use qfool::estimator::{estimate_gradient, NoiseSampler, NoiseScaleState, SignRule};
use qfool::oracle::{AffineMulticlassOracle, AnalyticBoundary, DecisionOracle};
use qfool::{vecmath, Domain, Point, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let d = 32;
    let domain = Domain::unit(Shape::flat(d));
    let w: Vec<f64> = (0..d).map(|i| ((i as f64 * 0.7).sin() + 1.5) / (d as f64).sqrt()).collect();
    // Put the anchor exactly on the decision boundary: w·p = b.
    let p = Point::new(Shape::flat(d), vec![0.5; d]);
    let b = w.iter().map(|wi| wi * 0.5).sum::<f64>();
    let oracle = AffineMulticlassOracle::binary(w, b, domain).expect("valid weights");

    let truth = oracle.boundary_normal(&p).expect("normal exists");
    let y0 = oracle.classify(&p).expect("classifies");

    let scale = NoiseScaleState::new(1e-3, 1e-12);
    let sampler = NoiseSampler::FullSpace;

    println!("{:>8}  {:>10}", "probes", "cosine");
    for &n in &[10u64, 30, 100, 300, 1_000, 3_000] {
        // Average the alignment over a few seeds so the trend is visible.
        let mut cosines = Vec::new();
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (estimate, _) = estimate_gradient(
                &oracle,
                &p,
                SignRule::NotOriginal(y0),
                n,
                &scale,
                &sampler,
                &oracle.domain(),
                &mut rng,
            )
            .expect("estimate exists");
            cosines.push(vecmath::cosine(&estimate.direction, &truth).expect("nonzero vectors").abs());
        }
        let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
        println!("{n:>8}  {mean:>10.4}");
    }
    println!("\n(1.0 would be perfect alignment with the true boundary normal)");
}
