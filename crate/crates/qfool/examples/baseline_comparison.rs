//! Three attacks, one oracle, one budget: gradient-estimating walk vs
//! random boundary walk vs pure Gaussian escalation.
//!
//! The oracle is a small seeded ReLU network over 784 inputs — the same
//! fixture family the benchmark harness uses. Lower final MSE under the
//! same query budget means better use of each label.
//!
//! ```text
//! cargo run --release --example baseline_comparison
//! ```

use qfool::baseline;
use qfool::oracle::{DecisionOracle, MlpOracle};
use qfool::{attack, AttackConfig, Domain, Point, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let shape = Shape::new(28, 28, 1);
    let oracle = MlpOracle::seeded(shape.len(), &[24, 24], 10, 1, Some(Domain::unit(shape)))
        .expect("valid fixture");

    // A mid-gray input with a little texture, away from the box walls.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let values: Vec<f64> = (0..shape.len()).map(|_| 0.35 + 0.3 * rng.gen::<f64>()).collect();
    let x0 = Point::new(shape, values);
    println!("input label {:?}\n", oracle.classify(&x0).expect("classifies"));

    let budget = 2_000;
    let mut config = AttackConfig::default();
    config.total_budget = budget;
    config.rng_seed = 3;
    let resolved = config.resolve(&oracle.domain()).expect("valid config");

    println!("{:<14} {:>12} {:>10} {:>8}", "attack", "final mse", "queries", "success");
    let traces = [
        attack::attack(&oracle, &x0, &resolved).expect("attack runs"),
        baseline::boundary_attack(&oracle, &x0, None, &resolved).expect("baseline runs"),
        baseline::gaussian_noise_attack(&oracle, &x0, &resolved).expect("baseline runs"),
    ];
    for trace in &traces {
        println!(
            "{:<14} {:>12.4e} {:>10} {:>8}",
            trace.attack, trace.final_mse, trace.total_queries, trace.success
        );
    }
    println!("\n(same {budget}-query budget for all three)");
}
