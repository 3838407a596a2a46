//! Targeted attack: force a chosen class, not just any flip.
//!
//! The walk starts from an example of the target class, pulls it toward the
//! original image along estimated gradients, and reports how parallel the
//! accumulated perturbation stays to the straight original→start line — a
//! diagnostic for "was that long march necessary, or is the boundary flat?"
//!
//! ```text
//! cargo run --example targeted_walk
//! ```

use qfool::attack;
use qfool::oracle::{AffineMulticlassOracle, DecisionOracle};
use qfool::{AttackConfig, Domain, Point, Shape};

fn main() {
    let d = 48;
    let shape = Shape::flat(d);
    let domain = Domain::unit(shape);

    // Three classes split by two parallel planes along the first axis:
    // class 0 low, class 1 middle, class 2 high.
    let mut w1 = vec![0.0; d];
    w1[0] = 1.0;
    let mut w2 = vec![0.0; d];
    w2[0] = 2.0;
    let weights = vec![vec![0.0; d], w1, w2];
    let biases = vec![0.0, -0.45, -1.35];
    let oracle = AffineMulticlassOracle::new(weights, biases, domain).expect("valid weights");

    let mut x0_values = vec![0.5; d];
    x0_values[0] = 0.1; // class 0
    let x0 = Point::new(shape, x0_values);

    let mut target_values = vec![0.5; d];
    target_values[0] = 0.95; // class 2
    let target_example = Point::new(shape, target_values);

    println!("original label {:?}", oracle.classify(&x0).expect("classifies"));
    println!("target example {:?}", oracle.classify(&target_example).expect("classifies"));

    let mut config = AttackConfig::default();
    config.total_budget = 6_000;
    config.rng_seed = 11;
    let resolved = config.resolve(&oracle.domain()).expect("valid config");

    let trace =
        attack::attack_targeted(&oracle, &x0, &target_example, &resolved).expect("attack runs");

    println!();
    println!("success            {}", trace.success);
    println!("final label        {:?}", trace.final_label);
    println!(
        "final ‖v‖₂         {:.4}  (straight-line gap was {:.4})",
        trace.final_l2,
        x0.l2_distance(&target_example)
    );
    println!("queries            {}", trace.total_queries);
    if let Some(cosine) = trace.parallelism_cosine {
        println!("parallelism cos    {cosine:.4}  (≈1 ⇒ the walk went straight at the target class)");
    }
    println!("iterations         {}", trace.iterations.len());
}
