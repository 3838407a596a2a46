//! Non-targeted attack on an affine two-class oracle, checked against the
//! closed-form answer.
//!
//! For a halfspace classifier the smallest label-flipping perturbation is
//! the point-to-hyperplane distance, so we can print how close the attack
//! gets with a few thousand label-only queries.
//!
//! ```text
//! cargo run --example minimal_perturbation
//! ```

use qfool::attack;
use qfool::oracle::{AffineMulticlassOracle, AnalyticBoundary, DecisionOracle};
use qfool::{AttackConfig, Domain, Point, Shape};

fn main() {
    let d = 64;
    let domain = Domain::unit(Shape::flat(d));

    // Classifier: sign(w·x − b) with w uniform; x0 sits inside class 0 at
    // margin 0.35 from the boundary.
    let w = vec![1.0 / (d as f64).sqrt(); d];
    let x0 = Point::new(Shape::flat(d), vec![0.3; d]);
    let margin = 0.35;
    let b = w.iter().zip(x0.values.iter()).map(|(wi, xi)| wi * xi).sum::<f64>() + margin;
    let oracle = AffineMulticlassOracle::binary(w, b, domain).expect("valid weights");

    let truth = oracle.min_perturbation_norm(&x0).expect("analytic distance");

    let mut config = AttackConfig::default();
    config.total_budget = 4_000;
    config.rng_seed = 7;
    let resolved = config.resolve(&oracle.domain()).expect("valid config");

    let trace = attack::attack(&oracle, &x0, &resolved).expect("attack runs");

    println!("attack            {}", trace.attack);
    println!("success           {}", trace.success);
    println!("queries           {}", trace.total_queries);
    println!("final ‖v‖₂        {:.6}", trace.final_l2);
    println!("optimal ‖v‖₂      {:.6}", truth);
    println!("ratio to optimum  {:.4}", trace.final_l2 / truth);
    println!();
    println!("phase breakdown:");
    for (phase, queries) in &trace.phase_queries {
        println!("  {phase:<16} {queries}");
    }
}
