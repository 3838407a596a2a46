//! Traces: the MSE-vs-queries curve, JSON round-trip, and determinism.
//!
//! Every attack returns a trace holding the best distortion after each
//! query — the raw material for query-efficiency plots. Traces serialize
//! to single JSON lines, and two runs with the same seed are bit-identical
//! once wall time is masked.
//!
//! ```text
//! cargo run --example progress_curve
//! ```

use qfool::attack;
use qfool::oracle::AffineMulticlassOracle;
use qfool::trace::AttackTrace;
use qfool::{AttackConfig, Domain, Point, Shape};

fn main() {
    let d = 32;
    let domain = Domain::unit(Shape::flat(d));
    let oracle = AffineMulticlassOracle::seeded(2, 8, domain).expect("valid fixture");
    let x0 = Point::new(Shape::flat(d), vec![0.55; d]);

    let mut config = AttackConfig::default();
    config.total_budget = 1_200;
    config.rng_seed = 4;
    let resolved = config.resolve(&domain).expect("valid config");

    let trace = attack::attack(&oracle, &x0, &resolved).expect("attack runs");

    // The curve records a point whenever the best-so-far improves.
    println!("{:>8}  {:>12}", "query", "best mse");
    let step = (trace.curve.len() / 10).max(1);
    for point in trace.curve.iter().step_by(step) {
        println!("{:>8}  {:>12.5e}", point.query, point.mse);
    }
    if let Some(last) = trace.curve.last() {
        println!("{:>8}  {:>12.5e}  (final)", last.query, last.mse);
    }

    // Round-trip through JSON: nothing is lost.
    let line = serde_json::to_string(&trace).expect("serializes");
    let reloaded: AttackTrace = serde_json::from_str(&line).expect("parses");
    println!("\ntrace is one JSON line of {} bytes; round-trips exactly: {}",
        line.len(),
        reloaded == trace
    );

    // Same seed ⇒ same run, byte for byte (wall time masked).
    let rerun = attack::attack(&oracle, &x0, &resolved).expect("attack reruns");
    println!(
        "re-run with the same seed is bit-identical: {}",
        rerun.deterministic_json() == trace.deterministic_json()
    );
}
