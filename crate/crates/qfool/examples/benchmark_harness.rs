//! End-to-end benchmark: spec file → grid of runs → summary CSV.
//!
//! Builds a tiny experiment in a temp directory — a seeded affine oracle, a
//! generated dataset, a JSON spec — then runs every (image × seed × budget)
//! cell in parallel and prints the median-MSE summary. Records land in an
//! append-only NDJSON file; re-running skips completed cells, so a crashed
//! batch resumes where it stopped.
//!
//! ```text
//! cargo run --release --example benchmark_harness
//! ```

use std::fs;

use qfool::harness::{self, ExperimentSpec, RunOptions};
use qfool::oracle::AffineMulticlassOracle;
use qfool::{dataset::Dataset, Domain, Shape};

fn main() {
    let dir = std::env::temp_dir().join("qfool_benchmark_example");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).expect("temp dir");

    // Fixture: 3-class affine oracle over 64 inputs + 6 labeled points.
    let domain = Domain::unit(Shape::flat(64));
    let oracle = AffineMulticlassOracle::seeded(3, 21, domain).expect("valid fixture");
    oracle.save(&dir.join("oracle.affine")).expect("writes weights");
    Dataset::generate(&dir.join("data"), &oracle, 6, 17).expect("writes dataset");

    let spec = r#"{
        "oracle": "affine:oracle.affine",
        "dataset": "data",
        "attack": "nontargeted",
        "budgets": [250, 1000],
        "seeds": [1, 2],
        "output": "records.ndjson"
    }"#;
    let spec_path = dir.join("experiment.json");
    fs::write(&spec_path, spec).expect("writes spec");

    let exp = ExperimentSpec::load(&spec_path).expect("spec validates");
    let options = RunOptions { force: false, workers: None };

    let records = harness::run_experiment(&exp, &options).expect("batch runs");
    println!("ran {} cells → {}\n", records.len(), exp.output.display());

    let summary = harness::summarize(&records);
    print!("{}", harness::summary_csv(&summary));

    // Run it again: everything is already on disk, so nothing new executes.
    let again = harness::run_experiment(&exp, &options).expect("batch reruns");
    println!("\nre-run loaded {} records from disk without spending queries", again.len());
}
