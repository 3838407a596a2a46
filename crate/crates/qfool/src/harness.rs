//! Experiment harness: one attack over a dataset, across budgets × seeds,
//! with crash-safe persistence and median-curve summaries.
//!
//! An experiment is described by a JSON [`ExperimentSpec`] file. Loading it
//! validates everything it references — the dataset directory, the oracle
//! spec string, the attack name, the config — and reports *all* problems at
//! once rather than the first. Relative paths inside the spec (dataset,
//! output, and `FILE` parts of `affine:FILE`/`mlp:FILE` oracle strings)
//! resolve against the spec file's own directory.
//!
//! Results persist as newline-delimited JSON, one [`RunRecord`] per
//! completed cell, appended and flushed as each cell finishes so a crash
//! loses at most the cell in flight. Re-running the same spec skips cells
//! whose key `(image, attack, budget, seed)` already appears in the output
//! file unless forced. Cells that fail (say, the budget is too small to find
//! any starting point) become records with `error` set; they never abort the
//! batch.
//!
//! The summary table gives, per budget, the median over all cells of the
//! final mean squared perturbation — the median-distance-versus-queries
//! curve sampled at the configured budgets. Medians are recomputed from the
//! raw records; the summary holds nothing that cannot be re-derived.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{self, AttackError};
use crate::baseline;
use crate::config::AttackConfig;
use crate::dataset::{Dataset, DatasetItem};
use crate::metrics;
use crate::oracle::{parse_oracle_spec, DecisionOracle};
use crate::point::{Domain, Label};
use crate::trace::CurvePoint;

/// Environment variable naming the default worker-pool size. Explicit
/// `RunOptions::workers` wins over it; unset (or unparsable) falls back to
/// one worker per core.
pub const WORKERS_ENV: &str = "QFOOL_WORKERS";

/// Maximum stored points per best-MSE curve; see [`downsample_curve`].
pub const CURVE_POINTS_MAX: usize = 128;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Spec validation failed; `problems` lists every issue found.
    #[error("experiment spec {path} is invalid:\n  - {}", problems.join("\n  - "))]
    Invalid { path: String, problems: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// Declarative description of an experiment, stored as JSON.
///
/// `attack` is one of `nontargeted`, `boundary`, or `gaussian`; setting
/// `config.subspace_side` turns `nontargeted` into its low-frequency
/// subspace variant. Targeted runs need a per-image target example, which
/// datasets do not carry — run those through the attack API or the
/// command-line `attack` subcommand instead.
///
/// `config.total_budget` and `config.rng_seed` are ignored here: every cell
/// overrides them with its own budget and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Oracle spec string (`affine:FILE`, `mlp:FILE`, `sphere:c,R`,
    /// `http:URL`).
    pub oracle: String,
    /// Dataset directory (manifest plus point files).
    pub dataset: PathBuf,
    /// Attack name; see the type docs.
    pub attack: String,
    #[serde(default)]
    pub config: AttackConfig,
    /// Query budgets to run every image × seed under.
    pub budgets: Vec<u64>,
    /// Attack seeds to run every image × budget under.
    pub seeds: Vec<u64>,
    /// NDJSON records file, appended to incrementally.
    pub output: PathBuf,
}

/// A validated, loaded experiment: spec plus everything it referenced.
///
/// Debug output elides the oracle (trait objects carry no debug form).
pub struct Experiment {
    pub spec: ExperimentSpec,
    /// Path the spec was loaded from (for error messages).
    pub spec_path: PathBuf,
    pub dataset: Dataset,
    pub oracle: Box<dyn DecisionOracle + Send + Sync>,
    /// Output path with relative components resolved.
    pub output: PathBuf,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("spec", &self.spec)
            .field("spec_path", &self.spec_path)
            .field("dataset_items", &self.dataset.len())
            .field("output", &self.output)
            .finish_non_exhaustive()
    }
}

impl ExperimentSpec {
    /// Reads and fully validates a spec file. Every problem found — missing
    /// dataset, bad oracle string, unknown attack, empty budget list — is
    /// collected into one [`HarnessError::Invalid`].
    pub fn load(path: &Path) -> Result<Experiment, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let spec: ExperimentSpec =
            serde_json::from_str(&text).map_err(|e| HarnessError::Invalid {
                path: path.display().to_string(),
                problems: vec![format!("not a valid spec: {e}")],
            })?;
        let base = path.parent().unwrap_or(Path::new("."));

        let mut problems = Vec::new();
        if spec.budgets.is_empty() {
            problems.push("budgets list is empty".into());
        }
        if spec.seeds.is_empty() {
            problems.push("seeds list is empty".into());
        }
        for (name, list) in [("budgets", &spec.budgets), ("seeds", &spec.seeds)] {
            let mut seen = HashSet::new();
            for v in list {
                if !seen.insert(v) {
                    problems.push(format!("{name} list repeats {v}; cells would collide"));
                    break;
                }
            }
        }
        if !matches!(spec.attack.as_str(), "nontargeted" | "boundary" | "gaussian") {
            let hint = if spec.attack == "targeted" {
                " (targeted runs need a per-image target example; use the attack API or the `attack` subcommand)"
            } else {
                ""
            };
            problems.push(format!(
                "unknown attack '{}'; expected nontargeted, boundary, or gaussian{hint}",
                spec.attack
            ));
        }

        let dataset_dir = resolve(base, &spec.dataset);
        let dataset = match Dataset::load(&dataset_dir) {
            Ok(ds) if ds.is_empty() => {
                problems.push(format!("dataset {} has no items", dataset_dir.display()));
                None
            }
            Ok(ds) => Some(ds),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };

        let oracle = match &dataset {
            Some(ds) => {
                let oracle_spec = resolve_oracle_files(&spec.oracle, base);
                match parse_oracle_spec(&oracle_spec, Some(ds.domain)) {
                    Ok(oracle) => Some(oracle),
                    Err(e) => {
                        problems.push(format!("oracle '{}': {e}", spec.oracle));
                        None
                    }
                }
            }
            // Without a dataset there is no domain hint; the oracle problem
            // would be a duplicate of the dataset one.
            None => None,
        };

        if let Some(ds) = &dataset {
            if let Err(e) = spec.config.resolve(&ds.domain) {
                problems.push(format!("config: {e}"));
            }
        }

        if !problems.is_empty() {
            return Err(HarnessError::Invalid {
                path: path.display().to_string(),
                problems,
            });
        }
        Ok(Experiment {
            output: resolve(base, &spec.output),
            spec_path: path.to_path_buf(),
            dataset: dataset.expect("validated"),
            oracle: oracle.expect("validated"),
            spec,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Resolves the `FILE` part of file-backed oracle specs against `base`.
fn resolve_oracle_files(spec: &str, base: &Path) -> String {
    match spec.split_once(':') {
        Some((scheme @ ("affine" | "mlp"), file)) => {
            format!("{scheme}:{}", resolve(base, Path::new(file)).display())
        }
        _ => spec.to_string(),
    }
}

/// The attack name records will carry, with the subspace marker applied.
pub fn effective_attack_name(attack: &str, config: &AttackConfig) -> String {
    if attack == "nontargeted" && config.subspace_side.is_some() {
        format!("{attack}-subspace")
    } else {
        attack.to_string()
    }
}

/// One persisted experiment cell. Every field is derived from the attack
/// trace; the full trace is not stored (records must stay small enough to
/// append thousands of).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Dataset item id.
    pub image: String,
    /// Attack RNG seed for this cell.
    pub seed: u64,
    /// Effective attack name (`nontargeted-subspace` when a side was set).
    pub attack: String,
    /// Query budget for this cell.
    pub budget: u64,
    /// Whether the attack confirmed at least one adversarial point.
    pub success: bool,
    /// Final `(1/d)·‖v‖₂²`; zero when unsuccessful.
    pub final_mse: f64,
    /// Final `‖v‖₂`; zero when unsuccessful.
    pub final_l2: f64,
    /// Label of the final adversarial point.
    pub final_label: Option<Label>,
    /// Oracle calls actually spent. Attacks stop issuing new work at the
    /// budget but let an in-flight boundary search finish, so this can
    /// exceed `budget` by at most one bisection (a few dozen queries).
    pub total_queries: u64,
    /// Query count at which the configured perturbation threshold was first
    /// met, if one was configured and met.
    pub queries_to_threshold: Option<u64>,
    /// Best-so-far MSE change points, log-downsampled to at most
    /// [`CURVE_POINTS_MAX`] entries; the exact final value is always last.
    pub curve: Vec<CurvePoint>,
    /// Total queries per boundary-walk iteration (empty for baselines).
    pub iteration_queries: Vec<u64>,
    /// Failure message when the cell produced no trace; result fields are
    /// zeroed in that case.
    pub error: Option<String>,
    /// Wall-clock time for the cell, in milliseconds.
    pub wall_time_ms: f64,
}

impl RunRecord {
    /// Key identifying a cell across runs.
    pub fn key(&self) -> (String, String, u64, u64) {
        (self.image.clone(), self.attack.clone(), self.budget, self.seed)
    }

    /// JSON with wall time zeroed: equal strings ⇔ bit-identical cells.
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.wall_time_ms = 0.0;
        serde_json::to_string(&clone).expect("record serializes")
    }
}

/// Knobs for [`run_experiment`] and [`subspace_sweep`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Re-run cells whose keys already appear in the output file.
    pub force: bool,
    /// Worker threads for image-level parallelism. `None` consults the
    /// [`WORKERS_ENV`] variable, then defaults to one per core.
    pub workers: Option<usize>,
}

/// Reads [`WORKERS_ENV`]; unset, empty, or unparsable values yield `None`.
pub fn worker_count_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok()
}

fn with_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    let threads = workers.or_else(worker_count_from_env).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Parses an NDJSON records file, skipping lines that do not parse (a crash
/// can truncate the final line; those cells simply re-run).
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter_map(|line| serde_json::from_str(line).ok())
        .collect())
}

/// Runs every `image × seed × budget` cell of the experiment, appending each
/// record to the output file as it completes.
///
/// Concurrency is across images; one image's cells run in order on one
/// worker. The returned list covers the full cell grid in deterministic
/// `image, seed, budget` order — including previously-completed cells read
/// back from the output file — so its content depends only on the spec and
/// seeds, not on scheduling. The file itself is append-ordered by
/// completion.
pub fn run_experiment(
    exp: &Experiment,
    options: &RunOptions,
) -> Result<Vec<RunRecord>, HarnessError> {
    let attack_label = effective_attack_name(&exp.spec.attack, &exp.spec.config);

    // Previously completed cells, unless forced to redo them.
    let mut existing: BTreeMap<(String, String, u64, u64), RunRecord> = BTreeMap::new();
    let mut needs_newline = false;
    if exp.output.exists() {
        if !options.force {
            for record in load_records(&exp.output)? {
                existing.insert(record.key(), record);
            }
        }
        let bytes = fs::read(&exp.output).map_err(io_err(&exp.output))?;
        needs_newline = bytes.last().is_some_and(|&b| b != b'\n');
    }

    if let Some(parent) = exp.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&exp.output)
        .map_err(io_err(&exp.output))?;
    let appender = Mutex::new(file);
    if needs_newline {
        // Heal a crash-truncated final line so appended records stay
        // one-per-line.
        writeln!(appender.lock().expect("appender lock")).map_err(io_err(&exp.output))?;
    }

    // Work grouped per image: Vec<(image index, Vec<(seed, budget)>)>.
    let mut per_image: Vec<(usize, Vec<(u64, u64)>)> = Vec::new();
    for (index, item) in exp.dataset.items.iter().enumerate() {
        let mut cells = Vec::new();
        for &seed in &exp.spec.seeds {
            for &budget in &exp.spec.budgets {
                let key = (item.id.clone(), attack_label.clone(), budget, seed);
                if !existing.contains_key(&key) {
                    cells.push((seed, budget));
                }
            }
        }
        if !cells.is_empty() {
            per_image.push((index, cells));
        }
    }

    let fresh: Mutex<Vec<RunRecord>> = Mutex::new(Vec::new());
    let append_error: Mutex<Option<HarnessError>> = Mutex::new(None);
    with_pool(options.workers, || {
        per_image.par_iter().for_each(|(index, cells)| {
            let item = &exp.dataset.items[*index];
            for &(seed, budget) in cells {
                let record = run_cell(
                    exp.oracle.as_ref(),
                    &exp.spec.attack,
                    &attack_label,
                    &exp.spec.config,
                    &exp.dataset.domain,
                    item,
                    seed,
                    budget,
                );
                let line = serde_json::to_string(&record).expect("record serializes");
                {
                    let mut file = appender.lock().expect("appender lock");
                    if let Err(e) = writeln!(file, "{line}").and_then(|()| file.flush()) {
                        let mut slot = append_error.lock().expect("error lock");
                        slot.get_or_insert(HarnessError::Io {
                            path: exp.output.display().to_string(),
                            source: e,
                        });
                    }
                }
                fresh.lock().expect("results lock").push(record);
            }
        });
    })?;
    if let Some(e) = append_error.into_inner().expect("error lock") {
        return Err(e);
    }

    // Merge fresh and pre-existing records into deterministic grid order.
    let mut by_key: BTreeMap<(String, String, u64, u64), RunRecord> = existing;
    for record in fresh.into_inner().expect("results lock") {
        by_key.insert(record.key(), record);
    }
    let mut ordered = Vec::with_capacity(exp.dataset.len() * exp.spec.seeds.len() * exp.spec.budgets.len());
    for item in &exp.dataset.items {
        for &seed in &exp.spec.seeds {
            for &budget in &exp.spec.budgets {
                let key = (item.id.clone(), attack_label.clone(), budget, seed);
                if let Some(record) = by_key.get(&key) {
                    ordered.push(record.clone());
                }
            }
        }
    }
    Ok(ordered)
}

/// Runs one cell; failures become error records, never panics or aborts.
#[allow(clippy::too_many_arguments)]
fn run_cell(
    oracle: &(dyn DecisionOracle + Send + Sync),
    attack: &str,
    attack_label: &str,
    base_config: &AttackConfig,
    domain: &Domain,
    item: &DatasetItem,
    seed: u64,
    budget: u64,
) -> RunRecord {
    let started = Instant::now();
    let mut config = base_config.clone();
    config.total_budget = budget;
    config.rng_seed = seed;

    let outcome = config
        .resolve(domain)
        .map_err(AttackError::from)
        .and_then(|resolved| match attack {
            "nontargeted" => attack::attack(oracle, &item.point, &resolved),
            "boundary" => baseline::boundary_attack(oracle, &item.point, None, &resolved),
            "gaussian" => baseline::gaussian_noise_attack(oracle, &item.point, &resolved),
            other => Err(AttackError::Precondition(format!("unknown attack '{other}'"))),
        });

    match outcome {
        Ok(trace) => RunRecord {
            image: item.id.clone(),
            seed,
            attack: trace.attack,
            budget,
            success: trace.success,
            final_mse: trace.final_mse,
            final_l2: trace.final_l2,
            final_label: trace.final_label,
            total_queries: trace.total_queries,
            queries_to_threshold: trace.queries_to_threshold,
            curve: downsample_curve(&trace.curve, CURVE_POINTS_MAX),
            iteration_queries: trace.iterations.iter().map(|it| it.total_queries).collect(),
            error: None,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        },
        Err(e) => RunRecord {
            image: item.id.clone(),
            seed,
            attack: attack_label.to_string(),
            budget,
            success: false,
            final_mse: 0.0,
            final_l2: 0.0,
            final_label: None,
            total_queries: 0,
            queries_to_threshold: None,
            curve: Vec::new(),
            iteration_queries: Vec::new(),
            error: Some(e.to_string()),
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    }
}

/// Keeps at most `max` curve points: a log-spaced subset of the change
/// points plus, always, the first and the exact last. The result is a
/// subset of the input, so monotonicity and the final value are preserved
/// exactly.
pub fn downsample_curve(curve: &[CurvePoint], max: usize) -> Vec<CurvePoint> {
    assert!(max >= 2, "a curve needs at least first and last");
    if curve.len() <= max {
        return curve.to_vec();
    }
    let first = curve.first().expect("non-empty").query.max(1) as f64;
    let last = curve.last().expect("non-empty").query as f64;
    let ratio = (last / first).max(1.0);
    let mut keep = std::collections::BTreeSet::new();
    keep.insert(0);
    keep.insert(curve.len() - 1);
    for k in 0..max - 1 {
        let target = first * ratio.powf(k as f64 / (max - 1) as f64);
        let idx = curve.partition_point(|cp| (cp.query as f64) <= target);
        if idx > 0 {
            keep.insert(idx - 1);
        }
    }
    keep.into_iter().map(|i| curve[i]).collect()
}

/// One row of the per-(attack, budget) summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub attack: String,
    pub budget: u64,
    /// Median final MSE over successful cells; `None` when none succeeded.
    pub median_mse: Option<f64>,
    /// Successful cells / all cells (error cells count as failures).
    pub success_rate: f64,
    /// Median of `queries_to_threshold` over cells that reached τ.
    pub median_queries_to_tau: Option<f64>,
}

/// Groups records by (attack, budget) and takes medians. This is the
/// median-MSE-after-n-queries curve sampled at the configured budgets.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, u64), Vec<&RunRecord>> = BTreeMap::new();
    for record in records {
        groups.entry((record.attack.clone(), record.budget)).or_default().push(record);
    }
    groups
        .into_iter()
        .map(|((attack, budget), cells)| {
            let mses: Vec<f64> = cells.iter().filter(|r| r.success).map(|r| r.final_mse).collect();
            let taus: Vec<f64> = cells
                .iter()
                .filter_map(|r| r.queries_to_threshold)
                .map(|q| q as f64)
                .collect();
            SummaryRow {
                attack,
                budget,
                median_mse: metrics::median(&mses).ok(),
                success_rate: mses.len() as f64 / cells.len() as f64,
                median_queries_to_tau: metrics::median(&taus).ok(),
            }
        })
        .collect()
}

/// Renders summary rows as CSV; absent medians become `na`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("attack,budget,median_mse,success_rate,median_queries_to_tau\n");
    for row in rows {
        let mse = row.median_mse.map_or("na".into(), |v| format!("{v}"));
        let tau = row.median_queries_to_tau.map_or("na".into(), |v| format!("{v}"));
        out.push_str(&format!(
            "{},{},{mse},{},{tau}\n",
            row.attack, row.budget, row.success_rate
        ));
    }
    out
}

/// One row of a subspace sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Subspace side √m.
    pub side: usize,
    /// Median final `‖v‖₂` over successful cells; `None` when none succeeded.
    pub median_final_l2: Option<f64>,
    pub success_rate: f64,
}

/// Runs the subspace attack at each side in `sides` over every image × seed
/// at the spec's *first* budget (a sweep compares sides at equal cost) and
/// reports the median final perturbation norm per side — the data behind
/// the U-shaped dimension-versus-distance curve.
///
/// Sweep cells are not persisted; the table is returned (and printed by the
/// `bench` subcommand).
pub fn subspace_sweep(
    exp: &Experiment,
    sides: &[usize],
    options: &RunOptions,
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut problems = Vec::new();
    if sides.is_empty() {
        problems.push("no subspace sides given".into());
    }
    let min_side = exp.dataset.domain.shape.min_side();
    for &side in sides {
        if side == 0 {
            problems.push("subspace side 0 is not a subspace".into());
        } else if side > min_side {
            problems.push(format!(
                "subspace side {side} exceeds the {min_side}-pixel spatial extent of shape {}",
                exp.dataset.domain.shape
            ));
        }
    }
    if exp.spec.attack != "nontargeted" {
        problems.push(format!(
            "subspace sweep runs the nontargeted boundary walk; spec names '{}'",
            exp.spec.attack
        ));
    }
    if !problems.is_empty() {
        return Err(HarnessError::Invalid {
            path: exp.spec_path.display().to_string(),
            problems,
        });
    }

    let budget = exp.spec.budgets[0];
    let rows = with_pool(options.workers, || {
        sides
            .iter()
            .map(|&side| {
                let mut config = exp.spec.config.clone();
                config.subspace_side = Some(side);
                let attack_label = effective_attack_name(&exp.spec.attack, &config);
                let records: Vec<RunRecord> = exp
                    .dataset
                    .items
                    .par_iter()
                    .flat_map_iter(|item| {
                        exp.spec.seeds.iter().map(|&seed| {
                            run_cell(
                                exp.oracle.as_ref(),
                                &exp.spec.attack,
                                &attack_label,
                                &config,
                                &exp.dataset.domain,
                                item,
                                seed,
                                budget,
                            )
                        })
                    })
                    .collect();
                let l2s: Vec<f64> =
                    records.iter().filter(|r| r.success).map(|r| r.final_l2).collect();
                SweepRow {
                    side,
                    median_final_l2: metrics::median(&l2s).ok(),
                    success_rate: l2s.len() as f64 / records.len() as f64,
                }
            })
            .collect()
    })?;
    Ok(rows)
}

/// Renders sweep rows as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("side,median_final_l2,success_rate\n");
    for row in rows {
        let l2 = row.median_final_l2.map_or("na".into(), |v| format!("{v}"));
        out.push_str(&format!("{},{l2},{}\n", row.side, row.success_rate));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AffineMulticlassOracle;
    use crate::point::Shape;
    use tempfile::TempDir;

    /// Dataset + affine oracle + spec file in one temp directory.
    fn fixture(dir: &Path, images: usize, attack: &str, budgets: &[u64], seeds: &[u64]) -> PathBuf {
        let domain = Domain::unit(Shape::flat(8));
        let w = vec![1.0 / (8f64).sqrt(); 8];
        let oracle = AffineMulticlassOracle::binary(w, 8f64.sqrt() * 0.5 + 0.2, domain).unwrap();
        oracle.save(&dir.join("oracle.affine")).unwrap();
        Dataset::generate(&dir.join("data"), &oracle, images, 77).unwrap();
        let spec = serde_json::json!({
            "oracle": "affine:oracle.affine",
            "dataset": "data",
            "attack": attack,
            "budgets": budgets,
            "seeds": seeds,
            "output": "out/records.ndjson",
        });
        let path = dir.join("spec.json");
        fs::write(&path, spec.to_string()).unwrap();
        path
    }

    #[test]
    fn cell_grid_is_complete_and_summary_has_one_row_per_budget() {
        let dir = TempDir::new().unwrap();
        let spec = fixture(dir.path(), 2, "nontargeted", &[300, 600], &[1]);
        let exp = ExperimentSpec::load(&spec).unwrap();
        let records = run_experiment(&exp, &RunOptions::default()).unwrap();
        assert_eq!(records.len(), 4, "2 images × 1 seed × 2 budgets");
        assert!(records.iter().all(|r| r.error.is_none() && r.success));
        // Budget plus at most one in-flight boundary search of slack.
        assert!(records.iter().all(|r| r.total_queries <= r.budget + 64));

        let summary = summarize(&records);
        assert_eq!(summary.len(), 2);
        assert!(summary.iter().all(|row| row.success_rate == 1.0));
        let csv = summary_csv(&summary);
        assert!(csv.starts_with("attack,budget,median_mse,success_rate,median_queries_to_tau\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn rerun_skips_completed_cells_and_is_deterministic() {
        let dir = TempDir::new().unwrap();
        let spec = fixture(dir.path(), 2, "gaussian", &[200], &[0, 1]);
        let exp = ExperimentSpec::load(&spec).unwrap();
        let first = run_experiment(&exp, &RunOptions::default()).unwrap();
        let lines_after_first =
            fs::read_to_string(&exp.output).unwrap().lines().count();

        let second = run_experiment(&exp, &RunOptions::default()).unwrap();
        let lines_after_second =
            fs::read_to_string(&exp.output).unwrap().lines().count();
        assert_eq!(lines_after_first, lines_after_second, "second run appended nothing");
        assert_eq!(first.len(), second.len());
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.deterministic_json(), b.deterministic_json());
        }

        // Forced re-run appends fresh records with identical content.
        let forced = run_experiment(&exp, &RunOptions { force: true, workers: None }).unwrap();
        let lines_after_forced =
            fs::read_to_string(&exp.output).unwrap().lines().count();
        assert_eq!(lines_after_forced, 2 * lines_after_first);
        for (a, b) in first.iter().zip(&forced) {
            assert_eq!(a.deterministic_json(), b.deterministic_json());
        }
    }

    #[test]
    fn truncated_final_line_is_healed_and_rerun() {
        let dir = TempDir::new().unwrap();
        let spec = fixture(dir.path(), 2, "gaussian", &[150], &[4]);
        let exp = ExperimentSpec::load(&spec).unwrap();
        run_experiment(&exp, &RunOptions::default()).unwrap();

        // Chop the file mid-record, as a crash would.
        let full = fs::read_to_string(&exp.output).unwrap();
        let cut = full.len() - 17;
        fs::write(&exp.output, &full[..cut]).unwrap();

        let records = run_experiment(&exp, &RunOptions::default()).unwrap();
        assert_eq!(records.len(), 2, "damaged cell re-ran");
        let healed = fs::read_to_string(&exp.output).unwrap();
        // Every complete line parses; the truncated one is inert garbage.
        let parsed = load_records(&exp.output).unwrap();
        assert_eq!(parsed.len(), 2);
        assert!(healed.ends_with('\n'));
    }

    #[test]
    fn per_cell_failures_are_recorded_not_fatal() {
        let dir = TempDir::new().unwrap();
        // Budget 2 cannot even finish initial search; every cell fails.
        let spec = fixture(dir.path(), 2, "nontargeted", &[2], &[0]);
        let exp = ExperimentSpec::load(&spec).unwrap();
        let records = run_experiment(&exp, &RunOptions::default()).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| !r.success && r.error.is_some()));
        let summary = summarize(&records);
        assert_eq!(summary[0].success_rate, 0.0);
        assert_eq!(summary[0].median_mse, None);
    }

    #[test]
    fn invalid_specs_list_every_problem_at_once() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("spec.json");
        fs::write(
            &path,
            serde_json::json!({
                "oracle": "affine:nowhere.affine",
                "dataset": "missing-dir",
                "attack": "quantum",
                "budgets": [],
                "seeds": [3, 3],
                "output": "out.ndjson",
            })
            .to_string(),
        )
        .unwrap();
        let err = ExperimentSpec::load(&path).unwrap_err();
        let HarnessError::Invalid { problems, .. } = &err else {
            panic!("expected Invalid, got {err:?}");
        };
        let text = problems.join("\n");
        assert!(text.contains("budgets list is empty"), "{text}");
        assert!(text.contains("repeats 3"), "{text}");
        assert!(text.contains("quantum"), "{text}");
        assert!(text.contains("missing-dir"), "{text}");
        // Oracle problem is withheld without a dataset (no domain to hint),
        // so exactly these four.
        assert_eq!(problems.len(), 4, "{text}");
    }

    #[test]
    fn downsampling_keeps_endpoints_monotonicity_and_budget_cap() {
        let curve: Vec<CurvePoint> = (0..2000)
            .map(|i| CurvePoint { query: (i + 1) * 3, mse: 1.0 / (i + 1) as f64 })
            .collect();
        let down = downsample_curve(&curve, CURVE_POINTS_MAX);
        assert!(down.len() <= CURVE_POINTS_MAX);
        assert!(down.len() > 30, "log grid should keep a healthy sample");
        assert_eq!(down.first(), curve.first().map(|c| c).copied().as_ref());
        assert_eq!(down.last(), curve.last().map(|c| c).copied().as_ref());
        assert!(down.windows(2).all(|w| w[0].query < w[1].query && w[0].mse > w[1].mse));

        // Short curves pass through untouched.
        assert_eq!(downsample_curve(&curve[..5], CURVE_POINTS_MAX), curve[..5].to_vec());
    }

    #[test]
    fn sweep_validates_sides_exhaustively() {
        let dir = TempDir::new().unwrap();
        let spec = fixture(dir.path(), 1, "nontargeted", &[200], &[0]);
        let exp = ExperimentSpec::load(&spec).unwrap();
        // Dataset shape is flat (1×8×1): min spatial side is 1.
        let err = subspace_sweep(&exp, &[0, 2], &RunOptions::default()).unwrap_err();
        let HarnessError::Invalid { problems, .. } = &err else {
            panic!("expected Invalid, got {err:?}");
        };
        assert_eq!(problems.len(), 2, "{problems:?}");
    }

    #[test]
    fn sweep_single_side_yields_single_row() {
        let dir = TempDir::new().unwrap();
        // 3×3 image shape so side 2 is a genuine subspace.
        let domain = Domain::unit(Shape::new(3, 3, 1));
        let w = vec![1.0 / 3.0; 9];
        let oracle = AffineMulticlassOracle::binary(w, 1.7, domain).unwrap();
        oracle.save(&dir.path().join("oracle.affine")).unwrap();
        Dataset::generate(&dir.path().join("data"), &oracle, 2, 5).unwrap();
        let spec_path = dir.path().join("spec.json");
        fs::write(
            &spec_path,
            serde_json::json!({
                "oracle": "affine:oracle.affine",
                "dataset": "data",
                "attack": "nontargeted",
                "budgets": [400],
                "seeds": [0],
                "output": "records.ndjson",
            })
            .to_string(),
        )
        .unwrap();
        let exp = ExperimentSpec::load(&spec_path).unwrap();
        let rows = subspace_sweep(&exp, &[2], &RunOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].side, 2);
        assert!(rows[0].median_final_l2.is_some());
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("side,median_final_l2,success_rate\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
