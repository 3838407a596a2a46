//! Datasets for the benchmark harness: a directory of flat little-endian
//! `f32` point files plus a `manifest.json` carrying the shape, bounds, and
//! labels.
//!
//! The manifest looks like
//!
//! ```json
//! {
//!   "shape": { "height": 1, "width": 100, "channels": 1 },
//!   "bounds": { "lo": 0.0, "hi": 1.0 },
//!   "items": [ { "id": "p000", "file": "p000.f32", "label": 0 } ]
//! }
//! ```
//!
//! and each referenced file holds exactly `d` little-endian `f32` values
//! with no header — the manifest is the single source of truth for the
//! shape. The same headerless layout is what the command-line tool accepts
//! for `--input` and writes for adversarial points, so dataset entries and
//! attack outputs are interchangeable.
//!
//! Loading is eager and validating: every referenced file must exist, have
//! exactly the right byte length, and hold finite in-bounds values. Values
//! that stray outside the box by no more than `f32` rounding slack are
//! clamped silently (writing narrows `f64` to `f32`, which can push a value
//! half an ULP past a bound); anything further out is an error.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio;
use crate::oracle::DecisionOracle;
use crate::point::{Bounds, Domain, Label, Point, Shape};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("dataset item '{id}' ({file}): {message}")]
    Item { id: String, file: String, message: String },
    #[error("oracle failed while labeling generated points: {0}")]
    Labeling(#[from] crate::oracle::OracleError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    shape: Shape,
    #[serde(default)]
    bounds: Bounds,
    items: Vec<ManifestItem>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestItem {
    id: String,
    file: String,
    label: Label,
}

/// One loaded dataset entry.
#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub id: String,
    pub point: Point,
    pub label: Label,
}

/// An eagerly loaded, validated dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub domain: Domain,
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    /// Reads `manifest.json` from `dir` and every point file it references.
    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let manifest_path = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
                path: manifest_path.display().to_string(),
                message: e.to_string(),
            })?;
        if manifest.shape.is_empty() {
            return Err(DatasetError::Manifest {
                path: manifest_path.display().to_string(),
                message: "shape has zero total size".into(),
            });
        }
        if manifest.bounds.lo >= manifest.bounds.hi {
            return Err(DatasetError::Manifest {
                path: manifest_path.display().to_string(),
                message: format!(
                    "bounds [{}, {}] are empty",
                    manifest.bounds.lo, manifest.bounds.hi
                ),
            });
        }
        let domain = Domain::new(manifest.shape, manifest.bounds);

        let mut ids = HashSet::new();
        let mut items = Vec::with_capacity(manifest.items.len());
        for entry in &manifest.items {
            if !ids.insert(entry.id.clone()) {
                return Err(DatasetError::Manifest {
                    path: manifest_path.display().to_string(),
                    message: format!("duplicate item id '{}'", entry.id),
                });
            }
            let path = dir.join(&entry.file);
            let point = read_point_file(&path, domain.shape).map_err(|e| match e {
                DatasetError::Io { path, source } => DatasetError::Item {
                    id: entry.id.clone(),
                    file: path,
                    message: source.to_string(),
                },
                DatasetError::Item { file, message, .. } => DatasetError::Item {
                    id: entry.id.clone(),
                    file,
                    message,
                },
                other => other,
            })?;
            let point = clamp_rounding_slack(point, &domain).map_err(|message| {
                DatasetError::Item {
                    id: entry.id.clone(),
                    file: path.display().to_string(),
                    message,
                }
            })?;
            items.push(DatasetItem { id: entry.id.clone(), point, label: entry.label });
        }
        Ok(Dataset { dir: dir.to_path_buf(), domain, items })
    }

    /// Writes `items` to `dir` (created if needed) as point files plus a
    /// manifest; file names are derived from the ids.
    pub fn save(
        dir: &Path,
        domain: &Domain,
        items: &[(String, Point, Label)],
    ) -> Result<(), DatasetError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut manifest =
            Manifest { shape: domain.shape, bounds: domain.bounds, items: Vec::new() };
        for (id, point, label) in items {
            if point.shape != domain.shape {
                return Err(DatasetError::Item {
                    id: id.clone(),
                    file: String::new(),
                    message: format!(
                        "point shape {} does not match dataset shape {}",
                        point.shape, domain.shape
                    ),
                });
            }
            let file = format!("{id}.f32");
            write_point_file(&dir.join(&file), point)?;
            manifest.items.push(ManifestItem { id: id.clone(), file, label: *label });
        }
        let manifest_path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
        Ok(())
    }

    /// Draws `count` uniform points in the oracle's box, labels each with
    /// the oracle, and writes the result to `dir`. Returns the loaded form.
    pub fn generate<O: DecisionOracle + ?Sized>(
        dir: &Path,
        oracle: &O,
        count: usize,
        seed: u64,
    ) -> Result<Self, DatasetError> {
        let domain = oracle.domain();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = count.saturating_sub(1).max(1).ilog10() as usize + 1;
        let mut items = Vec::with_capacity(count);
        for i in 0..count {
            let values = (0..domain.len())
                .map(|_| rng.gen_range(domain.bounds.lo..=domain.bounds.hi))
                .collect();
            let point = Point::new(domain.shape, values);
            let label = oracle.classify(&point)?;
            items.push((format!("p{i:0width$}"), point, label));
        }
        Self::save(dir, &domain, &items)?;
        Self::load(dir)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Reads a headerless little-endian `f32` point file; the byte length must
/// be exactly `4 · shape.len()`.
pub fn read_point_file(path: &Path, shape: Shape) -> Result<Point, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let expected = shape.len() * 4;
    if bytes.len() != expected {
        return Err(DatasetError::Item {
            id: String::new(),
            file: path.display().to_string(),
            message: format!(
                "holds {} bytes but shape {} needs exactly {} (d={} f32 values)",
                bytes.len(),
                shape,
                expected,
                shape.len()
            ),
        });
    }
    let mut cursor = &bytes[..];
    let values = binio::widen(&binio::read_f32_vec(&mut cursor, shape.len()).map_err(io_err(path))?);
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(DatasetError::Item {
            id: String::new(),
            file: path.display().to_string(),
            message: format!("contains non-finite value {bad}"),
        });
    }
    Ok(Point::new(shape, values))
}

/// Reads a point file and applies the same `f32`-rounding clamp the dataset
/// loader uses — the loader for command-line `--input` and target images.
pub fn read_input_point(path: &Path, domain: &Domain) -> Result<Point, DatasetError> {
    let point = read_point_file(path, domain.shape)?;
    clamp_rounding_slack(point, domain).map_err(|message| DatasetError::Item {
        id: String::new(),
        file: path.display().to_string(),
        message,
    })
}

/// Writes a point as headerless little-endian `f32`, the format
/// [`read_point_file`] reads.
pub fn write_point_file(path: &Path, point: &Point) -> Result<(), DatasetError> {
    let mut bytes = Vec::with_capacity(point.len() * 4);
    binio::write_f32_slice(&mut bytes, &binio::narrow(&point.values)).map_err(io_err(path))?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Clamps coordinates that exceed the box by at most `f32` rounding slack;
/// larger excursions are data errors, not rounding.
fn clamp_rounding_slack(mut point: Point, domain: &Domain) -> Result<Point, String> {
    let slack = domain.bounds.range() * f32::EPSILON as f64 * 4.0;
    for v in &mut point.values {
        if *v < domain.bounds.lo - slack || *v > domain.bounds.hi + slack {
            return Err(format!(
                "value {v} lies outside bounds [{}, {}]",
                domain.bounds.lo, domain.bounds.hi
            ));
        }
        *v = domain.bounds.clamp(*v);
    }
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AffineMulticlassOracle;
    use tempfile::TempDir;

    fn toy_oracle(d: usize) -> AffineMulticlassOracle {
        let domain = Domain::unit(Shape::flat(d));
        AffineMulticlassOracle::binary(vec![1.0; d], d as f64 / 2.0, domain).unwrap()
    }

    #[test]
    fn generate_save_load_round_trip() {
        let dir = TempDir::new().unwrap();
        let oracle = toy_oracle(6);
        let ds = Dataset::generate(dir.path(), &oracle, 12, 9).unwrap();
        assert_eq!(ds.len(), 12);
        assert_eq!(ds.domain, oracle.domain());

        let reloaded = Dataset::load(dir.path()).unwrap();
        assert_eq!(reloaded.len(), 12);
        for (a, b) in ds.items.iter().zip(&reloaded.items) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            assert_eq!(a.point, b.point);
            // Labels in the manifest match what the oracle says.
            assert_eq!(oracle.classify(&b.point).unwrap(), b.label);
        }
    }

    #[test]
    fn point_files_survive_f32_narrowing_within_bounds() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("p.f32");
        // 1.0 - 2^-26 rounds UP to 1.0f32; load must clamp, not reject.
        let point = Point::flat(vec![0.25, 1.0 - 2f64.powi(-26), 0.0]);
        write_point_file(&path, &point).unwrap();
        let shape = Shape::flat(3);
        let read = read_point_file(&path, shape).unwrap();
        let domain = Domain::unit(shape);
        let clamped = clamp_rounding_slack(read, &domain).unwrap();
        assert!(domain.contains(&clamped));
        assert_eq!(clamped.values[1], 1.0);
    }

    #[test]
    fn missing_point_file_names_the_path() {
        let dir = TempDir::new().unwrap();
        let manifest = r#"{
            "shape": { "height": 1, "width": 3, "channels": 1 },
            "items": [ { "id": "a", "file": "gone.f32", "label": 1 } ]
        }"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        let err = Dataset::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("gone.f32"), "error was: {err}");
    }

    #[test]
    fn truncated_point_file_is_rejected_with_both_sizes() {
        let dir = TempDir::new().unwrap();
        let manifest = r#"{
            "shape": { "height": 1, "width": 4, "channels": 1 },
            "items": [ { "id": "a", "file": "short.f32", "label": 0 } ]
        }"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        fs::write(dir.path().join("short.f32"), [0u8; 9]).unwrap();
        let err = Dataset::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("9 bytes") && err.contains("16"), "error was: {err}");
    }

    #[test]
    fn duplicate_ids_and_unknown_fields_are_rejected() {
        let dir = TempDir::new().unwrap();
        let point = Point::flat(vec![0.5, 0.5]);
        write_point_file(&dir.path().join("a.f32"), &point).unwrap();
        let dup = r#"{
            "shape": { "height": 1, "width": 2, "channels": 1 },
            "items": [
                { "id": "a", "file": "a.f32", "label": 0 },
                { "id": "a", "file": "a.f32", "label": 1 }
            ]
        }"#;
        fs::write(dir.path().join("manifest.json"), dup).unwrap();
        let err = Dataset::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "error was: {err}");

        let typo = r#"{
            "shape": { "height": 1, "width": 2, "channels": 1 },
            "shiny": true,
            "items": []
        }"#;
        fs::write(dir.path().join("manifest.json"), typo).unwrap();
        assert!(matches!(
            Dataset::load(dir.path()),
            Err(DatasetError::Manifest { .. })
        ));
    }

    #[test]
    fn far_out_of_bounds_values_are_data_errors() {
        let dir = TempDir::new().unwrap();
        let manifest = r#"{
            "shape": { "height": 1, "width": 2, "channels": 1 },
            "items": [ { "id": "a", "file": "a.f32", "label": 0 } ]
        }"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        write_point_file(&dir.path().join("a.f32"), &Point::flat(vec![0.5, 7.0])).unwrap();
        let err = Dataset::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("outside bounds"), "error was: {err}");
    }

    #[test]
    fn custom_bounds_round_trip_through_the_manifest() {
        let dir = TempDir::new().unwrap();
        let domain = Domain::new(Shape::new(2, 2, 1), Bounds::new(-1.0, 1.0));
        let items = vec![(
            "only".to_string(),
            Point::new(domain.shape, vec![-1.0, -0.5, 0.5, 1.0]),
            Label(3),
        )];
        Dataset::save(dir.path(), &domain, &items).unwrap();
        let ds = Dataset::load(dir.path()).unwrap();
        assert_eq!(ds.domain, domain);
        assert_eq!(ds.items[0].label, Label(3));
        assert_eq!(ds.items[0].point.values, vec![-1.0, -0.5, 0.5, 1.0]);
    }
}
